"""Self-describing binary result container ("BISIM1") and CSV export.

Layout, all little-endian:

    magic        6 bytes  b"BISIM1"
    version      u16      currently 1
    n_datasets   u32
    per dataset:
        name         u16 length + utf-8 bytes
        dtype        u16 length + ascii numpy dtype ('<f8' or '<c16')
        ndim         u8
        dims         ndim x u64
        per axis:    name (u16+utf8), unit (u16+utf8), values (dim x f8)
        payload      product(dims) x dtype, C order

Round trips are bit-exact. A run's sidecar summary (config echo, estimates,
library version) is plain YAML next to the binary. Complex datasets export
to CSV as dB magnitudes (20 log10 |.|, exact zeros floored at -300 dB);
float datasets export with 17 significant digits.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError, UsageError
from .processing import magnitude_db

MAGIC = b"BISIM1"
VERSION = 1
_DTYPES = {"<f8", "<c16"}


@dataclass(eq=False)
class Axis:
    name: str
    unit: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype="<f8")
        if self.values.ndim != 1:
            raise ConfigError("axis values must be 1-D")


@dataclass(eq=False)
class Dataset:
    name: str
    values: np.ndarray
    axes: list[Axis]

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values)
        if np.iscomplexobj(arr):
            arr = arr.astype("<c16")
        else:
            arr = arr.astype("<f8")
        self.values = arr
        if len(self.axes) != arr.ndim:
            raise ConfigError(
                f"dataset {self.name!r} has {arr.ndim} dims but {len(self.axes)} axes"
            )
        for ax, dim in zip(self.axes, arr.shape):
            if ax.values.size != dim:
                raise ConfigError(
                    f"axis {ax.name!r} has {ax.values.size} values for a dim of {dim}"
                )


def _write_str(buf: io.BytesIO, s: str):
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ConfigError("string too long for archive header")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _read_str(buf) -> str:
    (n,) = struct.unpack("<H", buf.read(2))
    return buf.read(n).decode("utf-8")


@dataclass(eq=False)
class ResultArchive:
    """Ordered named datasets plus a YAML-serializable summary dict."""

    datasets: dict[str, Dataset] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def add(self, name: str, values: np.ndarray, axes: list[Axis]) -> Dataset:
        ds = Dataset(name, values, axes)
        self.datasets[name] = ds
        return ds

    def write(self, path) -> None:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<H", VERSION))
        buf.write(struct.pack("<I", len(self.datasets)))
        for ds in self.datasets.values():
            _write_str(buf, ds.name)
            _write_str(buf, ds.values.dtype.str)
            buf.write(struct.pack("<B", ds.values.ndim))
            for dim in ds.values.shape:
                buf.write(struct.pack("<Q", dim))
            for ax in ds.axes:
                _write_str(buf, ax.name)
                _write_str(buf, ax.unit)
                buf.write(ax.values.tobytes())
            buf.write(ds.values.tobytes())
        with open(path, "wb") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def read(cls, path) -> "ResultArchive":
        with open(path, "rb") as fh:
            raw = fh.read()
        buf = io.BytesIO(raw)
        if buf.read(6) != MAGIC:
            raise ConfigError(f"{path}: not a BISIM1 archive")
        (version,) = struct.unpack("<H", buf.read(2))
        if version != VERSION:
            raise ConfigError(f"{path}: unsupported archive version {version}")
        (n_sets,) = struct.unpack("<I", buf.read(4))
        archive = cls()
        for _ in range(n_sets):
            name = _read_str(buf)
            dtype = _read_str(buf)
            if dtype not in _DTYPES:
                raise ConfigError(f"{path}: unsupported element type {dtype}")
            (ndim,) = struct.unpack("<B", buf.read(1))
            dims = [struct.unpack("<Q", buf.read(8))[0] for _ in range(ndim)]
            axes = []
            for dim in dims:
                ax_name = _read_str(buf)
                ax_unit = _read_str(buf)
                vals = np.frombuffer(buf.read(8 * dim), dtype="<f8").copy()
                axes.append(Axis(ax_name, ax_unit, vals))
            count = int(np.prod(dims)) if dims else 1
            itemsize = np.dtype(dtype).itemsize
            payload = buf.read(count * itemsize)
            if len(payload) != count * itemsize:
                raise ConfigError(f"{path}: truncated payload for dataset {name!r}")
            values = np.frombuffer(payload, dtype=dtype).copy().reshape(dims)
            archive.datasets[name] = Dataset(name, values, axes)
        return archive

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.summary, fh, sort_keys=False, default_flow_style=False)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def export_csv(archive: ResultArchive, dataset: str, path) -> None:
    """Write one <=2-D dataset as plain CSV with an axis-value header row.

    Complex data exports as dB magnitude; float data keeps 17 significant
    digits so a round trip is value-exact.
    """
    if dataset not in archive.datasets:
        raise ConfigError(f"archive has no dataset {dataset!r}")
    ds = archive.datasets[dataset]
    if ds.values.ndim > 2:
        raise UsageError(
            f"dataset {dataset!r} is {ds.values.ndim}-D; slice it to <=2-D before CSV export"
        )
    if np.iscomplexobj(ds.values):
        values = magnitude_db(ds.values)
        label = "power_db"
    else:
        values = ds.values
        label = "value"
    lines = []
    if ds.values.ndim == 1:
        ax = ds.axes[0]
        lines.append(f"{ax.name}_{ax.unit},{label}")
        for a, v in zip(ax.values, values):
            lines.append(f"{_fmt(a)},{_fmt(v)}")
    else:
        row_ax, col_ax = ds.axes
        header = [f"{row_ax.name}_{row_ax.unit}\\{col_ax.name}_{col_ax.unit}"]
        header += [_fmt(a) for a in col_ax.values]
        lines.append(",".join(header))
        for a, row in zip(row_ax.values, values):
            lines.append(",".join([_fmt(a)] + [_fmt(v) for v in row]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv_column(path, column: int = 1) -> np.ndarray:
    """Read one numeric column back from an exported 1-D CSV."""
    with open(path) as fh:
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return np.array([float(r[column]) for r in rows[1:]])
