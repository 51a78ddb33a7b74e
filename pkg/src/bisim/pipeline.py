"""Run orchestration: subcommands from config to ResultArchive.

Every subcommand is a pure function of (RunConfig, threads) returning a
ResultArchive; run() also writes the archive, its YAML summary sidecar, and
optional CSV exports. Identical config + seed produce byte-identical
archives for any worker count: parallel sections only fan out pure
per-link / per-angle evaluations that are assembled in a fixed order, and
noise blocks are drawn from per-link seeded generators independent of
scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .archive import Axis, ResultArchive, export_csv
from .channel import SlowTimeCube, add_noise, synth_cfr
from .config import RunConfig, config_echo
from .errors import ConfigError, UsageError
from .fusion import BistaticObservation, fuse
from .geometry import C0
from .illumination import doppler_precompensate, focusing_gain, time_reversal_prefilter
from .processing import (
    delay_doppler_map,
    detect_peaks,
    magnitude_db,
    stft_spectrogram,
    subtract_dominant_paths,
    time_gate,
)
from .scene import illumination_paths, link_callback, link_paths
from .targets import Rotor, flyover_scan, link_budget, reflectivity_scan

SUBCOMMANDS = (
    "simulate",
    "ddmap",
    "spectrogram",
    "clean",
    "localize",
    "reflectivity",
    "flyover",
    "focus",
    "linkbudget",
)


def _base_summary(subcommand: str, cfg: RunConfig) -> dict:
    return {
        "tool": "bisim",
        "version": __version__,
        "subcommand": subcommand,
        "config": config_echo(cfg),
        "results": {},
    }


def _simulate_links(cfg: RunConfig, threads: int) -> list[tuple[str, str, SlowTimeCube]]:
    scene = cfg.scene
    links = scene.links()

    def synth_one(link):
        tx_id, rx_id = link
        if cfg.mode == "geometric":
            cube = synth_cfr(link_callback(scene, tx_id, rx_id), cfg.waveform,
                             mode="geometric", t0=cfg.t0)
        else:
            cube = synth_cfr(link_paths(scene, tx_id, rx_id, cfg.t0), cfg.waveform,
                             mode="fixed", t0=cfg.t0)
        return tx_id, rx_id, cube

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(synth_one, links))
    else:
        out = [synth_one(link) for link in links]
    if cfg.noise.snr_db is not None:
        out = [
            (tx, rx, add_noise(cube, cfg.noise.snr_db, seed=[cfg.noise.seed, i]))
            for i, (tx, rx, cube) in enumerate(out)
        ]
    return out


def _cube_axes(cube: SlowTimeCube) -> list[Axis]:
    return [
        Axis("slow_time", "s", cube.symbol_times()),
        Axis("subcarrier", "Hz", cube.waveform.subcarrier_frequencies()),
    ]


def _los_delay(cfg: RunConfig, tx_id: str, rx_id: str) -> float:
    tx = cfg.scene.node(tx_id).pose(cfg.t0)
    rx = cfg.scene.node(rx_id).pose(cfg.t0)
    return float(np.linalg.norm(rx.position - tx.position)) / C0


def run_simulate(cfg: RunConfig, threads: int = 1) -> ResultArchive:
    archive = ResultArchive(summary=_base_summary("simulate", cfg))
    links = []
    for tx_id, rx_id, cube in _simulate_links(cfg, threads):
        archive.add(f"cfr_{tx_id}_{rx_id}", cube.data, _cube_axes(cube))
        links.append(
            {
                "tx": tx_id,
                "rx": rx_id,
                "los_delay_s": _los_delay(cfg, tx_id, rx_id),
                "los_delay_ns": _los_delay(cfg, tx_id, rx_id) * 1e9,
                "mean_power_db": float(10 * np.log10(max(cube.mean_power(), 1e-300))),
            }
        )
    archive.summary["results"]["links"] = links
    return archive


def _detections_summary(dets, limit: int = 10) -> list[dict]:
    return [
        {
            "delay_s": d.delay,
            "delay_ns": d.delay * 1e9,
            "excess_delay_s": d.excess_delay,
            "excess_delay_ns": d.excess_delay * 1e9,
            "doppler_hz": d.doppler,
            "power_db": d.power_db,
        }
        for d in dets[:limit]
    ]


def run_ddmap(cfg: RunConfig, threads: int = 1) -> ResultArchive:
    archive = ResultArchive(summary=_base_summary("ddmap", cfg))
    results = {}
    for tx_id, rx_id, cube in _simulate_links(cfg, threads):
        if cfg.processing.clean_paths > 0:
            cube = subtract_dominant_paths(cube, cfg.processing.clean_paths).residual
        ddm = delay_doppler_map(cube, cfg.processing.fast_window, cfg.processing.slow_window)
        archive.add(
            f"ddmap_{tx_id}_{rx_id}",
            ddm.data,
            [Axis("delay", "s", ddm.delay_s), Axis("doppler", "Hz", ddm.doppler_hz)],
        )
        dets = detect_peaks(
            ddm,
            cfg.processing.detect_threshold_db,
            exclude_zero_doppler=cfg.processing.exclude_zero_doppler,
            los_delay_s=_los_delay(cfg, tx_id, rx_id),
        )
        results[f"{tx_id}_{rx_id}"] = {"detections": _detections_summary(dets)}
    archive.summary["results"] = results
    return archive


def _delay_bin_series(cube: SlowTimeCube) -> tuple[np.ndarray, int]:
    """Slow-time series at the strongest mean-power delay bin."""
    profiles = np.fft.ifft(cube.data, axis=1)
    bin_idx = int(np.argmax(np.mean(np.abs(profiles) ** 2, axis=0)))
    return profiles[:, bin_idx], bin_idx


def run_spectrogram(cfg: RunConfig, threads: int = 1) -> ResultArchive:
    archive = ResultArchive(summary=_base_summary("spectrogram", cfg))
    results = {}
    st = cfg.processing.stft
    for tx_id, rx_id, cube in _simulate_links(cfg, threads):
        series, bin_idx = _delay_bin_series(cube)
        spec = stft_spectrogram(series, cube.waveform.t_sym, st.fft_size, st.hop, st.window)
        archive.add(
            f"spectrogram_{tx_id}_{rx_id}",
            spec.data,
            [Axis("slow_time", "s", spec.time_s), Axis("doppler", "Hz", spec.doppler_hz)],
        )
        results[f"{tx_id}_{rx_id}"] = {
            "fft_size": spec.fft_size,
            "hop": spec.hop,
            "window": spec.window,
            "gaussian_sigma": spec.sigma,
            "delay_bin": bin_idx,
            "observation_s": float(cube.waveform.duration),
        }
    archive.summary["results"] = results
    return archive


def run_clean(cfg: RunConfig, threads: int = 1) -> ResultArchive:
    archive = ResultArchive(summary=_base_summary("clean", cfg))
    results = {}
    n = cfg.processing.clean_paths
    for tx_id, rx_id, cube in _simulate_links(cfg, threads):
        res = subtract_dominant_paths(cube, n)
        archive.add(f"clean_residual_{tx_id}_{rx_id}", res.residual.data, _cube_axes(cube))
        results[f"{tx_id}_{rx_id}"] = {
            "removed": [
                {
                    "delay_s": p.delay,
                    "delay_ns": p.delay * 1e9,
                    "gain_db": float(magnitude_db(np.array(p.gain))),
                    "at_noise_floor": bool(flag),
                }
                for p, flag in zip(res.removed, res.at_noise_floor)
            ]
        }
    archive.summary["results"] = results
    return archive


def _parabolic_offset(m1: float, p0: float, p1: float) -> float:
    denom = m1 - 2.0 * p0 + p1
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (m1 - p1) / denom, -0.5, 0.5))


def run_localize(cfg: RunConfig, threads: int = 1) -> ResultArchive:
    """Per-link peak extraction followed by multistatic fusion."""
    archive = ResultArchive(summary=_base_summary("localize", cfg))
    obs = []
    per_link = {}
    for tx_id, rx_id, cube in _simulate_links(cfg, threads):
        if cfg.processing.clean_paths > 0:
            cube = subtract_dominant_paths(cube, cfg.processing.clean_paths).residual
        ddm = delay_doppler_map(cube, cfg.processing.fast_window, cfg.processing.slow_window)
        los = _los_delay(cfg, tx_id, rx_id)
        dets = detect_peaks(ddm, cfg.processing.detect_threshold_db,
                            exclude_zero_doppler=True, los_delay_s=los)
        if not dets:
            per_link[f"{tx_id}_{rx_id}"] = {"detections": []}
            continue
        d = dets[0]
        mag = np.abs(ddm.data)
        i, j = d.delay_bin, d.doppler_bin
        di = _parabolic_offset(
            mag[(i - 1) % mag.shape[0], j], mag[i, j], mag[(i + 1) % mag.shape[0], j]
        )
        dj = _parabolic_offset(
            mag[i, (j - 1) % mag.shape[1]], mag[i, j], mag[i, (j + 1) % mag.shape[1]]
        )
        delay = d.delay + di / cube.waveform.bandwidth
        dopp_step = float(ddm.doppler_hz[1] - ddm.doppler_hz[0])
        doppler = d.doppler + dj * dopp_step
        obs.append(
            BistaticObservation(
                tx_id=tx_id,
                rx_id=rx_id,
                excess_delay=max(delay - los, 0.0),
                doppler=doppler,
                wavelength=cfg.scene.wavelength,
                timestamp=cfg.t0,
            )
        )
        per_link[f"{tx_id}_{rx_id}"] = {"detections": _detections_summary(dets, 3)}
    if not obs:
        raise ConfigError("no link produced a detection; cannot localize")
    nodes = {n.node_id: n.pose(cfg.t0) for n in [*cfg.scene.tx_nodes, *cfg.scene.rx_nodes]}
    est = fuse(obs, nodes, dim=2)
    if not est.converged:
        archive.summary["numerical_failure"] = "localization did not converge"
    archive.add("position", est.position, [Axis("axis", "index", np.arange(3))])
    archive.add("velocity", est.velocity, [Axis("axis", "index", np.arange(3))])
    archive.summary["results"] = {
        "links": per_link,
        "estimate": {
            "position_m": [float(x) for x in est.position],
            "velocity_m_s": [float(x) for x in est.velocity],
            "position_residual_rms_m": est.position_residual_rms,
            "velocity_residual_rms_hz": est.velocity_residual_rms,
            "range_condition": float(est.range_condition),
            "doppler_condition": float(est.doppler_condition),
            "doppler_rank": est.doppler_rank,
            "ambiguous": est.ambiguous,
            "converged": est.converged,
            "alternates_m": [[float(x) for x in p] for p in est.alternates],
        },
    }
    return archive


def run_reflectivity(cfg: RunConfig, threads: int = 1) -> ResultArchive:
    if cfg.reflectivity is None:
        raise ConfigError("config has no reflectivity section")
    job = cfg.reflectivity
    target = cfg.target_by_name(job.target)
    tensor = reflectivity_scan(target, job.grid, job.d_tx, job.d_rx, job.band,
                               sweep_window=job.sweep_window, threads=threads)
    archive = ResultArchive(summary=_base_summary("reflectivity", cfg))
    pol = np.array([0.0, 1.0])
    archive.add(
        "reflectivity",
        tensor.data,
        [
            Axis("az_tx", "deg", tensor.az_tx_deg),
            Axis("el_tx", "deg", tensor.el_tx_deg),
            Axis("az_rx", "deg", tensor.az_rx_deg),
            Axis("el_rx", "deg", tensor.el_rx_deg),
            Axis("delay", "s", tensor.delay_s),
            Axis("rx_pol", "index", pol),
            Axis("tx_pol", "index", pol),
        ],
    )
    archive.summary["results"] = {
        "target": getattr(target, "name", "target"),
        "d_tx_m": job.d_tx,
        "d_rx_m": job.d_rx,
        "grid_points": int(
            len(tensor.az_tx_deg) * len(tensor.el_tx_deg)
            * len(tensor.az_rx_deg) * len(tensor.el_rx_deg)
        ),
    }
    return archive


def run_flyover(cfg: RunConfig, threads: int = 1) -> ResultArchive:
    if cfg.flyover is None:
        raise ConfigError("config has no flyover section")
    job = cfg.flyover
    target = cfg.target_by_name(job.target)
    fly = flyover_scan(
        target,
        job.fixed_angle_deg,
        (job.start_deg, job.stop_deg, job.step_deg),
        job.d_tx,
        job.d_rx,
        job.band,
        elevation_deg=job.elevation_deg,
        sweep_window=job.sweep_window,
        threads=threads,
    )
    data = fly.data
    if cfg.processing.gate is not None:
        g = cfg.processing.gate
        data = time_gate(data, fly.delay_s, g.center_ns * 1e-9, g.width_ns * 1e-9,
                         g.edge_ns * 1e-9)
    archive = ResultArchive(summary=_base_summary("flyover", cfg))
    archive.add(
        "flyover",
        data,
        [Axis("bistatic_angle", "deg", fly.angles_deg), Axis("delay", "ns", fly.delay_s * 1e9)],
    )
    archive.summary["results"] = {
        "target": getattr(target, "name", "target"),
        "angles_deg": [float(a) for a in fly.angles_deg],
        "delay_resolution_ns": float(1e9 / (job.band.f_hi - job.band.f_lo)),
        "gated": cfg.processing.gate is not None,
    }
    return archive


def _target_center_velocity(cfg: RunConfig, target) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(target, Rotor):
        return target.hub_offset, np.zeros(3)
    from .geometry import pose_at

    pose = pose_at(target.trajectory, cfg.t0)
    return pose.position, pose.velocity


def run_focus(cfg: RunConfig, threads: int = 1) -> ResultArchive:
    """Time-reversal prefilters and Doppler matching for every Tx node."""
    archive = ResultArchive(summary=_base_summary("focus", cfg))
    target = cfg.target_by_name(None)
    point, velocity = _target_center_velocity(cfg, target)
    w = cfg.waveform
    k = np.arange(w.n_subcarriers)
    results = {}
    for tx in cfg.scene.tx_nodes:
        paths = illumination_paths(cfg.scene, tx.node_id, point, cfg.t0,
                                   point_velocity=velocity)
        delays = np.array([p.delay for p in paths])
        gains = np.array([p.gain for p in paths])
        cfr = gains @ np.exp(-2j * np.pi * w.delta_f * np.outer(delays, k))
        pre = time_reversal_prefilter(cfr)
        comp = doppler_precompensate(paths)
        archive.add(
            f"prefilter_{tx.node_id}",
            pre,
            [Axis("subcarrier", "Hz", w.subcarrier_frequencies())],
        )
        results[tx.node_id] = {
            "n_paths": len(paths),
            "focusing_gain": focusing_gain(cfr),
            "focusing_gain_db": float(10 * np.log10(focusing_gain(cfr))),
            "doppler_spread_before_hz": comp.spread_before_hz,
            "doppler_spread_after_hz": comp.spread_after_hz,
            "doppler_reference_hz": comp.reference_hz,
        }
    archive.summary["results"] = results
    return archive


def run_linkbudget(cfg: RunConfig, threads: int = 1) -> ResultArchive:
    if cfg.budget is None:
        raise ConfigError("config has no budget section")
    out = link_budget(cfg.budget)
    archive = ResultArchive(summary=_base_summary("linkbudget", cfg))
    archive.add(
        "received_power_dbm",
        np.array([out["received_power_dbm"]]),
        [Axis("value", "dBm", np.zeros(1))],
    )
    archive.add(
        "processing_gain_db",
        np.array([out["processing_gain_db"]]),
        [Axis("value", "dB", np.zeros(1))],
    )
    archive.summary["results"] = dict(out)
    return archive


_RUNNERS = {
    "simulate": run_simulate,
    "ddmap": run_ddmap,
    "spectrogram": run_spectrogram,
    "clean": run_clean,
    "localize": run_localize,
    "reflectivity": run_reflectivity,
    "flyover": run_flyover,
    "focus": run_focus,
    "linkbudget": run_linkbudget,
}


def run(subcommand: str, cfg: RunConfig, out_dir=None, threads: int = 1,
        fmt: str | None = None) -> tuple[ResultArchive, list[Path]]:
    """Execute one subcommand, write its archive + summary, return both.

    Returns the archive and the list of files written. fmt="csv"
    additionally exports every dataset of <= 2 dimensions.
    """
    if subcommand not in _RUNNERS:
        raise UsageError(f"unknown subcommand {subcommand!r}")
    archive = _RUNNERS[subcommand](cfg, threads=threads)
    out_dir = Path(out_dir if out_dir is not None else cfg.outputs.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    fmt = fmt or cfg.outputs.format
    written = []
    bin_path = out_dir / f"{subcommand}.bisim"
    archive.write(bin_path)
    written.append(bin_path)
    summary_path = out_dir / f"{subcommand}_summary.yaml"
    archive.write_summary(summary_path)
    written.append(summary_path)
    if fmt == "csv":
        for name, ds in archive.datasets.items():
            if ds.values.ndim <= 2:
                csv_path = out_dir / f"{subcommand}_{name}.csv"
                export_csv(archive, name, csv_path)
                written.append(csv_path)
    return archive, written
