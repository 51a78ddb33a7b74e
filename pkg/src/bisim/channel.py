"""Phase-coherent OFDM channel frequency response synthesis over slow time.

A capture is an M x K complex matrix H[m, k] (symbol x subcarrier). Two
synthesis modes:

* fixed      -- paths hold their delay/gain, Doppler applied as a per-symbol
                phasor:  H[m,k] = sum_i a_i exp(-j2πkΔf τ_i) exp(+j2π f_Di m T)
* geometric  -- a callback re-evaluates the path set at every symbol time,
                so delays and carrier phases track the scene geometry and
                Doppler emerges from the carrier phase rotation itself.

Fractional delays are exact frequency-domain phase ramps; the carrier phase
of a path lives in its complex gain, keeping delay-bin positions baseband
consistent. Doppler is a per-symbol phasor only (no intra-symbol ICI), valid
while f_D * T_sym << 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.signal import get_window

from .errors import ConfigError, UsageError

_ORTHO_RTOL = 1e-12


@dataclass(eq=False)
class WaveformConfig:
    """OFDM numerology: carrier, bandwidth, subcarrier and symbol counts.

    T_sym must equal 1/Δf (Δf = B/K) to within 1e-12 relative, the
    orthogonality condition; omit t_sym to derive it exactly.
    """

    f_c: float
    bandwidth: float
    n_subcarriers: int
    n_symbols: int
    t_sym: float | None = None

    def __post_init__(self):
        if self.f_c <= 0 or self.bandwidth <= 0:
            raise ConfigError("carrier and bandwidth must be positive")
        if self.n_subcarriers < 1 or self.n_symbols < 1:
            raise ConfigError("need at least one subcarrier and one symbol")
        if self.t_sym is None:
            self.t_sym = 1.0 / self.delta_f
        elif not math.isclose(self.t_sym * self.delta_f, 1.0, rel_tol=_ORTHO_RTOL):
            raise ConfigError(
                f"t_sym={self.t_sym} violates orthogonality: expected "
                f"1/Δf = {1.0 / self.delta_f}"
            )

    @property
    def delta_f(self) -> float:
        return self.bandwidth / self.n_subcarriers

    @property
    def wavelength(self) -> float:
        from .geometry import C0

        return C0 / self.f_c

    @property
    def duration(self) -> float:
        """Slow-time span of one capture."""
        return self.n_symbols * self.t_sym

    def subcarrier_frequencies(self) -> np.ndarray:
        """Absolute subcarrier frequencies, k indexing offset (k - K/2)·Δf."""
        k = np.arange(self.n_subcarriers)
        return self.f_c + (k - self.n_subcarriers / 2.0) * self.delta_f


@dataclass(eq=False)
class PathParameterSet:
    """One propagation path: delay, Doppler, complex gain, directions.

    The gain carries the carrier phase exp(-j2π f_c τ); dod / doa are unit
    vectors from Tx toward the interaction point and from Rx toward it.
    jones optionally holds the 2x2 polarimetric response of the interaction.
    """

    delay: float
    doppler: float
    gain: complex
    dod: np.ndarray | None = None
    doa: np.ndarray | None = None
    jones: np.ndarray | None = None

    def __post_init__(self):
        if self.delay < 0:
            raise ConfigError(f"path delay must be >= 0, got {self.delay}")


@dataclass(eq=False)
class SlowTimeCube:
    """Complex channel frequency response over (symbol x subcarrier)."""

    data: np.ndarray
    waveform: WaveformConfig
    t0: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        expected = (self.waveform.n_symbols, self.waveform.n_subcarriers)
        if self.data.shape != expected:
            raise UsageError(
                f"cube shape {self.data.shape} does not match waveform {expected}"
            )

    def energy(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2))

    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.data) ** 2))

    def symbol_times(self) -> np.ndarray:
        return self.t0 + np.arange(self.waveform.n_symbols) * self.waveform.t_sym


PathCallback = Callable[[float], Sequence[PathParameterSet]]


def _paths_row(paths: Sequence[PathParameterSet], k: np.ndarray, delta_f: float) -> np.ndarray:
    """Sum of per-path frequency ramps a_i exp(-j2π k Δf τ_i)."""
    if not paths:
        return np.zeros(k.size, dtype=complex)
    delays = np.array([p.delay for p in paths])
    gains = np.array([p.gain for p in paths], dtype=complex)
    return gains @ np.exp(-2j * np.pi * delta_f * np.outer(delays, k))


def synth_cfr(
    paths: Sequence[PathParameterSet] | PathCallback,
    waveform: WaveformConfig,
    mode: str = "fixed",
    t0: float = 0.0,
) -> SlowTimeCube:
    """Synthesize a slow-time CFR capture from path parameters.

    fixed mode takes a static list of paths; geometric mode takes a callback
    t -> paths evaluated at every symbol time t0 + m*T_sym. Superposition is
    exactly linear in the path set.
    """
    w = waveform
    k = np.arange(w.n_subcarriers)
    data = np.empty((w.n_symbols, w.n_subcarriers), dtype=complex)
    if mode == "fixed":
        if callable(paths):
            raise UsageError("fixed mode takes a path list, not a callback")
        delays = np.array([p.delay for p in paths])
        gains = np.array([p.gain for p in paths], dtype=complex)
        dopplers = np.array([p.doppler for p in paths])
        m = np.arange(w.n_symbols)
        if len(paths) == 0:
            data[:] = 0.0
        else:
            ramps = np.exp(-2j * np.pi * w.delta_f * np.outer(delays, k))
            phasors = np.exp(2j * np.pi * w.t_sym * np.outer(m, dopplers))
            data = (phasors * gains[None, :]) @ ramps
    elif mode == "geometric":
        if not callable(paths):
            raise UsageError("geometric mode needs a callback t -> paths")
        for m in range(w.n_symbols):
            data[m] = _paths_row(paths(t0 + m * w.t_sym), k, w.delta_f)
    else:
        raise UsageError(f"unknown synthesis mode {mode!r}")
    return SlowTimeCube(data, w, t0)


def add_noise(cube: SlowTimeCube, snr_db: float, seed: int) -> SlowTimeCube:
    """Add circularly-symmetric complex white noise at the given SNR.

    The noise variance is mean(|H|^2) / 10^(snr/10); snr_db = +inf returns
    the cube unchanged. The full noise block is drawn from one seeded
    generator in a single call, so the result is independent of any
    worker-pool parallelism in the surrounding pipeline.
    """
    if np.isinf(snr_db) and snr_db > 0:
        return SlowTimeCube(cube.data.copy(), cube.waveform, cube.t0)
    if not np.isfinite(snr_db):
        raise ConfigError("snr_db must be finite or +inf")
    sig_power = cube.mean_power()
    var = sig_power / (10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    re_im = rng.standard_normal((*cube.data.shape, 2))
    noise = np.sqrt(var / 2.0) * (re_im[..., 0] + 1j * re_im[..., 1])
    return SlowTimeCube(cube.data + noise, cube.waveform, cube.t0)


def cir_from_cfr(row: np.ndarray, window: str = "none") -> np.ndarray:
    """Inverse DFT of one subcarrier vector -> complex delay profile.

    Delay bin spacing is 1/B for a K-point row spanning bandwidth B. With
    window="none" energy is preserved in the 1/K-IDFT sense:
    sum|h|^2 = (1/K) sum|H|^2.
    """
    row = np.asarray(row, dtype=complex)
    if row.ndim != 1:
        raise UsageError("cir_from_cfr expects a 1-D subcarrier vector")
    if window != "none":
        row = row * get_window(window, row.size, fftbins=True)
    return np.fft.ifft(row)


def delay_axis(n_subcarriers: int, bandwidth: float) -> np.ndarray:
    """Delay bin centers for an n-point CIR over the given bandwidth."""
    return np.arange(n_subcarriers) / bandwidth


def nyquist_check(v_max: float, lam: float, t_sym: float) -> dict:
    """Spatial sampling check: one symbol of motion must stay under λ/2."""
    if v_max < 0 or lam <= 0 or t_sym <= 0:
        raise ConfigError("need v_max >= 0 and positive wavelength/symbol time")
    step = v_max * t_sym
    return {"ok": step < lam / 2.0, "spatial_step": step}
