"""Radar echo processing: delay-Doppler maps, clutter removal, micro-Doppler.

The chain mirrors a passive OFDM sensing receiver: inverse transform over
subcarriers (fast time -> delay), forward transform over symbols (slow time
-> Doppler), static clutter collapsing at the 0 Hz bin, background and
dominant-path subtraction ahead of the Doppler FFT, and STFT spectrograms
for time-variant targets. Both map transforms are orthonormal so total map
energy equals cube energy with rectangular windows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.optimize import minimize_scalar
from scipy.signal import get_window
from scipy.signal.windows import gaussian as gaussian_window

from .channel import PathParameterSet, SlowTimeCube
from .errors import ConfigError, UsageError

DB_FLOOR = -300.0


def magnitude_db(x, floor_db: float = DB_FLOOR) -> np.ndarray:
    """20 log10 |x| with exact zeros clamped to the floor."""
    mag = np.abs(np.asarray(x))
    out = np.full(mag.shape, floor_db, dtype=float)
    np.log10(mag, out=out, where=mag > 0)
    out = np.where(mag > 0, 20.0 * out, floor_db)
    return np.maximum(out, floor_db)


def _window(name: str, n: int) -> np.ndarray:
    if name in (None, "none", "rect", "rectangular"):
        return np.ones(n)
    return get_window(name, n, fftbins=True)


@dataclass(eq=False)
class DelayDopplerMap:
    """Complex (delay bin x Doppler bin) map with centered Doppler axis."""

    data: np.ndarray          # (n_delay, n_doppler)
    delay_s: np.ndarray
    doppler_hz: np.ndarray
    fast_window: str = "none"
    slow_window: str = "none"

    def __post_init__(self):
        if self.data.shape != (len(self.delay_s), len(self.doppler_hz)):
            raise UsageError("map shape inconsistent with axes")

    @property
    def zero_doppler_bin(self) -> int:
        return int(np.argmin(np.abs(self.doppler_hz)))

    def magnitude_db(self, normalize: bool = False) -> np.ndarray:
        db = magnitude_db(self.data)
        if normalize:
            db = db - db.max()
        return db

    def energy(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2))


def delay_doppler_map(cube: SlowTimeCube, fast_window: str = "none",
                      slow_window: str = "none") -> DelayDopplerMap:
    """Delay-Doppler map of a slow-time capture.

    Unitary IFFT over subcarriers per symbol, unitary FFT over symbols per
    delay bin, fftshifted so 0 Hz is an exact center bin (even M keeps the
    zero-Doppler energy in one unstraddled bin). Static paths land entirely
    in that bin; movers separate along the Doppler axis at resolution
    1/(M*T_sym).
    """
    w = cube.waveform
    if w.n_symbols < 2:
        raise UsageError("need at least two symbols for Doppler resolution")
    wf = _window(fast_window, w.n_subcarriers)
    ws = _window(slow_window, w.n_symbols)
    profiles = np.fft.ifft(cube.data * wf[None, :], axis=1, norm="ortho")
    dd = np.fft.fft(profiles * ws[:, None], axis=0, norm="ortho")
    dd = np.fft.fftshift(dd, axes=0).T
    delay = np.arange(w.n_subcarriers) / w.bandwidth
    doppler = np.fft.fftshift(np.fft.fftfreq(w.n_symbols, w.t_sym))
    return DelayDopplerMap(dd, delay, doppler, fast_window, slow_window)


def background_subtract(measurement: SlowTimeCube, background: SlowTimeCube) -> SlowTimeCube:
    """Elementwise difference of two captures with identical waveforms.

    By linearity of the synthesis, a noiseless target+clutter capture minus
    its clutter-only background is exactly the target-only capture.
    """
    mw, bw = measurement.waveform, background.waveform
    if (mw.n_symbols, mw.n_subcarriers) != (bw.n_symbols, bw.n_subcarriers):
        raise UsageError("measurement and background shapes differ")
    if not (mw.f_c == bw.f_c and mw.bandwidth == bw.bandwidth):
        raise UsageError("measurement and background waveforms differ")
    return SlowTimeCube(measurement.data - background.data, mw, measurement.t0)


def time_gate(values: np.ndarray, delay_s: np.ndarray, center_s: float,
              width_s: float, edge_s: float = 0.0) -> np.ndarray:
    """Zero delay bins outside [center - width/2, center + width/2].

    Gating applies along the last axis of `values`. edge_s > 0 replaces the
    hard edges with raised-cosine tapers of that width.
    """
    if width_s <= 0:
        raise ConfigError("gate width must be positive")
    lo = center_s - width_s / 2.0
    hi = center_s + width_s / 2.0
    if hi < delay_s[0] or lo > delay_s[-1]:
        raise ConfigError("gate lies entirely outside the delay axis")
    if edge_s <= 0:
        mask = ((delay_s >= lo) & (delay_s <= hi)).astype(float)
    else:
        mask = np.zeros(delay_s.shape)
        core = (delay_s >= lo + edge_s) & (delay_s <= hi - edge_s)
        mask[core] = 1.0
        rising = (delay_s >= lo) & (delay_s < lo + edge_s)
        mask[rising] = 0.5 * (1 - np.cos(np.pi * (delay_s[rising] - lo) / edge_s))
        falling = (delay_s > hi - edge_s) & (delay_s <= hi)
        mask[falling] = 0.5 * (1 - np.cos(np.pi * (hi - delay_s[falling]) / edge_s))
    return values * mask


@dataclass(eq=False)
class CleanResult:
    """Residual capture plus the static paths removed from it."""

    residual: SlowTimeCube
    removed: list[PathParameterSet] = field(default_factory=list)
    at_noise_floor: list[bool] = field(default_factory=list)
    peak_db_above_floor: list[float] = field(default_factory=list)


def _ramp(tau: float, k: np.ndarray, delta_f: float) -> np.ndarray:
    return np.exp(-2j * np.pi * delta_f * tau * k)


def _fit_static_path(mean_row: np.ndarray, delta_f: float, bandwidth: float,
                     tau_hint: float | None = None) -> tuple[float, complex]:
    """Best (delay, amplitude) of one static path against a mean CFR row.

    Coarse peak from the delay profile, then continuous delay refinement by
    maximizing the matched-ramp correlation (Brent over +/- one bin), then
    closed-form least-squares amplitude.
    """
    k = np.arange(mean_row.size)
    n = mean_row.size
    if tau_hint is None:
        profile = np.fft.ifft(mean_row)
        peak = int(np.argmax(np.abs(profile)))
        tau0 = peak / bandwidth
    else:
        tau0 = tau_hint

    def neg_corr(tau):
        return -abs(np.vdot(_ramp(tau, k, delta_f), mean_row))

    span = 1.0 / bandwidth
    res = minimize_scalar(
        neg_corr,
        bounds=(tau0 - span, tau0 + span),
        method="bounded",
        options={"xatol": 1e-16},
    )
    tau = float(np.clip(res.x, 0.0, None))
    ramp = _ramp(tau, k, delta_f)
    amp = complex(np.vdot(ramp, mean_row) / n)
    return tau, amp


def subtract_dominant_paths(cube: SlowTimeCube, n_paths: int,
                            refine_cycles: int = 3,
                            floor_margin_db: float = 10.0) -> CleanResult:
    """Iteratively remove the strongest static (zero-Doppler) paths.

    Each pass locates the strongest delay peak of the slow-time-averaged
    profile, refines its delay continuously, least-squares fits the complex
    amplitude against the model phase ramp, and subtracts the reconstructed
    path from every symbol. A few alternating re-fit cycles polish mutually
    interfering paths. Paths whose peak rises less than floor_margin_db
    above the profile median are flagged as at the noise floor.
    """
    if n_paths < 0:
        raise ConfigError("n_paths must be >= 0")
    w = cube.waveform
    data = cube.data.copy()
    result = CleanResult(SlowTimeCube(data, w, cube.t0))
    if n_paths == 0:
        return result
    k = np.arange(w.n_subcarriers)
    estimates: list[tuple[float, complex]] = []
    for _ in range(n_paths):
        mean_row = data.mean(axis=0)
        profile = np.abs(np.fft.ifft(mean_row))
        floor = float(np.median(profile))
        peak = float(profile.max())
        above = 20.0 * np.log10(peak / floor) if floor > 0 else np.inf
        tau, amp = _fit_static_path(mean_row, w.delta_f, w.bandwidth)
        data -= amp * _ramp(tau, k, w.delta_f)[None, :]
        estimates.append((tau, amp))
        result.at_noise_floor.append(above < floor_margin_db)
        result.peak_db_above_floor.append(above)
    for _ in range(refine_cycles if len(estimates) > 1 else 0):
        for i, (tau_i, amp_i) in enumerate(estimates):
            data += amp_i * _ramp(tau_i, k, w.delta_f)[None, :]
            tau, amp = _fit_static_path(data.mean(axis=0), w.delta_f, w.bandwidth,
                                        tau_hint=tau_i)
            data -= amp * _ramp(tau, k, w.delta_f)[None, :]
            estimates[i] = (tau, amp)
    result.removed = [
        PathParameterSet(delay=tau, doppler=0.0, gain=amp) for tau, amp in estimates
    ]
    return result


@dataclass(eq=False)
class Spectrogram:
    """STFT magnitude over slow time, dB normalized to the map peak."""

    data: np.ndarray              # (n_frames, fft_size) dB
    time_s: np.ndarray
    doppler_hz: np.ndarray
    fft_size: int
    hop: int
    window: str
    sigma: float

    def __post_init__(self):
        if self.data.shape[1] != self.fft_size:
            raise UsageError("spectrogram column count must equal fft_size")


def stft_spectrogram(series: np.ndarray, t_step: float, fft_size: int = 2048,
                     hop: int = 32, window: str = "gaussian",
                     sigma: float | None = None, t0: float = 0.0) -> Spectrogram:
    """Sliding-window Doppler spectrogram of a complex slow-time series.

    Frames start every `hop` samples; each is windowed (Gaussian with
    sigma = fft_size/6 by default), FFT'd, fftshift-centered, and converted
    to dB relative to the spectrogram peak. The Doppler axis spans
    +/- 1/(2 t_step).
    """
    series = np.asarray(series, dtype=complex)
    if series.ndim != 1:
        raise UsageError("spectrogram input must be a 1-D slow-time series")
    if series.size < fft_size:
        raise ConfigError(
            f"series of {series.size} samples is shorter than fft_size={fft_size}"
        )
    if window == "gaussian":
        sigma = fft_size / 6.0 if sigma is None else sigma
        win = gaussian_window(fft_size, std=sigma, sym=False)
    else:
        win = _window(window, fft_size)
        sigma = 0.0
    starts = np.arange(0, series.size - fft_size + 1, hop)
    frames = np.stack([series[s:s + fft_size] * win for s in starts])
    spec = np.fft.fftshift(np.fft.fft(frames, axis=1), axes=1)
    db = magnitude_db(spec)
    peak = db.max()
    if peak > DB_FLOOR:
        db = np.maximum(db - peak, DB_FLOOR)
    doppler = np.fft.fftshift(np.fft.fftfreq(fft_size, t_step))
    times = t0 + (starts + fft_size / 2.0) * t_step
    return Spectrogram(db, times, doppler, fft_size, hop, window, float(sigma))


@dataclass(eq=False)
class Detection:
    """One delay-Doppler peak above the detection threshold."""

    delay: float
    doppler: float
    power_db: float
    excess_delay: float
    delay_bin: int
    doppler_bin: int


def detect_peaks(ddm: DelayDopplerMap, threshold_db: float,
                 exclude_zero_doppler: bool = False,
                 los_delay_s: float = 0.0) -> list[Detection]:
    """Local maxima above (median noise floor + threshold).

    The floor is the median map magnitude in dB, robust to sparse targets.
    exclude_zero_doppler drops the 0 Hz bin column, separating static
    clutter from movers. excess_delay is reported relative to los_delay_s.
    """
    if not np.isfinite(threshold_db):
        raise ConfigError("threshold must be finite")
    db = magnitude_db(ddm.data)
    floor = float(np.median(db))
    limit = floor + threshold_db
    local_max = db >= maximum_filter(db, size=3, mode="wrap")
    candidates = local_max & (db >= limit)
    if exclude_zero_doppler:
        candidates[:, ddm.zero_doppler_bin] = False
    out = []
    for i, j in np.argwhere(candidates):
        out.append(
            Detection(
                delay=float(ddm.delay_s[i]),
                doppler=float(ddm.doppler_hz[j]),
                power_db=float(db[i, j]),
                excess_delay=float(ddm.delay_s[i] - los_delay_s),
                delay_bin=int(i),
                doppler_bin=int(j),
            )
        )
    out.sort(key=lambda d: -d.power_db)
    return out
