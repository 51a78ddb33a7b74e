"""Transmit-side target-link predistortion: time reversal and Doppler matching.

Time reversal convolves the transmit signal with the conjugated,
time-mirrored illumination channel; in the frequency domain that is simply
the conjugate spectrum. All multipath copies then coincide at the target in
time and add in phase, focusing the illumination power. Doppler matching
pre-offsets each illumination path so their Doppler shifts collapse onto a
common reference, removing the effective Doppler spread at the target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import PathParameterSet
from .errors import ConfigError


def time_reversal_prefilter(tx_to_target_cfr: np.ndarray) -> np.ndarray:
    """Unit-energy conjugate of the illumination spectrum.

    Frequency-domain equivalent of transmitting the time-mirrored conjugate
    impulse response; normalized so that sum |g|^2 = 1, which makes focusing
    comparisons power-fair.
    """
    cfr = np.asarray(tx_to_target_cfr, dtype=complex)
    if cfr.ndim != 1:
        raise ConfigError("prefilter expects a 1-D subcarrier vector")
    energy = float(np.sum(np.abs(cfr) ** 2))
    if energy <= 0.0:
        raise ConfigError("illumination channel has no energy")
    return np.conj(cfr) / np.sqrt(energy)


def focusing_gain(tx_to_target_cfr: np.ndarray) -> float:
    """Peak received power with time reversal over the unfocused peak.

    Both excitations carry unit transmit energy: the prefilter versus a
    flat spectrum. The cascade H·conj(H) is real and nonnegative, so its
    peak is the coherent sum of all path power; the ratio is >= 1 for every
    channel and exactly N for N equal-power paths at distinct on-grid
    delays.
    """
    cfr = np.asarray(tx_to_target_cfr, dtype=complex)
    g = time_reversal_prefilter(cfr)
    flat = np.ones(cfr.size) / np.sqrt(cfr.size)
    focused_peak = float(np.max(np.abs(np.fft.ifft(cfr * g)) ** 2))
    unfocused_peak = float(np.max(np.abs(np.fft.ifft(cfr * flat)) ** 2))
    return focused_peak / unfocused_peak


def _weighted_spread(dopplers: np.ndarray, powers: np.ndarray) -> tuple[float, float]:
    total = float(powers.sum())
    mean = float(np.sum(powers * dopplers) / total)
    if np.ptp(dopplers) == 0.0:
        return float(dopplers[0]), 0.0
    spread = float(np.sqrt(np.sum(powers * (dopplers - mean) ** 2) / total))
    return mean, spread


@dataclass(eq=False)
class DopplerCompensation:
    """Per-path Doppler matching result with before/after spreads (Hz)."""

    paths: list[PathParameterSet]
    offsets_hz: np.ndarray
    reference_hz: float
    spread_before_hz: float
    spread_after_hz: float


def doppler_precompensate(paths) -> DopplerCompensation:
    """Shift every illumination path's Doppler onto the power-weighted mean.

    Applies the per-path offset -f_D,i + f_ref, so in the ideal per-path
    model the residual power-weighted Doppler spread is exactly zero while
    the total path power is untouched. Both the original and the residual
    spread are reported.
    """
    paths = list(paths)
    if not paths:
        raise ConfigError("need at least one path")
    dopplers = np.array([p.doppler for p in paths])
    powers = np.array([abs(p.gain) ** 2 for p in paths])
    if powers.sum() <= 0:
        raise ConfigError("paths carry no power")
    f_ref, before = _weighted_spread(dopplers, powers)
    offsets = f_ref - dopplers
    # applying -f_D,i + f_ref lands every path exactly on the reference
    compensated = [
        PathParameterSet(p.delay, f_ref, p.gain, p.dod, p.doa, p.jones)
        for p in paths
    ]
    _, after = _weighted_spread(np.array([p.doppler for p in compensated]), powers)
    return DopplerCompensation(compensated, offsets, f_ref, before, after)
