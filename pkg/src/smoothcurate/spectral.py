"""Spectral arc length of speed profiles.

The score is the negated length of the curve traced by the log-magnitude
spectrum ``(f_k, log(|V_k| + eps))`` from DC to Nyquist. Smooth motion has a
spectrum that falls off quickly and then stays flat, which gives a short curve
and a score near ``-f_Nyquist``; jitter adds ragged high-frequency content and
pushes the score further from zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SpeedSignal, Trajectory, derive_speed_signal
from .errors import SignalTooShort

MIN_SIGNAL_LENGTH = 4


@dataclass(frozen=True)
class SalConfig:
    epsilon: float = 1e-5
    speed_source: str = "auto"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.speed_source not in ("auto", "recorded", "differenced"):
            raise ValueError(f"unknown speed_source {self.speed_source!r}")


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    log_amps: np.ndarray


def one_sided_spectrum(signal: SpeedSignal, cfg: SalConfig = SalConfig()) -> Spectrum:
    """Unnormalised one-sided DFT, bins ``0..floor(T/2)``, no windowing."""
    v = np.asarray(signal.values, dtype=float)
    T = len(v)
    if T < MIN_SIGNAL_LENGTH:
        raise SignalTooShort(f"signal length {T} < {MIN_SIGNAL_LENGTH}")
    mags = np.abs(np.fft.rfft(v))
    freqs = np.arange(T // 2 + 1) / (T * signal.dt)
    return Spectrum(freqs=freqs, log_amps=np.log(mags + cfg.epsilon))


def arc_length(spectrum: Spectrum) -> float:
    df = np.diff(spectrum.freqs)
    dl = np.diff(spectrum.log_amps)
    return float(np.sum(np.sqrt(df * df + dl * dl)))


def sal(signal: SpeedSignal, cfg: SalConfig = SalConfig()) -> float:
    """Spectral arc length; closer to zero is smoother."""
    return -arc_length(one_sided_spectrum(signal, cfg))


def sal_for_trajectory(traj: Trajectory, cfg: SalConfig = SalConfig()) -> float:
    """Mean per-arm SAL (bimanual demonstrations average their arms)."""
    scores = [sal(derive_speed_signal(arm, traj.dt, cfg.speed_source), cfg) for arm in traj.arms]
    return float(np.mean(scores))
