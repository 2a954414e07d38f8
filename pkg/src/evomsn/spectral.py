"""Global periodicity extraction and per-window local amplitudes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from .errors import LengthMismatch, NoData, SignalTooShort

DEFAULT_K = 4


@dataclass(frozen=True)
class PeriodSet:
    periods: List[int]
    frequencies: List[int]
    mean_amplitudes: List[float]
    analysis_len: int
    requested_k: int = 0

    @property
    def k(self) -> int:
        return len(self.periods)

    def to_dict(self) -> dict:
        return {
            "periods": list(self.periods),
            "frequencies": list(self.frequencies),
            "mean_amplitudes": [float(a) for a in self.mean_amplitudes],
            "analysis_len": self.analysis_len,
            "requested_k": self.requested_k,
        }


def spectrum_amplitudes(x: np.ndarray, axis: int = -2) -> np.ndarray:
    """Moduli of DFT bins 1..floor(t/2) along ``axis`` (DC dropped)."""
    x = np.asarray(x, dtype=np.float64)
    t = x.shape[axis]
    if t < 2:
        raise SignalTooShort(f"need at least 2 samples, got {t}")
    spec = np.fft.rfft(x, axis=axis)
    spec = np.take(spec, np.arange(1, t // 2 + 1), axis=axis)
    return np.abs(spec)


def dft_amplitudes(signal: np.ndarray) -> np.ndarray:
    """Amplitude at frequencies f = 1..floor(t/2); index 0 of the result is f = 1."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise ValueError("dft_amplitudes expects a 1-D signal")
    return spectrum_amplitudes(signal, axis=0)


def _stack_windows(training_windows) -> np.ndarray:
    if isinstance(training_windows, np.ndarray):
        arr = training_windows
    else:
        training_windows = list(training_windows)
        if not training_windows:
            raise NoData("no training windows for period extraction")
        arr = np.stack([np.asarray(w, dtype=np.float64) for w in training_windows])
    if arr.ndim == 2:
        arr = arr[None]
    if arr.size == 0 or arr.shape[0] == 0:
        raise NoData("no training windows for period extraction")
    return arr


def select_periods(mean_amplitudes: np.ndarray, t: int, k: int) -> PeriodSet:
    """Top-k frequencies by amplitude mapped to distinct periods ceil(t/f).

    Ties go to the lower frequency; a frequency whose period collides with
    an already selected one is skipped.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    freqs = np.arange(1, len(mean_amplitudes) + 1)
    order = np.lexsort((freqs, -mean_amplitudes))
    periods, chosen, amps = [], [], []
    for idx in order:
        f = int(freqs[idx])
        p = min(math.ceil(t / f), t)
        if p in periods:
            continue
        periods.append(p)
        chosen.append(f)
        amps.append(float(mean_amplitudes[idx]))
        if len(periods) == k:
            break
    return PeriodSet(periods, chosen, amps, t, requested_k=k)


def extract_global_periods(training_windows: Union[np.ndarray, Sequence[np.ndarray]], k: int = DEFAULT_K) -> PeriodSet:
    """Average amplitude spectrum over windows and channels, then pick top-k periods."""
    arr = _stack_windows(training_windows)
    t = arr.shape[-2]
    amps = spectrum_amplitudes(arr, axis=-2)  # (N, t//2, C)
    mean_amps = amps.mean(axis=(0, 2))
    return select_periods(mean_amps, t, k)


def local_amplitudes(window: np.ndarray, periods: PeriodSet) -> np.ndarray:
    """Per-channel amplitudes at the global frequencies, shape ``(..., k, C)``."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape[-2] != periods.analysis_len:
        raise LengthMismatch(
            f"window length {window.shape[-2]} != analysis length {periods.analysis_len}"
        )
    amps = spectrum_amplitudes(window, axis=-2)
    idx = np.asarray(periods.frequencies) - 1
    return np.take(amps, idx, axis=-2)
