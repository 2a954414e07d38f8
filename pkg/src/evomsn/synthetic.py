"""Desk-scale benchmark streams: multi-period seasonality under regime switches and variance growth."""
from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from .series import MultiSeries


def regime_stream(
    T: int = 4000,
    periods: Sequence[int] = (24, 12),
    amplitudes: Optional[Sequence[float]] = None,
    n_channels: int = 3,
    switch_points: Sequence[float] = (0.45, 0.75),
    level_jumps: Sequence[float] = (2.0, -1.5),
    variance_growth: float = 2.0,
    shape_drift: float = 0.0,
    period_drift: float = 0.04,
    drift_scale: float = 0.02,
    noise: float = 0.1,
    ar_coef: Union[float, Sequence[float]] = 0.6,
    seed: int = 0,
) -> MultiSeries:
    """Seasonal channels on a drifting level with abrupt mean switches.

    ``switch_points`` are fractions of ``T`` where the level jumps by the
    matching ``level_jumps`` entry. Seasonal amplitude and noise scale grow
    linearly from 1 to ``1 + variance_growth`` over the stream.
    ``shape_drift`` gradually reweights the seasonal components: the
    shorter-period terms scale by ``1 + shape_drift * t / T`` while the
    dominant term scales by ``1 - shape_drift * t / (2T)``, so the
    normalized input-output relation itself changes over time.
    ``period_drift`` stretches every period by the factor
    ``1 + period_drift * t / T`` (a slow chirp that changes the lag
    structure a forecaster must track).
    ``ar_coef`` may give one AR(1) noise coefficient per regime
    (``len(switch_points) + 1`` values).
    """
    rng = np.random.default_rng(seed)
    t = np.arange(T, dtype=np.float64)
    if amplitudes is None:
        amplitudes = [1.0 / (j + 1) for j in range(len(periods))]
    scale = 1.0 + variance_growth * t / max(T - 1, 1)
    coefs = np.atleast_1d(np.asarray(ar_coef, dtype=np.float64))
    if coefs.size == 1:
        coefs = np.repeat(coefs, len(switch_points) + 1)
    if coefs.size != len(switch_points) + 1:
        raise ValueError("ar_coef needs one value or one per regime")
    regime = np.searchsorted([int(f * T) for f in switch_points], np.arange(T), side="right")
    phi = coefs[regime]
    out = np.empty((T, n_channels))
    for c in range(n_channels):
        gain = rng.uniform(0.7, 1.3, size=len(periods))
        phase = rng.uniform(0, 2 * np.pi, size=len(periods))
        frac = t / T
        mix = [1.0 - 0.5 * shape_drift * frac] + [1.0 + shape_drift * frac] * (len(periods) - 1)
        stretch = 1.0 + period_drift * frac
        seasonal = sum(a * g * w * np.sin(2 * np.pi * np.cumsum(1.0 / (p * stretch)) + ph)
                       for a, g, w, p, ph in zip(amplitudes, gain, mix, periods, phase))
        level = np.cumsum(rng.normal(0.0, drift_scale, size=T))
        for point, jump in zip(switch_points, level_jumps):
            level[int(point * T):] += jump * rng.uniform(0.8, 1.2)
        eps = rng.normal(0.0, noise, size=T)
        ar = np.empty(T)
        ar[0] = eps[0]
        for i in range(1, T):
            ar[i] = phi[i] * ar[i - 1] + eps[i]
        out[:, c] = level + scale * (seasonal + ar)
    return MultiSeries(out, [f"ch{c}" for c in range(n_channels)])


def periodic_stream(T: int, periods: Sequence[int], amplitudes: Sequence[float], n_channels: int = 1,
                    noise: float = 0.0, seed: int = 0) -> MultiSeries:
    """Sum of sines with random per-channel phases plus white noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(T, dtype=np.float64)
    out = np.empty((T, n_channels))
    for c in range(n_channels):
        out[:, c] = sum(a * np.sin(2 * np.pi * t / p + rng.uniform(0, 2 * np.pi))
                        for a, p in zip(amplitudes, periods))
        out[:, c] += rng.normal(0.0, noise, size=T) if noise else 0.0
    return MultiSeries(out, [f"ch{c}" for c in range(n_channels)])
