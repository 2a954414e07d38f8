from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from .errors import NoData, ShapeError


def mse_mae(pred: np.ndarray, truth: np.ndarray) -> Tuple[float, float]:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    err = pred - truth
    return float(np.mean(err * err)), float(np.mean(np.abs(err)))


def cumulative_average(losses: Sequence[float]) -> np.ndarray:
    """Running mean c_n = (1/n) * sum of the first n losses."""
    arr = np.asarray(losses, dtype=np.float64)
    if arr.size == 0:
        raise NoData("cumulative_average of an empty sequence")
    out = np.empty_like(arr)
    running = 0.0
    # incremental form keeps constant sequences exact
    for n, value in enumerate(arr, start=1):
        running += (value - running) / n
        out[n - 1] = running
    return out
