"""Flat parameter storage with named views, plus on-disk serialization.

Every model keeps its parameters in one contiguous float64 vector; named
tensors are reshaped views into it. Optimizers work on the flat vector and
the views see the update for free.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

FORMAT_VERSION = 1


class ParamStore:
    def __init__(self, layout: Iterable[Tuple[str, Sequence[int]]]):
        self.layout = [(name, tuple(int(s) for s in shape)) for name, shape in layout]
        size = sum(int(np.prod(shape)) for _, shape in self.layout)
        self.flat = np.zeros(size, dtype=np.float64)
        self.views: Dict[str, np.ndarray] = self._bind(self.flat)

    def _bind(self, flat: np.ndarray) -> Dict[str, np.ndarray]:
        views = {}
        offset = 0
        for name, shape in self.layout:
            n = int(np.prod(shape))
            views[name] = flat[offset:offset + n].reshape(shape)
            offset += n
        return views

    def __getitem__(self, name: str) -> np.ndarray:
        return self.views[name]

    def __len__(self) -> int:
        return self.flat.size

    def zeros_like(self) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        """A zero gradient buffer with the same named layout."""
        flat = np.zeros_like(self.flat)
        return flat, self._bind(flat)

    def set_flat(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.flat.shape:
            raise ValueError(f"expected {self.flat.shape} values, got {values.shape}")
        self.flat[...] = values

    def digest(self) -> str:
        return hashlib.sha256(self.flat.astype("<f8").tobytes()).hexdigest()

    def copy(self) -> "ParamStore":
        other = ParamStore(self.layout)
        other.flat[...] = self.flat
        return other


def save_params(store: ParamStore, path: str | Path, meta: dict | None = None) -> Tuple[Path, Path]:
    """Write ``<path>.bin`` (little-endian float64 stream) and ``<path>.json`` (shapes)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bin_path = path.with_suffix(".bin")
    json_path = path.with_suffix(".json")
    bin_path.write_bytes(store.flat.astype("<f8").tobytes())
    tensors = []
    offset = 0
    for name, shape in store.layout:
        n = int(np.prod(shape))
        tensors.append({"name": name, "shape": list(shape), "offset": offset, "count": n})
        offset += n
    sidecar = {
        "format": "evomsn-params",
        "version": FORMAT_VERSION,
        "dtype": "<f8",
        "total": int(store.flat.size),
        "tensors": tensors,
        "meta": meta or {},
    }
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return bin_path, json_path


def load_params(path: str | Path) -> Tuple[ParamStore, dict]:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    if sidecar.get("format") != "evomsn-params":
        raise ValueError(f"{path}: not an evomsn parameter sidecar")
    store = ParamStore((t["name"], t["shape"]) for t in sidecar["tensors"])
    raw = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
    if raw.size != sidecar["total"]:
        raise ValueError(f"{path}: expected {sidecar['total']} floats, found {raw.size}")
    store.set_flat(raw)
    return store, sidecar.get("meta", {})
