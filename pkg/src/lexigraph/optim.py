"""Adam optimisation over named parameter tensors, plus checkpoint files.

A checkpoint is a JSON manifest line listing (name, rows, cols) in sorted
name order, followed by the raw little-endian float64 payload of each
tensor in that same order. Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

Array = np.ndarray


class Adam:
    """Bias-corrected Adam. Updates the parameter arrays in place."""

    def __init__(
        self,
        params: dict[str, Array],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(v) for name, v in params.items()}
        self._v = {name: np.zeros_like(v) for name, v in params.items()}

    def step(self, grads: dict[str, Array]) -> None:
        """Apply one update. Parameters without a gradient see a zero gradient."""
        for name in grads:
            if name not in self.params:
                raise KeyError(f"gradient for unknown parameter {name!r}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(p)
            elif g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def save_params(path: str | Path, arrays: dict[str, Array]) -> None:
    names = sorted(arrays)
    manifest = {"tensors": [{"name": n, "rows": arrays[n].shape[0], "cols": arrays[n].shape[1]} for n in names]}
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest).encode("utf-8"))
        fh.write(b"\n")
        for n in names:
            a = arrays[n]
            if a.ndim != 2:
                raise ValueError(f"checkpoint tensors must be 2-D, {n!r} has shape {a.shape}")
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_params(path: str | Path) -> dict[str, Array]:
    with open(path, "rb") as fh:
        header = fh.readline()
        manifest = json.loads(header.decode("utf-8"))
        out: dict[str, Array] = {}
        for entry in manifest["tensors"]:
            rows, cols = int(entry["rows"]), int(entry["cols"])
            count = rows * cols
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ValueError(f"checkpoint truncated while reading {entry['name']!r}")
            out[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy()
        if fh.read(1):
            raise ValueError("trailing bytes after final checkpoint tensor")
    return out
