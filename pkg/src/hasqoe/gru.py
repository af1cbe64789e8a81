"""Gated recurrent fusion of per-frame pooled statistics.

A four-cell GRU consumes one PooledStats vector per sampled frame (in
sampling order) and its final hidden state becomes the segment's four
spatiotemporal features. Parameters are loadable inputs; a deterministic
seeded default ships with the engine.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backbone import PooledStats
from .errors import ContainerError
from .tensorfile import read_tensors, write_tensors

__all__ = ["GruParams", "gru_fuse", "default_gru_params", "save_gru", "load_gru"]

HIDDEN_SIZE = 4
INPUT_SIZE = 4

# Gate order is fixed: update, reset, candidate. Each weight matrix acts on
# the concatenation [input, hidden].
_GATES = ("update", "reset", "candidate")


@dataclass(frozen=True)
class GruParams:
    w_update: np.ndarray
    b_update: np.ndarray
    w_reset: np.ndarray
    b_reset: np.ndarray
    w_candidate: np.ndarray
    b_candidate: np.ndarray

    def __post_init__(self) -> None:
        for gate in _GATES:
            w = np.asarray(getattr(self, f"w_{gate}"), dtype=np.float64)
            b = np.asarray(getattr(self, f"b_{gate}"), dtype=np.float64)
            if w.shape != (HIDDEN_SIZE, INPUT_SIZE + HIDDEN_SIZE):
                raise ValueError(
                    f"w_{gate} must have shape {(HIDDEN_SIZE, INPUT_SIZE + HIDDEN_SIZE)}, "
                    f"got {w.shape}"
                )
            if b.shape != (HIDDEN_SIZE,):
                raise ValueError(f"b_{gate} must have shape ({HIDDEN_SIZE},), got {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"{gate} gate parameters must be finite")
            w.flags.writeable = False
            b.flags.writeable = False
            object.__setattr__(self, f"w_{gate}", w)
            object.__setattr__(self, f"b_{gate}", b)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def gru_fuse(stats_sequence: Sequence[PooledStats], params: GruParams) -> np.ndarray:
    """Run the GRU over a segment's pooled statistics; returns the final
    4-dim hidden state. The recurrence starts from h=0 and is inherently
    sequential, so the sequence must be in sampling order."""
    if len(stats_sequence) == 0:
        raise ValueError("cannot fuse an empty statistics sequence")
    h = np.zeros(HIDDEN_SIZE)
    for stats in stats_sequence:
        x = stats.as_array()
        xh = np.concatenate([x, h])
        z = _sigmoid(params.w_update @ xh + params.b_update)
        r = _sigmoid(params.w_reset @ xh + params.b_reset)
        candidate = np.tanh(params.w_candidate @ np.concatenate([x, r * h]) + params.b_candidate)
        h = (1.0 - z) * candidate + z * h
    return h


def default_gru_params(seed: int = 0) -> GruParams:
    """Seeded uniform(-0.5, 0.5) parameters, reproducible across platforms."""
    rng = np.random.default_rng(seed)

    def mat() -> np.ndarray:
        return rng.uniform(-0.5, 0.5, size=(HIDDEN_SIZE, INPUT_SIZE + HIDDEN_SIZE))

    def vec() -> np.ndarray:
        return rng.uniform(-0.5, 0.5, size=HIDDEN_SIZE)

    return GruParams(
        w_update=mat(), b_update=vec(),
        w_reset=mat(), b_reset=vec(),
        w_candidate=mat(), b_candidate=vec(),
    )


def save_gru(params: GruParams, path: str | os.PathLike) -> None:
    tensors = {}
    for gate in _GATES:
        tensors[f"{gate}.weight"] = getattr(params, f"w_{gate}")
        tensors[f"{gate}.bias"] = getattr(params, f"b_{gate}")
    write_tensors(path, tensors, {"kind": "gru", "hidden_size": HIDDEN_SIZE})


def load_gru(path: str | os.PathLike) -> GruParams:
    tensors, meta = read_tensors(path)
    if meta.get("kind") != "gru":
        raise ContainerError(f"{path}: container is not a GRU parameter file")
    expected = {f"{gate}.{part}" for gate in _GATES for part in ("weight", "bias")}
    if set(tensors) != expected:
        raise ContainerError(
            f"{path}: tensor names {sorted(set(tensors) ^ expected)} do not match the GRU layout"
        )
    try:
        return GruParams(
            w_update=tensors["update.weight"], b_update=tensors["update.bias"],
            w_reset=tensors["reset.weight"], b_reset=tensors["reset.bias"],
            w_candidate=tensors["candidate.weight"], b_candidate=tensors["candidate.bias"],
        )
    except ValueError as exc:
        raise ContainerError(f"{path}: {exc}") from exc
