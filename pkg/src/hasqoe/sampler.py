"""Non-uniform frame sampling.

A segment is split in two halves and a frame budget ``fr`` is divided
between them by maximizing ``w_s*log(fr_s) + w_e*log(fr_e)`` over integer
allocations, which makes the split proportional to the half weights. The
weights themselves can be calibrated from per-half quality scores against
subjective scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .correlation import srocc

__all__ = ["SamplingWeights", "SamplingPlan", "allocate", "plan", "calibrate_weights"]

WEIGHT_FLOOR = 0.01


@dataclass(frozen=True)
class SamplingWeights:
    """Relative importance of a segment's start and end halves."""

    w_s: float
    w_e: float

    def __post_init__(self) -> None:
        for name, w in (("w_s", self.w_s), ("w_e", self.w_e)):
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {w}")
        if self.w_s + self.w_e <= 0:
            raise ValueError("at least one sampling weight must be positive")


# Placeholder default: end-half gets double weight, reflecting the rising
# attention over a segment. Override via config or calibrate_weights.
DEFAULT_WEIGHTS = SamplingWeights(1.0, 2.0)


@dataclass(frozen=True)
class SamplingPlan:
    """Concrete frame indices to sample from one segment."""

    fr: int
    fr_s: int
    fr_e: int
    indices_s: tuple[int, ...]
    indices_e: tuple[int, ...]

    @property
    def indices(self) -> tuple[int, ...]:
        """All sampled indices in playback order."""
        return self.indices_s + self.indices_e


def allocate(fr: int, weights: SamplingWeights) -> tuple[int, int]:
    """Split a frame budget between segment halves.

    Returns the integer pair (fr_s, fr_e), both >= 1 and summing to ``fr``,
    maximizing ``w_s*log(fr_s) + w_e*log(fr_e)``. The argmax is exhaustive
    over the fr-1 candidates rather than a rounded closed form, so it is
    exact. Ties break toward larger fr_e.
    """
    if fr < 2:
        raise ValueError(f"frame budget must be >= 2, got {fr}")
    best_s = 1
    best_obj = -math.inf
    for fr_s in range(1, fr):
        obj = weights.w_s * math.log(fr_s) + weights.w_e * math.log(fr - fr_s)
        # Strict improvement keeps the smallest fr_s, i.e. the largest fr_e.
        if obj > best_obj:
            best_obj = obj
            best_s = fr_s
    return best_s, fr - best_s


def plan(segment_frame_count: int, fr: int, weights: SamplingWeights) -> SamplingPlan:
    """Build the sampling plan for one segment.

    The segment splits at mid = floor(n/2); each half contributes evenly
    spaced indices ``half_start + floor((k+0.5)*half_len/fr_half)``. A
    budget exceeding the frame count is an explicit error so callers stay
    in control of their budgets.
    """
    n = segment_frame_count
    if n < 2:
        raise ValueError(f"segment must have at least 2 frames, got {n}")
    if fr > n:
        raise ValueError(f"frame budget {fr} exceeds segment frame count {n}")
    fr_s, fr_e = allocate(fr, weights)
    mid = n // 2
    # Rebalance if the weighted split overflows a half's capacity; at most
    # one side can overflow because fr <= n.
    if fr_s > mid:
        fr_e += fr_s - mid
        fr_s = mid
    elif fr_e > n - mid:
        fr_s += fr_e - (n - mid)
        fr_e = n - mid
    return SamplingPlan(
        fr=fr,
        fr_s=fr_s,
        fr_e=fr_e,
        indices_s=_even_indices(0, mid, fr_s),
        indices_e=_even_indices(mid, n - mid, fr_e),
    )


def _even_indices(start: int, length: int, count: int) -> tuple[int, ...]:
    # floor((k + 0.5) * length / count) in exact integer arithmetic
    return tuple(start + (2 * k + 1) * length // (2 * count) for k in range(count))


def calibrate_weights(
    half_scores: Sequence[tuple[float, float]], mos: Sequence[float]
) -> SamplingWeights:
    """Derive half weights from per-session start/end-half quality scores.

    Each weight is the Spearman correlation of that half's scores against
    the subjective scores, clamped below at 0.01 so both halves keep a
    positive weight in the log objective. The quality scores can come from
    any external frame-quality tool.
    """
    if len(half_scores) != len(mos):
        raise ValueError(f"length mismatch: {len(half_scores)} score pairs vs {len(mos)} MOS")
    if len(half_scores) < 3:
        raise ValueError(f"need at least 3 sessions to calibrate, got {len(half_scores)}")
    q_start = [float(q[0]) for q in half_scores]
    q_end = [float(q[1]) for q in half_scores]
    return SamplingWeights(
        w_s=max(srocc(q_start, mos), WEIGHT_FLOOR),
        w_e=max(srocc(q_end, mos), WEIGHT_FLOOR),
    )
