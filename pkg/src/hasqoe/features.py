"""QoS reward/penalty terms and the fixed 36-feature window layout.

The per-window vector packs, in order: resolution reward per segment
(f1-f5), spatiotemporal rewards per segment in segment-major order
(f6-f25), texture per segment (f26-f30), initial and average rebuffering
(f31-f32), and the four boundary switching penalties (f33-f36). The layout
is bound to trained models through ``FEATURE_ORDER_TAG`` so training and
prediction can never disagree about feature order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .frames import GrayFrame
from .session import Segment, SessionWindow, WINDOW_SIZE
from .ssim import fast_ssim

__all__ = [
    "PenaltyConfig",
    "SegmentFeatures",
    "FeatureVector",
    "FEATURE_COUNT",
    "FEATURE_NAMES",
    "FEATURE_ORDER_TAG",
    "FEATURE_GROUPS",
    "reward_resolution",
    "penalty_buffering",
    "switch_penalty_value",
    "penalty_switch",
    "assemble",
    "csv_header",
    "csv_row",
]

FEATURE_COUNT = 36
FEATURE_NAMES = tuple(f"f{i}" for i in range(1, FEATURE_COUNT + 1))
FEATURE_ORDER_TAG = "window5.segment-major.v1"

# Index ranges of the four feature groups (ablation units).
FEATURE_GROUPS = {
    "reward_qos": tuple(range(0, 5)),
    "reward_content": tuple(range(5, 30)),
    "penalty_qos": tuple(range(30, 32)),
    "penalty_content": tuple(range(32, 36)),
}


@dataclass(frozen=True)
class PenaltyConfig:
    """Normalization constants for the switching penalty: c1_s scales the
    boundary stall, c2_kbps scales the bitrate drop."""

    c1_s: float = 2.0
    c2_kbps: float = 6000.0

    def __post_init__(self) -> None:
        for name, v in (("c1_s", self.c1_s), ("c2_kbps", self.c2_kbps)):
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")


@dataclass(frozen=True)
class SegmentFeatures:
    """Per-segment feature bundle: resolution reward r1, the four fused
    spatiotemporal rewards, and the texture reward."""

    r1: float
    spatiotemporal: tuple[float, float, float, float]
    r6: float


@dataclass(frozen=True)
class FeatureVector:
    """The 36 window features in fixed order."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != (FEATURE_COUNT,):
            raise ValueError(f"feature vector must have {FEATURE_COUNT} entries, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature vector contains non-finite values")
        if arr[30] < 0 or arr[31] < 0:
            raise ValueError("rebuffering features f31/f32 must be >= 0")
        if np.any(arr[32:36] < 1.0):
            raise ValueError("switching penalties f33-f36 must be >= 1")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __getitem__(self, i: int) -> float:
        return float(self.values[i])


def reward_resolution(segment: Segment) -> float:
    """Resolution reward: the segment's video height in pixels."""
    return float(segment.height)


def penalty_buffering(stalls: Sequence[float]) -> tuple[float, float]:
    """Initial buffering p1 = D_1 and average rebuffering
    p2 = mean(D_2..D_T); p2 is 0 for a single-segment session."""
    if len(stalls) == 0:
        raise ValueError("stall list must be non-empty")
    if any(d < 0 for d in stalls):
        raise ValueError("stall durations must be >= 0")
    p1 = float(stalls[0])
    rest = stalls[1:]
    p2 = float(sum(rest)) / len(rest) if rest else 0.0
    return p1, p2


def switch_penalty_value(stall_s: float, swh_kbps: float, ssim: float, cfg: PenaltyConfig) -> float:
    """(1 + stall/C1) * (1 + swh/C2) / ssim."""
    if stall_s < 0:
        raise ValueError("boundary stall must be >= 0")
    if swh_kbps < 0:
        raise ValueError("rectified bitrate drop must be >= 0")
    if not 0.0 < ssim <= 1.0:
        raise ValueError(f"ssim divisor must lie in (0, 1], got {ssim}")
    return (1.0 + stall_s / cfg.c1_s) * (1.0 + swh_kbps / cfg.c2_kbps) / ssim


def penalty_switch(
    seg_t: Segment,
    seg_next: Segment,
    stall_at_boundary: float,
    last_frame: GrayFrame,
    first_frame: GrayFrame,
    cfg: PenaltyConfig,
) -> float:
    """Content-aware switching penalty for the seg_t -> seg_next boundary.

    ``last_frame``/``first_frame`` are the last sampled frame of seg_t and
    the first sampled frame of seg_next. Only bitrate drops are penalized
    (rectified differential); the structural similarity of the boundary
    frames scales the penalty up when content visibly changes.
    """
    swh = max(0.0, seg_t.bitrate_kbps - seg_next.bitrate_kbps)
    return switch_penalty_value(stall_at_boundary, swh, fast_ssim(last_frame, first_frame), cfg)


def assemble(
    window: SessionWindow,
    per_segment: Sequence[SegmentFeatures],
    session_stalls: Sequence[float],
    boundary_p3: Sequence[float],
) -> FeatureVector:
    """Pack window features into the fixed 36-slot layout.

    ``session_stalls`` must cover every segment played so far (D_1..D_t),
    not just the five in the window. ``boundary_p3`` holds the four
    transition penalties oldest-first; padded boundaries carry the neutral
    value 1.0.
    """
    if len(per_segment) != WINDOW_SIZE:
        raise ValueError(f"need features for exactly {WINDOW_SIZE} segments, got {len(per_segment)}")
    if len(boundary_p3) != WINDOW_SIZE - 1:
        raise ValueError(f"need {WINDOW_SIZE - 1} boundary penalties, got {len(boundary_p3)}")
    p1, p2 = penalty_buffering(session_stalls)

    values = np.empty(FEATURE_COUNT, dtype=np.float64)
    values[0:5] = [sf.r1 for sf in per_segment]
    for i, sf in enumerate(per_segment):
        values[5 + 4 * i : 5 + 4 * (i + 1)] = sf.spatiotemporal
    values[25:30] = [sf.r6 for sf in per_segment]
    values[30] = p1
    values[31] = p2
    values[32:36] = list(boundary_p3)
    return FeatureVector(values)


def csv_header() -> str:
    return ",".join(FEATURE_NAMES)


def csv_row(vector: FeatureVector) -> str:
    return ",".join(repr(v) for v in vector.values.tolist())
