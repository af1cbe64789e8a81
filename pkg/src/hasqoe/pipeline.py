"""Real-time per-segment scoring pipeline.

Per segment: decode the sampled frames (off the clock), run the backbone
and texture extraction per frame, fuse pooled statistics through the GRU,
assemble the five-segment window vector, and regress it to a QoE score.
Compute time is tracked per segment; in realtime mode a segment whose
compute time exceeds its playback duration aborts the run.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from .backbone import (
    BackboneParams,
    backbone_forward,
    downscale_for_backbone,
    load_backbone,
    pooled_stats,
    tiny_backbone,
)
from .errors import DataError, DeadlineExceeded
from .features import (
    FEATURE_ORDER_TAG,
    FeatureVector,
    PenaltyConfig,
    SegmentFeatures,
    assemble,
    penalty_switch,
    reward_resolution,
)
from .frames import GrayFrame
from .gru import GruParams, default_gru_params, gru_fuse, load_gru
from .sampler import DEFAULT_WEIGHTS, SamplingWeights, plan
from .session import Segment, SessionManifest, WINDOW_SIZE, window_at
from .svr import SvrModel, predict
from .texture import texture, texture_segment

__all__ = [
    "PipelineConfig",
    "load_config",
    "config_digest",
    "ScoreRow",
    "SegmentExtraction",
    "ScoringEngine",
]

FrameLoader = Callable[[str], GrayFrame]


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the scoring pipeline needs besides the session itself."""

    fr_per_segment: int = 10
    weights: SamplingWeights = DEFAULT_WEIGHTS
    backbone: str = "tiny"  # "tiny" or a tensor-container path
    backbone_seed: int = 0
    gru: str = "seeded"  # "seeded" or a tensor-container path
    gru_seed: int = 0
    penalty_c1_s: float = 2.0
    penalty_c2_kbps: float | None = None  # None: use the session's max ladder bitrate
    max_backbone_dim: int = 512
    realtime: bool = False
    # Artificial per-segment delay charged as compute time; lets tests and
    # benchmarks exercise the realtime deadline without a slow machine.
    stage_delay_s: float = 0.0

    def __post_init__(self) -> None:
        if self.fr_per_segment < 2:
            raise ValueError(f"fr_per_segment must be >= 2, got {self.fr_per_segment}")
        if self.penalty_c1_s <= 0:
            raise ValueError("penalty_c1_s must be positive")
        if self.penalty_c2_kbps is not None and self.penalty_c2_kbps <= 0:
            raise ValueError("penalty_c2_kbps must be positive when set")
        if self.max_backbone_dim < 32:
            raise ValueError("max_backbone_dim must be at least 32")
        if self.stage_delay_s < 0:
            raise ValueError("stage_delay_s must be >= 0")


_CONFIG_KEYS = {
    "fr_per_segment",
    "weights",
    "weights_file",
    "backbone",
    "backbone_seed",
    "gru",
    "gru_seed",
    "penalty_c1_s",
    "penalty_c2_kbps",
    "max_backbone_dim",
    "realtime",
    "stage_delay_s",
}


def load_config(path: str | os.PathLike | None, **overrides) -> PipelineConfig:
    """Read a pipeline config from JSON; ``None`` gives the defaults.

    Relative file references inside the config resolve against the config
    file's directory; referenced files must exist at load time.
    """
    cfg = PipelineConfig()
    if path is not None:
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise DataError(f"config file not found: {path}") from None
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise DataError(f"{path}: config must be a JSON object")
        unknown = set(doc) - _CONFIG_KEYS
        if unknown:
            raise DataError(f"{path}: unknown config keys {sorted(unknown)}")
        if "weights" in doc and "weights_file" in doc:
            raise DataError(f"{path}: give either 'weights' or 'weights_file', not both")

        kwargs: dict = {}
        if "weights" in doc:
            w = doc["weights"]
            if not isinstance(w, dict) or set(w) != {"w_s", "w_e"}:
                raise DataError(f"{path}: 'weights' must be an object with w_s and w_e")
            kwargs["weights"] = SamplingWeights(float(w["w_s"]), float(w["w_e"]))
        if "weights_file" in doc:
            wpath = _resolve(path, doc["weights_file"])
            try:
                wdoc = json.loads(wpath.read_text(encoding="utf-8"))
                kwargs["weights"] = SamplingWeights(float(wdoc["w_s"]), float(wdoc["w_e"]))
            except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}: cannot load weights file {wpath}: {exc}") from exc
        for key in ("backbone", "gru"):
            if key in doc:
                value = str(doc[key])
                if value not in ("tiny", "seeded"):
                    resolved = _resolve(path, value)
                    if not resolved.exists():
                        raise DataError(f"{path}: {key} file does not exist: {resolved}")
                    value = str(resolved)
                kwargs[key] = value
        for key in ("fr_per_segment", "backbone_seed", "gru_seed", "max_backbone_dim"):
            if key in doc:
                kwargs[key] = int(doc[key])
        for key in ("penalty_c1_s", "stage_delay_s"):
            if key in doc:
                kwargs[key] = float(doc[key])
        if "penalty_c2_kbps" in doc:
            v = doc["penalty_c2_kbps"]
            kwargs["penalty_c2_kbps"] = None if v is None else float(v)
        if "realtime" in doc:
            kwargs["realtime"] = bool(doc["realtime"])
        try:
            cfg = PipelineConfig(**kwargs)
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from exc
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _resolve(config_path: Path, ref: str) -> Path:
    p = Path(ref)
    return p if p.is_absolute() else config_path.parent / p


def config_digest(config: PipelineConfig) -> str:
    """Short stable digest so runs can be matched to their configuration."""
    doc = {
        "fr_per_segment": config.fr_per_segment,
        "w_s": config.weights.w_s,
        "w_e": config.weights.w_e,
        "backbone": config.backbone,
        "backbone_seed": config.backbone_seed,
        "gru": config.gru,
        "gru_seed": config.gru_seed,
        "penalty_c1_s": config.penalty_c1_s,
        "penalty_c2_kbps": config.penalty_c2_kbps,
        "max_backbone_dim": config.max_backbone_dim,
        "realtime": config.realtime,
        "stage_delay_s": config.stage_delay_s,
    }
    blob = json.dumps(doc, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class ScoreRow:
    t: int
    qoe: float
    cumulative_time_ratio: float


@dataclass(frozen=True)
class SegmentExtraction:
    features: SegmentFeatures
    first_frame: GrayFrame
    last_frame: GrayFrame
    compute_s: float


class ScoringEngine:
    """Holds loaded parameter objects and scores sessions window by window.

    Parameter objects are immutable after load, so one engine can be shared
    across threads; per-session scoring state is local to each call.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        if config.backbone == "tiny":
            self.backbone: BackboneParams = tiny_backbone(config.backbone_seed)
        else:
            self.backbone = load_backbone(config.backbone)
        if config.gru == "seeded":
            self.gru: GruParams = default_gru_params(config.gru_seed)
        else:
            self.gru = load_gru(config.gru)

    def sample_indices(self, segment: Segment) -> tuple[int, ...]:
        """Sampled frame indices for one segment. The configured budget is
        clamped to the segment's frame count (the budget is ours to set);
        a single-frame segment just samples its only frame."""
        n = segment.frame_count
        if n == 1:
            return (0,)
        fr = min(self.config.fr_per_segment, n)
        return plan(n, fr, self.config.weights).indices

    def extract_segment(self, segment: Segment, frames: Sequence[GrayFrame]) -> SegmentExtraction:
        """Compute per-segment features from its sampled frames (in sampling
        order). The compute clock starts after decode."""
        if not frames:
            raise ValueError("extract_segment needs at least one sampled frame")
        start = time.perf_counter()
        if self.config.stage_delay_s:
            time.sleep(self.config.stage_delay_s)
        stats = []
        frame_textures = []
        for frame in frames:
            if frame.height != segment.height or frame.width != segment.width:
                raise DataError(
                    f"segment {segment.index}: frame is {frame.width}x{frame.height} but the "
                    f"manifest declares {segment.width}x{segment.height}"
                )
            small = downscale_for_backbone(frame, self.config.max_backbone_dim)
            stats.append(pooled_stats(backbone_forward(small, self.backbone)))
            frame_textures.append(texture(frame))
        fused = gru_fuse(stats, self.gru)
        features = SegmentFeatures(
            r1=reward_resolution(segment),
            spatiotemporal=tuple(float(v) for v in fused),
            r6=texture_segment(frame_textures),
        )
        return SegmentExtraction(
            features=features,
            first_frame=frames[0],
            last_frame=frames[-1],
            compute_s=time.perf_counter() - start,
        )

    def penalty_config(self, manifest: SessionManifest) -> PenaltyConfig:
        c2 = self.config.penalty_c2_kbps
        if c2 is None:
            c2 = max(s.bitrate_kbps for s in manifest.segments)
            if c2 <= 0:
                c2 = 1.0
        return PenaltyConfig(c1_s=self.config.penalty_c1_s, c2_kbps=c2)

    def _load_sampled(
        self, manifest: SessionManifest, segment: Segment, loader: FrameLoader | None
    ) -> list[GrayFrame]:
        load = loader or manifest.load_frame
        return [load(segment.frame_refs[i]) for i in self.sample_indices(segment)]

    def _window_vector(
        self,
        window,
        cache: dict[int, SegmentExtraction],
        session_stalls: Sequence[float],
        pcfg: PenaltyConfig,
    ) -> tuple[FeatureVector, float]:
        """Assemble the 36-vector for a window; returns (vector, compute_s)."""
        start = time.perf_counter()
        boundary_p3 = []
        for seg_a, seg_b in zip(window.segments, window.segments[1:]):
            if seg_a.index == seg_b.index:
                # Padded boundary: no switch, no stall, identical content.
                boundary_p3.append(1.0)
            else:
                boundary_p3.append(
                    penalty_switch(
                        seg_a,
                        seg_b,
                        seg_b.stall_s,
                        cache[seg_a.index].last_frame,
                        cache[seg_b.index].first_frame,
                        pcfg,
                    )
                )
        vector = assemble(
            window,
            [cache[s.index].features for s in window.segments],
            session_stalls,
            boundary_p3,
        )
        return vector, time.perf_counter() - start

    def window_features(
        self, manifest: SessionManifest, t: int | None = None, loader: FrameLoader | None = None
    ) -> FeatureVector:
        """Feature vector of the window ending at segment ``t`` (default:
        the session's final segment). Extracts only the segments that
        window needs."""
        if t is None:
            t = manifest.segment_count
        window = window_at(manifest, t)
        pcfg = self.penalty_config(manifest)
        cache: dict[int, SegmentExtraction] = {}
        for segment in window.segments:
            if segment.index not in cache:
                frames = self._load_sampled(manifest, segment, loader)
                cache[segment.index] = self.extract_segment(segment, frames)
        vector, _ = self._window_vector(window, cache, manifest.stalls[:t], pcfg)
        return vector

    def score_session(
        self,
        manifest: SessionManifest,
        model: SvrModel,
        loader: FrameLoader | None = None,
        on_row: Callable[[ScoreRow], None] | None = None,
    ) -> list[ScoreRow]:
        """Score every playback window of a session in segment order.

        Emits one row per segment: (t, qoe, cumulative compute/playback time
        ratio). Frame decode stays off the compute clock; each sampled frame
        is loaded exactly once. In realtime mode, a segment whose compute
        time exceeds its duration raises DeadlineExceeded.
        """
        pcfg = self.penalty_config(manifest)
        cache: dict[int, SegmentExtraction] = {}
        rows: list[ScoreRow] = []
        compute_total = 0.0
        playback_total = 0.0
        for t in range(1, manifest.segment_count + 1):
            segment = manifest.segments[t - 1]
            try:
                frames = self._load_sampled(manifest, segment, loader)
                extraction = self.extract_segment(segment, frames)
                cache[t] = extraction
                window = window_at(manifest, t)
                vector, assembly_s = self._window_vector(window, cache, manifest.stalls[:t], pcfg)
                predict_start = time.perf_counter()
                qoe = predict(model, vector.values, expected_tag=FEATURE_ORDER_TAG)
                predict_s = time.perf_counter() - predict_start
            except DataError as exc:
                raise type(exc)(f"segment {t}: {exc}") from exc

            segment_compute = extraction.compute_s + assembly_s + predict_s
            compute_total += segment_compute
            playback_total += segment.duration_s
            if self.config.realtime and segment_compute > segment.duration_s:
                raise DeadlineExceeded(
                    f"deadline exceeded at segment {t}: compute {segment_compute:.3f}s > "
                    f"playback {segment.duration_s:.3f}s"
                )
            row = ScoreRow(t=t, qoe=qoe, cumulative_time_ratio=compute_total / playback_total)
            rows.append(row)
            if on_row is not None:
                on_row(row)
            cache.pop(t - WINDOW_SIZE, None)
        return rows
