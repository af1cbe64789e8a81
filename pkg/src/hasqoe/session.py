"""Streaming-session data model and manifest ingestion.

A session is a list of media segments; each segment carries QoS metadata
(bitrate, resolution, duration, buffering charged to it) plus references to
its decodable frames. Frames are stored pre-decoded as binary PGM files;
demuxing and codec decoding happen outside this engine.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError
from .frames import GrayFrame, load_frame

__all__ = ["Segment", "SessionWindow", "SessionManifest", "load_manifest", "window_at"]

logger = logging.getLogger(__name__)

WINDOW_SIZE = 5


@dataclass(frozen=True)
class Segment:
    """One HAS media segment. ``stall_s`` is the buffering charged to this
    segment; for the first segment that is the startup buffering."""

    index: int
    bitrate_kbps: float
    width: int
    height: int
    fps: float
    duration_s: float
    stall_s: float
    frame_refs: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ManifestError(f"segment index must be >= 1, got {self.index}")
        ctx = f"segment {self.index}"
        if not (math.isfinite(self.bitrate_kbps) and self.bitrate_kbps >= 0):
            raise ManifestError(f"{ctx}: bitrate_kbps must be finite and >= 0")
        if self.width <= 0 or self.height <= 0:
            raise ManifestError(f"{ctx}: width and height must be positive")
        if not (math.isfinite(self.fps) and self.fps > 0):
            raise ManifestError(f"{ctx}: fps must be finite and > 0")
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ManifestError(f"{ctx}: duration_s must be finite and > 0")
        if not (math.isfinite(self.stall_s) and self.stall_s >= 0):
            raise ManifestError(f"{ctx}: stall_s must be finite and >= 0")
        if not self.frame_refs:
            raise ManifestError(f"{ctx}: frame_refs must be non-empty")
        object.__setattr__(self, "frame_refs", tuple(self.frame_refs))

    @property
    def frame_count(self) -> int:
        return len(self.frame_refs)


@dataclass(frozen=True)
class SessionWindow:
    """The most recent five segments plus the session's startup buffering."""

    segments: tuple[Segment, ...]
    session_initial_stall_s: float

    def __post_init__(self) -> None:
        if len(self.segments) != WINDOW_SIZE:
            raise ValueError(f"window must hold exactly {WINDOW_SIZE} segments")
        indices = [s.index for s in self.segments]
        if any(a > b for a, b in zip(indices, indices[1:])):
            raise ValueError(f"window segment indices must be non-decreasing, got {indices}")
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def newest(self) -> Segment:
        return self.segments[-1]


@dataclass(frozen=True)
class SessionManifest:
    """Validated session description: segments, frame root, optional MOS."""

    segments: tuple[Segment, ...]
    frame_dir: Path
    mos: float | None = None

    def __post_init__(self) -> None:
        if not self.segments:
            raise ManifestError("manifest has no segments")
        for position, segment in enumerate(self.segments, start=1):
            if segment.index != position:
                raise ManifestError(
                    f"non-contiguous segment index: expected {position}, got {segment.index}"
                )
        if self.mos is not None:
            if not math.isfinite(self.mos):
                raise ManifestError("mos must be finite")
            if not 0.0 <= self.mos <= 100.0:
                raise ManifestError(f"mos must lie in [0, 100], got {self.mos}")
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "frame_dir", Path(self.frame_dir))

    @property
    def segment_count(self) -> int:
        return len(self.segments)

    @property
    def stalls(self) -> tuple[float, ...]:
        """Per-segment buffering durations, ordered by segment index."""
        return tuple(s.stall_s for s in self.segments)

    def frame_path(self, ref: str) -> Path:
        return self.frame_dir / ref

    def load_frame(self, ref: str) -> GrayFrame:
        return load_frame(self.frame_path(ref))


def load_manifest(path: str | os.PathLike) -> SessionManifest:
    """Load and validate a session manifest (UTF-8 JSON, see README).

    Relative ``frame_dir`` is resolved against the manifest's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(
            f"{path}: JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc

    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: manifest root must be a JSON object")
    frame_dir = _require(doc, "frame_dir", str, path)
    mos = doc.get("mos")
    if mos is not None and not isinstance(mos, (int, float)):
        raise ManifestError(f"{path}: field 'mos' must be a number or null")
    raw_segments = _require(doc, "segments", list, path)

    segments = []
    for i, entry in enumerate(raw_segments):
        if not isinstance(entry, dict):
            raise ManifestError(f"{path}: segments[{i}] must be a JSON object")
        try:
            segment = Segment(
                index=_require(entry, "index", int, path, f"segments[{i}]"),
                bitrate_kbps=float(_require(entry, "bitrate_kbps", (int, float), path, f"segments[{i}]")),
                width=_require(entry, "width", int, path, f"segments[{i}]"),
                height=_require(entry, "height", int, path, f"segments[{i}]"),
                fps=float(_require(entry, "fps", (int, float), path, f"segments[{i}]")),
                duration_s=float(_require(entry, "duration_s", (int, float), path, f"segments[{i}]")),
                stall_s=float(_require(entry, "stall_s", (int, float), path, f"segments[{i}]")),
                frame_refs=tuple(_require(entry, "frames", list, path, f"segments[{i}]")),
            )
        except ManifestError as exc:
            raise ManifestError(f"{path}: {exc}") from None
        nominal = segment.fps * segment.duration_s
        if abs(segment.frame_count - nominal) > max(1.0, 0.1 * nominal):
            logger.warning(
                "%s: segment %d has %d frames but fps*duration suggests %.1f",
                path, segment.index, segment.frame_count, nominal,
            )
        segments.append(segment)

    resolved_dir = Path(frame_dir)
    if not resolved_dir.is_absolute():
        resolved_dir = path.parent / resolved_dir
    try:
        return SessionManifest(segments=tuple(segments), frame_dir=resolved_dir,
                               mos=None if mos is None else float(mos))
    except ManifestError as exc:
        raise ManifestError(f"{path}: {exc}") from None


def _require(obj: dict, key: str, types, path: Path, ctx: str = "manifest"):
    if key not in obj:
        raise ManifestError(f"{path}: {ctx} is missing required field '{key}'")
    value = obj[key]
    if types is int:
        # bool is an int subclass; reject it explicitly.
        if isinstance(value, bool) or not isinstance(value, int):
            raise ManifestError(f"{path}: {ctx} field '{key}' must be an integer")
        return value
    if not isinstance(value, types):
        expected = types.__name__ if isinstance(types, type) else "number"
        raise ManifestError(f"{path}: {ctx} field '{key}' must be {expected}")
    return value


def window_at(manifest: SessionManifest, t: int) -> SessionWindow:
    """Window of segments max(1, t-4)..t, left-padded by repeating segment 1.

    Padding lets scoring start at t=1; a repeated segment introduces no
    fictitious switching or stall events because padded boundaries join a
    segment to itself.
    """
    total = manifest.segment_count
    if not 1 <= t <= total:
        raise ValueError(f"segment ordinal t={t} out of range [1, {total}]")
    first = max(1, t - (WINDOW_SIZE - 1))
    window = [manifest.segments[i - 1] for i in range(first, t + 1)]
    while len(window) < WINDOW_SIZE:
        window.insert(0, manifest.segments[0])
    return SessionWindow(
        segments=tuple(window),
        session_initial_stall_s=manifest.segments[0].stall_s,
    )
