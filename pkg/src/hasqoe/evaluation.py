"""Evaluation protocol and synthetic data generation.

Sessions are grouped by content and the content groups, never individual
sessions, are split 80/20 into train/test, so the same video content can
never appear on both sides. Each repetition reshuffles the groups with its
own generator (numpy PCG64 seeded with ``seed + repetition``, which is
reproducible across platforms), trains a fresh SVR on the train side and
correlates its test-side predictions with the subjective scores.

The synthetic generator produces drifting sinusoidal content whose noise
level is tied to the encoded quality rung, plus stall and switching events,
and assigns MOS through a fixed monotone function (see ``synthetic_mos``).
It exists so the full protocol can run at desk scale with a known ground
truth.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .correlation import krocc, plcc, srocc
from .errors import DatasetError
from .features import FEATURE_ORDER_TAG
from .frames import write_frame
from .pipeline import PipelineConfig, ScoringEngine
from .session import SessionManifest, load_manifest
from .svr import SvrHyperparams, predict_batch, train

__all__ = [
    "DatasetEntry",
    "RepetitionResult",
    "EvalReport",
    "load_dataset_index",
    "extract_dataset_features",
    "split_eval_features",
    "split_eval",
    "time_ratio",
    "synth_dataset",
    "synthetic_mos",
    "LADDER_HEIGHTS",
    "LADDER_BITRATES",
]

TEST_FRACTION = 0.2
MIN_CONTENT_GROUPS = 5

# Synthetic bitrate ladder: one rung per (height, bitrate) pair, 4:3 aspect.
LADDER_HEIGHTS = (48, 64, 96, 120, 144)
LADDER_WIDTHS = (64, 85, 128, 160, 192)
LADDER_BITRATES = (400.0, 900.0, 1800.0, 3200.0, 5600.0)

SYNTH_FPS = 10.0
SYNTH_SEGMENT_S = 2.0
SYNTH_SEGMENTS = 10


@dataclass(frozen=True)
class DatasetEntry:
    manifest_path: Path
    content_id: str
    mos: float


@dataclass(frozen=True)
class RepetitionResult:
    repetition: int
    srocc: float
    krocc: float
    plcc: float
    n_test: int


@dataclass
class EvalReport:
    seed: int
    repetitions: int
    per_repetition: list[RepetitionResult]
    aggregate: dict[str, dict[str, float]] = field(default_factory=dict)
    time_ratio: float | None = None

    def __post_init__(self) -> None:
        if not self.aggregate:
            self.aggregate = {
                name: {
                    "mean": float(np.mean([getattr(r, name) for r in self.per_repetition])),
                    "median": float(np.median([getattr(r, name) for r in self.per_repetition])),
                }
                for name in ("srocc", "krocc", "plcc")
            }

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "repetitions": self.repetitions,
            "aggregate": self.aggregate,
            "time_ratio": self.time_ratio,
            "per_repetition": [
                {
                    "repetition": r.repetition,
                    "srocc": r.srocc,
                    "krocc": r.krocc,
                    "plcc": r.plcc,
                    "n_test": r.n_test,
                }
                for r in self.per_repetition
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["repetition,srocc,krocc,plcc,n_test"]
        for r in self.per_repetition:
            lines.append(f"{r.repetition},{r.srocc!r},{r.krocc!r},{r.plcc!r},{r.n_test}")
        return "\n".join(lines) + "\n"


def load_dataset_index(path: str | os.PathLike) -> list[DatasetEntry]:
    """Parse a dataset index: ``{"sessions": [{manifest, content_id, mos}]}``.

    Relative manifest paths resolve against the index file's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DatasetError(f"dataset index not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot parse dataset index {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("sessions"), list):
        raise DatasetError(f"{path}: index must be an object with a 'sessions' list")
    entries = []
    for i, row in enumerate(doc["sessions"]):
        if not isinstance(row, dict):
            raise DatasetError(f"{path}: sessions[{i}] must be an object")
        try:
            manifest_ref = Path(str(row["manifest"]))
            if not manifest_ref.is_absolute():
                manifest_ref = path.parent / manifest_ref
            entries.append(
                DatasetEntry(
                    manifest_path=manifest_ref,
                    content_id=str(row["content_id"]),
                    mos=float(row["mos"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"{path}: sessions[{i}] is malformed: {exc}") from exc
    if not entries:
        raise DatasetError(f"{path}: dataset index lists no sessions")
    return entries


def extract_dataset_features(
    entries: Sequence[DatasetEntry], config: PipelineConfig
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Final-window feature vector per session (the training granularity:
    the datasets score whole sessions). Returns (X, mos, content_ids)."""
    engine = ScoringEngine(config)
    rows = []
    mos = []
    content_ids = []
    for entry in entries:
        manifest = load_manifest(entry.manifest_path)
        rows.append(engine.window_features(manifest).values)
        mos.append(entry.mos)
        content_ids.append(entry.content_id)
    return np.asarray(rows), np.asarray(mos), content_ids


# Small hyperparameter grid tried per repetition when no explicit
# hyperparams are given: C spans under- to strong-fitting, gamma scales the
# 1/(d*var) default down for high-dimensional inputs.
GRID_C = (1.0, 10.0, 50.0)
GRID_GAMMA_SCALE = (1.0, 0.5, 0.25, 0.125)
_INNER_SPLITS = 3


def _select_hyperparams(
    X_train: np.ndarray,
    y_train: np.ndarray,
    train_content_ids: Sequence[str],
    rng: np.random.Generator,
    tag: str,
) -> SvrHyperparams:
    """Pick (C, gamma) from the grid by inner content-disjoint splits.

    Scores are averaged over a few inner splits to stabilize the choice;
    selection sees training-side data only.
    """
    groups = sorted(set(train_content_ids))
    n_val = max(1, round(0.25 * len(groups)))
    if len(groups) - n_val < 2:
        return SvrHyperparams()
    ids = np.array(train_content_ids)

    # After z-scoring inside train(), live features have unit variance, so
    # the default gamma reduces to 1/(number of non-constant features).
    live = int((X_train.var(axis=0) > 0).sum())
    base_gamma = 1.0 / max(live, 1)
    grid = [
        SvrHyperparams(c=c, gamma=base_gamma * scale)
        for c in GRID_C
        for scale in GRID_GAMMA_SCALE
    ]
    scores = np.zeros(len(grid))
    counts = np.zeros(len(grid))

    for _ in range(_INNER_SPLITS):
        order = rng.permutation(len(groups))
        val_groups = {groups[k] for k in order[:n_val]}
        val_mask = np.isin(ids, sorted(val_groups))
        X_in, y_in = X_train[~val_mask], y_train[~val_mask]
        X_val, y_val = X_train[val_mask], y_train[val_mask]
        if y_val.size < 3 or float(y_val.max()) == float(y_val.min()):
            continue
        for k, hp in enumerate(grid):
            model = train(X_in, y_in, hp, feature_order_tag=tag)
            preds = predict_batch(model, X_val, expected_tag=tag)
            try:
                scores[k] += srocc(preds.tolist(), y_val.tolist())
                counts[k] += 1
            except ValueError:
                continue
    if not counts.max():
        return SvrHyperparams()
    mean_scores = np.where(counts > 0, scores / np.maximum(counts, 1), -np.inf)
    return grid[int(np.argmax(mean_scores))]


def split_eval_features(
    X: np.ndarray,
    mos: np.ndarray,
    content_ids: Sequence[str],
    repetitions: int,
    seed: int,
    hyperparams: SvrHyperparams | None = None,
    feature_indices: Sequence[int] | None = None,
) -> EvalReport:
    """Repeated content-disjoint 80/20 evaluation over precomputed features.

    ``feature_indices`` restricts the vector to a column subset (used by the
    ablation study); ``None`` keeps all columns. When ``hyperparams`` is
    None, each repetition picks (C, gamma) from a small grid using an inner
    content-disjoint validation split on the training side.
    """
    if repetitions < 1:
        raise ValueError(f"repetition count must be >= 1, got {repetitions}")
    X = np.asarray(X, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    if X.shape[0] != mos.shape[0] or X.shape[0] != len(content_ids):
        raise ValueError("X, mos and content_ids must align")
    if feature_indices is not None:
        X = X[:, list(feature_indices)]
        tag = f"{FEATURE_ORDER_TAG}/subset={','.join(map(str, feature_indices))}"
    else:
        tag = FEATURE_ORDER_TAG

    groups = sorted(set(content_ids))
    if len(groups) < MIN_CONTENT_GROUPS:
        raise DatasetError(
            f"need at least {MIN_CONTENT_GROUPS} distinct content groups, got {len(groups)}"
        )
    group_members = {g: np.array([i for i, c in enumerate(content_ids) if c == g]) for g in groups}
    n_test_groups = max(1, round(TEST_FRACTION * len(groups)))
    if n_test_groups >= len(groups):
        raise DatasetError("too few content groups to keep a non-empty training side")
    smallest_test = sum(sorted(len(m) for m in group_members.values())[:n_test_groups])
    if smallest_test < 3:
        raise DatasetError(
            "the 20% test side can end up with fewer than 3 sessions, leaving the "
            "correlations undefined; add content groups or sessions per content"
        )
    ids = np.array(content_ids)

    results = []
    for rep in range(repetitions):
        rng = np.random.default_rng(seed + rep)
        order = rng.permutation(len(groups))
        test_groups = {groups[k] for k in order[:n_test_groups]}
        train_idx = np.concatenate([group_members[g] for g in groups if g not in test_groups])
        test_idx = np.concatenate([group_members[g] for g in groups if g in test_groups])
        # Content disjointness is structural; keep the guard anyway.
        assert not set(ids[train_idx]) & set(ids[test_idx])

        hp = hyperparams
        if hp is None:
            hp = _select_hyperparams(
                X[train_idx], mos[train_idx], list(ids[train_idx]), rng, tag
            )
        model = train(X[train_idx], mos[train_idx], hp, feature_order_tag=tag)
        predictions = predict_batch(model, X[test_idx], expected_tag=tag)
        truth = mos[test_idx]
        results.append(
            RepetitionResult(
                repetition=rep,
                srocc=srocc(predictions.tolist(), truth.tolist()),
                krocc=krocc(predictions.tolist(), truth.tolist()),
                plcc=plcc(predictions.tolist(), truth.tolist()),
                n_test=int(test_idx.size),
            )
        )
    return EvalReport(seed=seed, repetitions=repetitions, per_repetition=results)


def split_eval(
    entries: Sequence[DatasetEntry],
    config: PipelineConfig,
    repetitions: int,
    seed: int,
    hyperparams: SvrHyperparams | None = None,
    feature_indices: Sequence[int] | None = None,
) -> EvalReport:
    """End-to-end protocol: extract features once, then repeat the split."""
    X, mos, content_ids = extract_dataset_features(entries, config)
    return split_eval_features(X, mos, content_ids, repetitions, seed, hyperparams, feature_indices)


def time_ratio(manifest: SessionManifest, config: PipelineConfig, model) -> float:
    """Compute-time/playback-time ratio over one session.

    Frame files are read and decoded outside the measured path (in
    deployment the player's buffer already holds decoded frames), so the
    ratio reflects feature extraction plus regression only.
    """
    engine = ScoringEngine(config)
    preloaded = {ref: manifest.load_frame(ref) for seg in manifest.segments
                 for ref in (seg.frame_refs[i] for i in engine.sample_indices(seg))}
    rows = engine.score_session(manifest, model, loader=preloaded.__getitem__)
    return rows[-1].cumulative_time_ratio


# --- synthetic dataset -----------------------------------------------------


def synthetic_mos(rungs: Sequence[int], stalls: Sequence[float], complexity: float) -> float:
    """Documented monotone ground-truth function of a synthetic session.

    Base quality comes from the mean rung of the last five segments;
    saturating penalties subtract for total stall time, for bitrate drops
    across the last four segment boundaries, and for scene complexity.
    """
    if len(rungs) != len(stalls):
        raise ValueError("rungs and stalls must align")
    last5 = rungs[-5:]
    base = 44.0 + 48.0 * (sum(last5) / len(last5)) / (len(LADDER_BITRATES) - 1)
    stall_penalty = 18.0 * (1.0 - math.exp(-sum(stalls) / 6.0))
    drop_sum = sum(
        max(0.0, LADDER_BITRATES[a] - LADDER_BITRATES[b])
        for a, b in zip(last5, last5[1:])
    )
    switch_penalty = 14.0 * (1.0 - math.exp(-drop_sum / 4000.0))
    complexity_penalty = 26.0 * complexity
    return float(np.clip(base - stall_penalty - switch_penalty - complexity_penalty, 0.0, 100.0))


@dataclass(frozen=True)
class _ContentParams:
    complexity: float
    amplitude: float
    freq_x: float
    freq_y: float
    phase: float
    drift: float


def _content_params(seed: int, content: int) -> _ContentParams:
    rng = np.random.default_rng((seed, 1, content))
    return _ContentParams(
        complexity=float(rng.uniform(0.05, 0.95)),
        amplitude=float(rng.uniform(25.0, 45.0)),
        freq_x=float(rng.uniform(0.5, 3.0)),
        freq_y=float(rng.uniform(0.5, 3.0)),
        phase=float(rng.uniform(0.0, 2.0 * math.pi)),
        drift=float(rng.uniform(0.05, 0.3)),
    )


def _session_events(seed: int, content: int, session: int) -> tuple[list[int], list[float]]:
    """Rung trajectory (random walk over the ladder) and per-segment stalls.

    Stalls cluster in the first half of the session, where startup-phase
    buffer underruns are most common."""
    rng = np.random.default_rng((seed, 2, content, session))
    top = len(LADDER_BITRATES) - 1
    rung = int(rng.integers(0, top + 1))
    rungs = [rung]
    for _ in range(SYNTH_SEGMENTS - 1):
        step = int(rng.choice([-2, -1, 0, 1], p=[0.1, 0.2, 0.45, 0.25]))
        rung = min(top, max(0, rung + step))
        rungs.append(rung)
    stalls = [float(rng.uniform(0.0, 2.5))]  # startup buffering
    for t in range(2, SYNTH_SEGMENTS + 1):
        p_stall = 0.45 if t <= SYNTH_SEGMENTS // 2 + 1 else 0.1
        stalls.append(float(rng.uniform(0.3, 2.5)) if rng.random() < p_stall else 0.0)
    return rungs, stalls


def _render_segment(
    seed: int, content: int, session: int, segment: int, rung: int, params: _ContentParams
) -> np.ndarray:
    """All frames of one segment as a (frames, h, w) uint8 array."""
    rng = np.random.default_rng((seed, 3, content, session, segment))
    height = LADDER_HEIGHTS[rung]
    width = LADDER_WIDTHS[rung]
    frames_per_segment = int(SYNTH_FPS * SYNTH_SEGMENT_S)
    ys = np.linspace(0.0, 1.0, height, endpoint=False)[:, None]
    xs = np.linspace(0.0, 1.0, width, endpoint=False)[None, :]
    # Noise level follows the rung only loosely (per-segment encoder jitter),
    # so observed content is an approximate quality proxy, not an exact one.
    noise_sigma = (1.5 + 3.5 * (1.0 - rung / (len(LADDER_BITRATES) - 1))) * float(
        rng.uniform(0.75, 1.3)
    )
    out = np.empty((frames_per_segment, height, width), dtype=np.uint8)
    for k in range(frames_per_segment):
        tau = (segment - 1) * frames_per_segment + k
        # Row-structured drifting gradient plus a 2-D detail pattern whose
        # amplitude carries the scene complexity.
        base = 128.0 + params.amplitude * np.sin(
            2.0 * math.pi * params.freq_y * ys + params.phase + params.drift * tau
        )
        detail = (
            25.0
            * params.complexity
            * np.sin(2.0 * math.pi * 6.0 * xs + params.freq_x + 0.7 * params.drift * tau)
            * np.cos(2.0 * math.pi * 6.0 * ys)
        )
        noise = rng.normal(0.0, noise_sigma, size=(height, width))
        out[k] = np.clip(np.rint(base + detail + noise), 0, 255).astype(np.uint8)
    return out


def synth_dataset(
    n_contents: int,
    sessions_per_content: int,
    seed: int,
    out_dir: str | os.PathLike,
) -> tuple[Path, list[DatasetEntry]]:
    """Generate a synthetic dataset on disk; returns (index path, entries).

    Identical arguments produce byte-identical frames, manifests and MOS.
    """
    if n_contents < MIN_CONTENT_GROUPS:
        raise ValueError(f"need at least {MIN_CONTENT_GROUPS} contents, got {n_contents}")
    if sessions_per_content < 1:
        raise ValueError("sessions_per_content must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames_per_segment = int(SYNTH_FPS * SYNTH_SEGMENT_S)

    index_rows = []
    entries = []
    for content in range(n_contents):
        params = _content_params(seed, content)
        for session in range(sessions_per_content):
            rungs, stalls = _session_events(seed, content, session)
            session_dir = out_dir / f"content{content:02d}" / f"session{session:02d}"
            frames_dir = session_dir / "frames"
            frames_dir.mkdir(parents=True, exist_ok=True)
            segments = []
            for t, rung in enumerate(rungs, start=1):
                pixels = _render_segment(seed, content, session, t, rung, params)
                refs = []
                for k in range(frames_per_segment):
                    ref = f"seg{t:03d}_frame{k:03d}.pgm"
                    write_frame(pixels[k].astype(np.float64), frames_dir / ref)
                    refs.append(ref)
                segments.append(
                    {
                        "index": t,
                        "bitrate_kbps": LADDER_BITRATES[rung],
                        "width": LADDER_WIDTHS[rung],
                        "height": LADDER_HEIGHTS[rung],
                        "fps": SYNTH_FPS,
                        "duration_s": SYNTH_SEGMENT_S,
                        "stall_s": stalls[t - 1],
                        "frames": refs,
                    }
                )
            mos = synthetic_mos(rungs, stalls, params.complexity)
            manifest_doc = {"frame_dir": "frames", "mos": mos, "segments": segments}
            manifest_path = session_dir / "manifest.json"
            manifest_path.write_text(json.dumps(manifest_doc, indent=1), encoding="utf-8")
            rel = manifest_path.relative_to(out_dir)
            index_rows.append(
                {"manifest": str(rel), "content_id": f"content{content:02d}", "mos": mos}
            )
            entries.append(
                DatasetEntry(
                    manifest_path=manifest_path, content_id=f"content{content:02d}", mos=mos
                )
            )
    index_path = out_dir / "index.json"
    index_path.write_text(json.dumps({"sessions": index_rows}, indent=1), encoding="utf-8")
    return index_path, entries


def synth_session(
    out_dir: str | os.PathLike,
    seed: int = 0,
    width: int = 640,
    height: int = 480,
    fps: float = 30.0,
    duration_s: float = 2.0,
    segments: int = 10,
    bitrate_kbps: float = 3000.0,
) -> Path:
    """Write a single flat-ladder synthetic session at an arbitrary
    resolution; used by timing and benchmark runs. Returns the manifest
    path."""
    out_dir = Path(out_dir)
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    params = _content_params(seed, 0)
    frames_per_segment = int(round(fps * duration_s))
    ys = np.linspace(0.0, 1.0, height, endpoint=False)[:, None]
    xs = np.linspace(0.0, 1.0, width, endpoint=False)[None, :]

    manifest_segments = []
    for t in range(1, segments + 1):
        rng = np.random.default_rng((seed, 4, t))
        refs = []
        for k in range(frames_per_segment):
            tau = (t - 1) * frames_per_segment + k
            base = 128.0 + params.amplitude * np.sin(
                2.0 * math.pi * params.freq_y * ys + params.phase + params.drift * tau
            )
            detail = (
                25.0
                * params.complexity
                * np.sin(2.0 * math.pi * 6.0 * xs + params.freq_x + 0.7 * params.drift * tau)
                * np.cos(2.0 * math.pi * 6.0 * ys)
            )
            noise = rng.normal(0.0, 4.0, size=(height, width))
            pixels = np.clip(np.rint(base + detail + noise), 0, 255)
            ref = f"seg{t:03d}_frame{k:03d}.pgm"
            write_frame(pixels, frames_dir / ref)
            refs.append(ref)
        manifest_segments.append(
            {
                "index": t,
                "bitrate_kbps": bitrate_kbps,
                "width": width,
                "height": height,
                "fps": fps,
                "duration_s": duration_s,
                "stall_s": 0.0,
                "frames": refs,
            }
        )
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(
        json.dumps({"frame_dir": "frames", "mos": None, "segments": manifest_segments}, indent=1),
        encoding="utf-8",
    )
    return manifest_path
