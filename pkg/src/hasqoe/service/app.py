"""FastAPI application exposing the engine's operations.

The app caches loaded models and scoring engines by path/config so a
long-running service pays the weight-loading cost once, not per request.
Data problems map to 422, runtime failures (missed deadlines) to 409.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import DataError, DeadlineExceeded, HasQoeError
from ..evaluation import load_dataset_index, extract_dataset_features, split_eval_features, synth_dataset
from ..features import FEATURE_ORDER_TAG
from ..pipeline import ScoringEngine, config_digest, load_config
from ..sampler import calibrate_weights
from ..session import load_manifest
from ..svr import SvrHyperparams, load_model, predict, save_model, train
from . import schemas


class _Cache:
    """Path-keyed caches for models and engines; invalidated on mtime."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._models: dict[str, tuple[float, object]] = {}
        self._engines: dict[str, ScoringEngine] = {}

    def model(self, path: str):
        key = str(Path(path).resolve())
        mtime = Path(key).stat().st_mtime
        with self._lock:
            hit = self._models.get(key)
            if hit and hit[0] == mtime:
                return hit[1]
        loaded = load_model(key)
        with self._lock:
            self._models[key] = (mtime, loaded)
        return loaded

    def engine(self, config_path: str | None) -> ScoringEngine:
        config = load_config(config_path)
        key = config_digest(config)
        with self._lock:
            if key not in self._engines:
                self._engines[key] = ScoringEngine(config)
            return self._engines[key]


def create_app() -> FastAPI:
    app = FastAPI(title="has-qoe", version=__version__)
    cache = _Cache()

    def _data_error(exc: Exception) -> HTTPException:
        return HTTPException(status_code=422, detail=str(exc))

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/assess", response_model=schemas.AssessResponse)
    def assess(req: schemas.AssessRequest) -> schemas.AssessResponse:
        try:
            engine = cache.engine(req.config)
            if req.realtime and not engine.config.realtime:
                from dataclasses import replace

                engine = ScoringEngine(replace(engine.config, realtime=True))
            manifest = load_manifest(req.manifest)
            model = cache.model(req.model)
            rows = engine.score_session(manifest, model)
        except DeadlineExceeded as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except (DataError, ValueError) as exc:
            raise _data_error(exc) from exc
        return schemas.AssessResponse(
            rows=[
                schemas.ScoreRowModel(
                    t=r.t, qoe=r.qoe, cumulative_time_ratio=r.cumulative_time_ratio
                )
                for r in rows
            ],
            config_digest=config_digest(engine.config),
        )

    @app.post("/score", response_model=schemas.ScoreWindowResponse)
    def score(req: schemas.ScoreWindowRequest) -> schemas.ScoreWindowResponse:
        try:
            model = cache.model(req.model)
            qoe = predict(model, req.features)
        except (DataError, ValueError, OSError) as exc:
            raise _data_error(exc) from exc
        return schemas.ScoreWindowResponse(qoe=qoe)

    @app.post("/train", response_model=schemas.TrainResponse)
    def train_endpoint(req: schemas.TrainRequest) -> schemas.TrainResponse:
        try:
            config = load_config(req.config)
            entries = load_dataset_index(req.dataset)
            X, mos, _ = extract_dataset_features(entries, config)
            hp = SvrHyperparams(
                c=req.c if req.c is not None else 1.0,
                epsilon=req.epsilon,
                gamma=req.gamma,
            )
            model = train(X, mos, hp, feature_order_tag=FEATURE_ORDER_TAG)
            save_model(model, req.out)
        except (DataError, ValueError) as exc:
            raise _data_error(exc) from exc
        return schemas.TrainResponse(
            model=req.out,
            n_sessions=len(entries),
            n_support_vectors=int(model.support_vectors.shape[0]),
            config_digest=config_digest(config),
        )

    @app.post("/eval", response_model=schemas.EvalResponse)
    def eval_endpoint(req: schemas.EvalRequest) -> schemas.EvalResponse:
        try:
            config = load_config(req.config)
            entries = load_dataset_index(req.dataset)
            X, mos, content_ids = extract_dataset_features(entries, config)
            report = split_eval_features(X, mos, content_ids, req.repetitions, req.seed)
            report_path = None
            if req.out:
                Path(req.out).write_text(report.to_json(), encoding="utf-8")
                report_path = req.out
        except (DataError, ValueError) as exc:
            raise _data_error(exc) from exc
        return schemas.EvalResponse(
            seed=report.seed,
            repetitions=report.repetitions,
            aggregate=report.aggregate,
            report_path=report_path,
            config_digest=config_digest(config),
        )

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
        try:
            index_path, entries = synth_dataset(
                req.contents, req.sessions_per_content, req.seed, req.out
            )
        except (HasQoeError, ValueError, OSError) as exc:
            raise _data_error(exc) from exc
        return schemas.SimulateResponse(index=str(index_path), n_sessions=len(entries))

    @app.post("/calibrate-weights", response_model=schemas.CalibrateResponse)
    def calibrate(req: schemas.CalibrateRequest) -> schemas.CalibrateResponse:
        try:
            weights = calibrate_weights(
                [(r[0], r[1]) for r in req.rows], [r[2] for r in req.rows]
            )
        except ValueError as exc:
            raise _data_error(exc) from exc
        return schemas.CalibrateResponse(w_s=weights.w_s, w_e=weights.w_e)

    return app
