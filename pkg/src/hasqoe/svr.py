"""Epsilon-insensitive support vector regression with an RBF kernel.

Training solves the dual with plain two-variable sequential minimal
optimization (maximal-violating-pair selection, no shrinking), which is
simple and provably convergent at the few-hundred-sample scale this engine
trains at. Features are z-scored before the kernel; the fitted scaler is
part of the model. Models serialize to JSON and round-trip exactly.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ModelFormatError

__all__ = [
    "SvrHyperparams",
    "SvrModel",
    "SmoDiagnostics",
    "train",
    "train_with_diagnostics",
    "predict",
    "predict_batch",
    "save_model",
    "load_model",
]

logger = logging.getLogger(__name__)

MODEL_VERSION = 1


@dataclass(frozen=True)
class SvrHyperparams:
    """Training knobs. ``epsilon=None`` defaults to 0.1*std(y); ``gamma=None``
    defaults to 1/(d * mean feature variance after scaling), i.e. 1/d for
    non-degenerate z-scored features."""

    c: float = 1.0
    epsilon: float | None = None
    gamma: float | None = None
    tol: float = 1e-3
    max_iter: int = 200_000

    def __post_init__(self) -> None:
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"C must be finite and positive, got {self.c}")
        if self.epsilon is not None and not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if self.gamma is not None and not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be finite and positive, got {self.gamma}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class SvrModel:
    support_vectors: np.ndarray  # (m, d), already scaled
    dual_coefs: np.ndarray  # (m,), alpha - alpha*
    bias: float
    gamma: float
    c: float
    epsilon: float
    scaler_mean: np.ndarray  # (d,)
    scaler_std: np.ndarray  # (d,)
    feature_order_tag: str

    def __post_init__(self) -> None:
        sv = np.asarray(self.support_vectors, dtype=np.float64)
        coefs = np.asarray(self.dual_coefs, dtype=np.float64)
        mean = np.asarray(self.scaler_mean, dtype=np.float64)
        std = np.asarray(self.scaler_std, dtype=np.float64)
        if sv.ndim != 2 and sv.size > 0:
            raise ValueError(f"support vectors must be 2-D, got shape {sv.shape}")
        if sv.size == 0:
            sv = sv.reshape(0, mean.shape[0])
        if coefs.shape != (sv.shape[0],):
            raise ValueError("one dual coefficient per support vector required")
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValueError("scaler mean/std must be 1-D and the same length")
        if sv.shape[0] and sv.shape[1] != mean.shape[0]:
            raise ValueError("support vector width does not match the scaler")
        if np.any(std <= 0) or not np.all(np.isfinite(std)):
            raise ValueError("scaler stds must be positive and finite")
        if np.any(np.abs(coefs) > self.c * (1 + 1e-9)):
            raise ValueError("dual coefficients must satisfy |coef| <= C")
        for arr in (sv, coefs, mean, std):
            arr.flags.writeable = False
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coefs", coefs)
        object.__setattr__(self, "scaler_mean", mean)
        object.__setattr__(self, "scaler_std", std)

    @property
    def n_features(self) -> int:
        return self.scaler_mean.shape[0]


@dataclass
class SmoDiagnostics:
    """Per-run solver trace for verification: the dual objective after each
    update, iteration count, and whether the KKT gap closed below tol."""

    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    kkt_gap: float = math.inf


def train(
    X: Sequence[Sequence[float]] | np.ndarray,
    y: Sequence[float] | np.ndarray,
    hyperparams: SvrHyperparams | None = None,
    feature_order_tag: str = "",
) -> SvrModel:
    model, _ = train_with_diagnostics(X, y, hyperparams, feature_order_tag)
    return model


def train_with_diagnostics(
    X: Sequence[Sequence[float]] | np.ndarray,
    y: Sequence[float] | np.ndarray,
    hyperparams: SvrHyperparams | None = None,
    feature_order_tag: str = "",
) -> tuple[SvrModel, SmoDiagnostics]:
    hp = hyperparams or SvrHyperparams()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D (samples, features), got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValueError(f"got {X.shape[0]} samples but {y.shape} targets")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    degenerate = std == 0
    if np.any(degenerate):
        # Constant features carry no signal; force std to 1 so they scale to
        # zero and stay inert in the kernel.
        std = std.copy()
        std[degenerate] = 1.0
    Xs = (X - mean) / std

    epsilon = hp.epsilon if hp.epsilon is not None else 0.1 * float(y.std())
    if hp.gamma is not None:
        gamma = hp.gamma
    else:
        mean_var = float(Xs.var(axis=0).mean())
        gamma = 1.0 / (X.shape[1] * mean_var) if mean_var > 0 else 1.0 / X.shape[1]

    diagnostics = SmoDiagnostics()
    if float(y.max()) == float(y.min()):
        logger.warning("all training targets are identical; returning a constant-bias model")
        model = SvrModel(
            support_vectors=np.empty((0, X.shape[1])),
            dual_coefs=np.empty(0),
            bias=float(y[0]),
            gamma=gamma,
            c=hp.c,
            epsilon=epsilon,
            scaler_mean=mean,
            scaler_std=std,
            feature_order_tag=feature_order_tag,
        )
        diagnostics.converged = True
        diagnostics.kkt_gap = 0.0
        return model, diagnostics

    K = _rbf_kernel(Xs, Xs, gamma)
    beta, bias, diagnostics = _solve_smo(K, y, hp.c, epsilon, hp.tol, hp.max_iter, diagnostics)

    coef_cutoff = 1e-12 * hp.c
    support = np.abs(beta) > coef_cutoff
    model = SvrModel(
        support_vectors=Xs[support],
        dual_coefs=beta[support],
        bias=bias,
        gamma=gamma,
        c=hp.c,
        epsilon=epsilon,
        scaler_mean=mean,
        scaler_std=std,
        feature_order_tag=feature_order_tag,
    )
    return model, diagnostics


def _rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def _solve_smo(
    K: np.ndarray,
    y: np.ndarray,
    C: float,
    epsilon: float,
    tol: float,
    max_iter: int,
    diagnostics: SmoDiagnostics,
) -> tuple[np.ndarray, float, SmoDiagnostics]:
    """Maximal-violating-pair SMO on the 2n-variable epsilon-SVR dual.

    Variables 0..n-1 are the positive-side multipliers (sign +1), n..2n-1
    the starred ones (sign -1). Returns (per-sample dual coefficients,
    bias, diagnostics).
    """
    n = len(y)
    z = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])
    Q = np.outer(z, z) * np.tile(K, (2, 2))
    beta = np.zeros(2 * n)
    G = p.copy()

    bound_eps = 1e-12 * C
    m_val = math.inf
    M_val = -math.inf
    for iteration in range(max_iter):
        vals = -z * G
        up = ((z > 0) & (beta < C - bound_eps)) | ((z < 0) & (beta > bound_eps))
        low = ((z > 0) & (beta > bound_eps)) | ((z < 0) & (beta < C - bound_eps))
        up_vals = np.where(up, vals, -np.inf)
        low_vals = np.where(low, vals, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        m_val = up_vals[i]
        M_val = low_vals[j]
        gap = m_val - M_val
        diagnostics.iterations = iteration
        diagnostics.kkt_gap = gap
        if gap <= tol:
            diagnostics.converged = True
            break

        eta = Q[i, i] + Q[j, j] - 2.0 * z[i] * z[j] * Q[i, j]
        step = gap / eta if eta > 1e-15 else math.inf
        limit_i = (C - beta[i]) if z[i] > 0 else beta[i]
        limit_j = beta[j] if z[j] > 0 else (C - beta[j])
        step = min(step, limit_i, limit_j)

        beta[i] += z[i] * step
        beta[j] -= z[j] * step
        G += step * (z[i] * Q[:, i] - z[j] * Q[:, j])
        diagnostics.objective_trace.append(0.5 * float(beta @ (G + p)))
    else:
        logger.warning(
            "SMO hit the iteration cap (%d) with KKT gap %.3g > tol %.3g",
            max_iter, m_val - M_val, tol,
        )

    free = (beta > bound_eps) & (beta < C - bound_eps)
    if np.any(free):
        bias = float(np.mean((-z * G)[free]))
    else:
        bias = float((m_val + M_val) / 2.0)
    return beta[:n] - beta[n:], bias, diagnostics


def predict(model: SvrModel, x: Sequence[float] | np.ndarray, expected_tag: str | None = None) -> float:
    return float(predict_batch(model, np.asarray(x, dtype=np.float64)[None, :], expected_tag)[0])


def predict_batch(
    model: SvrModel, X: Sequence[Sequence[float]] | np.ndarray, expected_tag: str | None = None
) -> np.ndarray:
    """RBF kernel expansion over the support vectors plus the bias."""
    if expected_tag is not None and expected_tag != model.feature_order_tag:
        raise ModelFormatError(
            f"model was trained under feature layout {model.feature_order_tag!r}, "
            f"caller expects {expected_tag!r}"
        )
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected (_, {model.n_features}) inputs, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("prediction inputs must be finite")
    Xs = (X - model.scaler_mean) / model.scaler_std
    if model.support_vectors.shape[0] == 0:
        return np.full(X.shape[0], model.bias)
    kernel = _rbf_kernel(Xs, model.support_vectors, model.gamma)
    return kernel @ model.dual_coefs + model.bias


def save_model(model: SvrModel, path: str | os.PathLike) -> None:
    doc = {
        "version": MODEL_VERSION,
        "gamma": model.gamma,
        "C": model.c,
        "epsilon": model.epsilon,
        "bias": model.bias,
        "scaler_mean": model.scaler_mean.tolist(),
        "scaler_std": model.scaler_std.tolist(),
        "feature_order_tag": model.feature_order_tag,
        "support_vectors": [sv.tolist() for sv in model.support_vectors],
        "dual_coefs": model.dual_coefs.tolist(),
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path: str | os.PathLike) -> SvrModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ModelFormatError(f"model file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot parse model file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: model file must be a JSON object")
    version = doc.get("version")
    if version != MODEL_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported model file version {version!r}, this engine reads version "
            f"{MODEL_VERSION}"
        )
    required = (
        "gamma", "C", "epsilon", "bias", "scaler_mean", "scaler_std",
        "feature_order_tag", "support_vectors", "dual_coefs",
    )
    missing = [k for k in required if k not in doc]
    if missing:
        raise ModelFormatError(f"{path}: model file is missing fields {missing}")
    try:
        model = SvrModel(
            support_vectors=np.asarray(doc["support_vectors"], dtype=np.float64),
            dual_coefs=np.asarray(doc["dual_coefs"], dtype=np.float64),
            bias=float(doc["bias"]),
            gamma=float(doc["gamma"]),
            c=float(doc["C"]),
            epsilon=float(doc["epsilon"]),
            scaler_mean=np.asarray(doc["scaler_mean"], dtype=np.float64),
            scaler_std=np.asarray(doc["scaler_std"], dtype=np.float64),
            feature_order_tag=str(doc["feature_order_tag"]),
        )
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: invalid model contents: {exc}") from exc
    if not (math.isfinite(model.gamma) and model.gamma > 0):
        raise ModelFormatError(f"{path}: gamma must be finite and positive")
    return model
