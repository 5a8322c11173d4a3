"""Whole-architecture latency: exact additive model and a learned regressor.

The additive model sums the per-layer table entries of an architecture's
chosen operators.  The learned model is Bayesian ridge regression over
per-layer one-hot features (one block per layer, concatenated, plus a
trailing bias term), fitted by evidence maximization:

    m      = beta * S * X^T y        with  S = (lambda*I + beta*X^T X)^-1
    gamma  = sum_i  e_i / (e_i + lambda)     for eigenvalues e_i of beta*X^T X
    lambda <- gamma / ||m||^2
    beta   <- (N - gamma) / ||y - X m||^2

iterated until |d log lambda| + |d log beta| < tol or max_iters.  The prior
is a single isotropic precision; with one-hot features the additive ground
truth is exactly realizable, which is what makes near-zero test error
attainable on table-backed targets.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .backbone import Architecture, SearchSpace, validate_architecture
from .errors import (
    EmptyDatasetError,
    LayoutMismatchError,
    SingularSystemError,
)
from .profiles import LatencyTable

_BETA_CAP = 1e12  # keeps noise precision finite on exactly realizable targets
_TINY = 1e-12


def additive_latency(arch: Architecture, space: SearchSpace,
                     table: LatencyTable) -> float:
    validate_architecture(space, arch)
    total = 0.0
    for i, choice in enumerate(arch.choices):
        total += table.latency(i + 1, space.candidates[i][choice].id)
    return total


def make_additive_fn(table: LatencyTable):
    """Latency callable over (space, arch); works on restricted spaces too."""
    def fn(space: SearchSpace, arch: Architecture) -> float:
        return additive_latency(arch, space, table)
    return fn


def feature_dim(space: SearchSpace) -> int:
    return sum(len(c) for c in space.candidates) + 1


def layout_hash(space: SearchSpace) -> str:
    layout = [[op.id for op in cands] for cands in space.candidates]
    payload = json.dumps(layout, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def encode_features(space: SearchSpace, arch: Architecture) -> np.ndarray:
    validate_architecture(space, arch)
    x = np.zeros(feature_dim(space))
    offset = 0
    for i, choice in enumerate(arch.choices):
        x[offset + choice] = 1.0
        offset += len(space.candidates[i])
    x[-1] = 1.0
    return x


@dataclass
class PredictorModel:
    weight_mean: np.ndarray
    weight_precision: float        # lambda
    noise_precision: float         # beta
    posterior_covariance: np.ndarray
    layout: str                    # layout_hash of the fitted space
    training_stats: dict = field(default_factory=dict)


def _solve_spd(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cholesky solve returning (solution, inverse); jitters once on failure."""
    for attempt in range(2):
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            if attempt == 1:
                raise SingularSystemError(
                    "normal equations singular even after jitter") from None
            A = A + np.eye(A.shape[0]) * (1e-10 * np.trace(A) / A.shape[0])
            continue
        identity = np.eye(A.shape[0])
        L_inv = np.linalg.solve(L, identity)
        A_inv = L_inv.T @ L_inv
        return A_inv @ b, A_inv
    raise SingularSystemError("unreachable")


def fit_brr(features: np.ndarray, targets: np.ndarray,
            max_iters: int = 300, tol: float = 1e-9) -> PredictorModel:
    """Evidence-maximization fit; layout is attached by fit_predictor."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if np.isnan(X).any() or np.isnan(y).any():
        raise ValueError("NaN in training data")
    n, d = X.shape
    xtx = X.T @ X
    xty = X.T @ y
    eigvals = np.clip(np.linalg.eigvalsh(xtx), 0.0, None)

    lam = 1.0
    y_var = float(np.var(y))
    beta = 1.0 / y_var if y_var > _TINY else 1.0
    lml_path: list[float] = []
    converged_at = None
    m = np.zeros(d)
    cov = np.eye(d)

    for it in range(1, max_iters + 1):
        A = lam * np.eye(d) + beta * xtx
        m, cov = _solve_spd(A, beta * xty)
        resid = y - X @ m
        resid2 = float(resid @ resid)
        gamma = float(np.sum(beta * eigvals / (beta * eigvals + lam)))

        sign, logdet = np.linalg.slogdet(A)
        if sign <= 0:
            raise SingularSystemError("non-positive-definite posterior precision")
        lml_path.append(0.5 * (d * math.log(lam) + n * math.log(beta)
                               - beta * resid2 - lam * float(m @ m)
                               - logdet - n * math.log(2.0 * math.pi)))

        lam_new = gamma / max(float(m @ m), _TINY)
        beta_new = max(n - gamma, _TINY) / max(resid2, _TINY)
        lam_new = min(max(lam_new, _TINY), _BETA_CAP)
        beta_new = min(max(beta_new, _TINY), _BETA_CAP)
        delta = abs(math.log(lam_new) - math.log(lam)) + \
            abs(math.log(beta_new) - math.log(beta))
        lam, beta = lam_new, beta_new
        if delta < tol:
            converged_at = it
            break

    A = lam * np.eye(d) + beta * xtx
    m, cov = _solve_spd(A, beta * xty)
    return PredictorModel(
        weight_mean=m,
        weight_precision=lam,
        noise_precision=beta,
        posterior_covariance=cov,
        layout="",
        training_stats={
            "n_samples": n,
            "converged_iterations": converged_at,
            "converged": converged_at is not None,
            "lml_path": lml_path,
        },
    )


def fit_predictor(space: SearchSpace, archs: list[Architecture],
                  targets: list[float], max_iters: int = 300,
                  tol: float = 1e-9) -> PredictorModel:
    X = np.stack([encode_features(space, a) for a in archs])
    model = fit_brr(X, np.asarray(targets, dtype=float),
                    max_iters=max_iters, tol=tol)
    model.layout = layout_hash(space)
    return model


def predict_raw(model: PredictorModel, x: np.ndarray) -> tuple[float, float]:
    if x.shape[0] != model.weight_mean.shape[0]:
        raise LayoutMismatchError(
            f"feature dim {x.shape[0]} != model dim {model.weight_mean.shape[0]}")
    mean = float(model.weight_mean @ x)
    var = float(x @ model.posterior_covariance @ x) + 1.0 / model.noise_precision
    return mean, math.sqrt(var)


def predict(model: PredictorModel, space: SearchSpace,
            arch: Architecture) -> dict[str, float]:
    if model.layout and model.layout != layout_hash(space):
        raise LayoutMismatchError("model was fitted on a different space layout")
    mean, std = predict_raw(model, encode_features(space, arch))
    return {"mean_ms": mean, "std_ms": std}


def make_predictor_fn(model: PredictorModel, full_space: SearchSpace):
    """Latency callable over (space, arch).

    Architectures from restricted spaces are mapped back into the fitted
    space by operator id before encoding.
    """
    full_hash = layout_hash(full_space)
    if model.layout and model.layout != full_hash:
        raise LayoutMismatchError("model was fitted on a different space layout")

    def fn(space: SearchSpace, arch: Architecture) -> float:
        if layout_hash(space) != full_hash:
            arch = full_space.arch_from_ids(space.arch_ids(arch))
        mean, _ = predict_raw(model, encode_features(full_space, arch))
        return mean
    return fn


def mape(model: PredictorModel, space: SearchSpace,
         dataset: list[tuple[Architecture, float]]) -> float:
    """Mean absolute percentage error of the model over (arch, target) pairs."""
    if not dataset:
        raise EmptyDatasetError("MAPE over an empty dataset")
    total = 0.0
    for arch, target in dataset:
        if target <= 0:
            raise ValueError("targets must be positive")
        pred = predict(model, space, arch)["mean_ms"]
        total += abs(pred - target) / target
    return 100.0 * total / len(dataset)


def model_to_obj(model: PredictorModel) -> dict:
    return {
        "layout": model.layout,
        "weight_mean": model.weight_mean.tolist(),
        "lambda": model.weight_precision,
        "beta": model.noise_precision,
        "covariance": model.posterior_covariance.tolist(),
        "training_stats": {k: v for k, v in model.training_stats.items()
                           if k != "lml_path"},
    }


def model_from_obj(obj: dict) -> PredictorModel:
    return PredictorModel(
        weight_mean=np.asarray(obj["weight_mean"], dtype=float),
        weight_precision=float(obj["lambda"]),
        noise_precision=float(obj["beta"]),
        posterior_covariance=np.asarray(obj["covariance"], dtype=float),
        layout=obj["layout"],
        training_stats=dict(obj.get("training_stats", {})),
    )
