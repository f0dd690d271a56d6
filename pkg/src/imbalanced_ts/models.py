"""Window features and small forecasting models (persistence, ridge, kNN, MLP).

Every model consumes the per-window feature vector produced by
:func:`extract_features`: for each channel its mean, population standard
deviation, minimum, maximum and last value.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DataError, EmptyData, ShapeMismatch, SingularDesign

FEATURE_STATS = ("mean", "std", "min", "max", "last")


@dataclass(frozen=True)
class Persistence:
    """Predict the last observed target value."""


@dataclass(frozen=True)
class Ridge:
    lam: float = 1.0

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise DataError(f"ridge lambda must be finite and >= 0, got {self.lam!r}")


@dataclass(frozen=True)
class KNN:
    k: int = 5

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise DataError(f"k must be a positive integer, got {self.k!r}")


@dataclass(frozen=True)
class MLP:
    """One tanh hidden layer trained by mini-batch gradient descent on a
    squared loss, with standardised inputs and target."""

    hidden_units: int = 16
    epochs: int = 20
    learning_rate: float = 0.05
    seed: int = 0
    batch_size: int = 32

    def __post_init__(self):
        for name in ("hidden_units", "epochs", "batch_size"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise DataError(f"{name} must be a positive integer, got {v!r}")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise DataError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or self.seed < 0:
            raise DataError(f"seed must be a nonnegative integer, got {self.seed!r}")


ModelSpec = Union[Persistence, Ridge, KNN, MLP]

_KINDS = {"persistence": Persistence, "ridge": Ridge, "knn": KNN, "mlp": MLP}


def model_spec_to_dict(spec: ModelSpec) -> dict:
    kind = next(k for k, cls in _KINDS.items() if isinstance(spec, cls))
    d = {"kind": kind, **asdict(spec)}
    if "lam" in d:
        d["lambda"] = d.pop("lam")
    return d


def model_spec_from_dict(d: dict) -> ModelSpec:
    d = dict(d)
    kind = str(d.pop("kind", "")).lower()
    if kind not in _KINDS:
        raise DataError(f"unknown model kind {kind!r}; expected one of {sorted(_KINDS)}")
    if "lambda" in d:
        d["lam"] = d.pop("lambda")
    try:
        return _KINDS[kind](**d)
    except TypeError as exc:
        raise DataError(f"bad parameters for model {kind!r}: {exc}") from None


# --------------------------------------------------------------------------
# Features
# --------------------------------------------------------------------------


def extract_features_batch(windows) -> np.ndarray:
    """``N x L x C`` windows to ``N x 5C`` features, channel-major."""
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 3:
        raise ShapeMismatch(f"expected an N x L x C array of windows, got shape {w.shape}")
    if w.shape[1] == 0:
        raise EmptyData("window has no rows")
    stats = np.stack(
        [w.mean(axis=1), w.std(axis=1), w.min(axis=1), w.max(axis=1), w[:, -1, :]],
        axis=2,
    )
    return stats.reshape(w.shape[0], -1)


def extract_features(window) -> np.ndarray:
    """Feature vector of one ``L x C`` window (a 1-D array counts as one channel)."""
    w = np.asarray(window, dtype=np.float64)
    if w.ndim == 1:
        w = w[:, None]
    if w.ndim != 2:
        raise ShapeMismatch(f"expected an L x C window, got shape {w.shape}")
    return extract_features_batch(w[None])[0]


def last_value_column(channel: int) -> int:
    """Feature column holding the last value of ``channel``."""
    return len(FEATURE_STATS) * channel + FEATURE_STATS.index("last")


# --------------------------------------------------------------------------
# Fitting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainedModel:
    spec: ModelSpec
    target_index: int
    n_features: int
    feature_mean: np.ndarray
    feature_std: np.ndarray
    params: dict = field(default_factory=dict)
    window_shape: tuple | None = None

    def standardize(self, X) -> np.ndarray:
        return (X - self.feature_mean) / self.feature_std


def _std_guard(s):
    s = np.array(s, dtype=np.float64)
    s[s == 0] = 1.0
    return s


def fit(spec: ModelSpec, windows, targets, target_index: int = 0) -> TrainedModel:
    """Fit ``spec`` on ``N x L x C`` windows and their targets."""
    w = np.asarray(windows, dtype=np.float64)
    model = fit_features(spec, extract_features_batch(w), targets, target_index)
    object.__setattr__(model, "window_shape", tuple(w.shape[1:]))
    return model


def fit_features(spec: ModelSpec, X, y, target_index: int = 0) -> TrainedModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ShapeMismatch(f"features {X.shape} do not match {y.size} targets")
    if y.size == 0:
        raise EmptyData("need at least one training pair")
    p = X.shape[1]
    if not 0 <= last_value_column(target_index) < p:
        raise ShapeMismatch(f"target channel {target_index} not covered by {p} features")
    mu = X.mean(axis=0)
    sd = _std_guard(X.std(axis=0))
    base = dict(spec=spec, target_index=target_index, n_features=p, feature_mean=mu, feature_std=sd)

    if isinstance(spec, Persistence):
        return TrainedModel(**base)

    Z = (X - mu) / sd
    if isinstance(spec, Ridge):
        coef, intercept = _ridge_solve(Z, y, spec.lam)
        return TrainedModel(**base, params={"coef": coef, "intercept": intercept})
    if isinstance(spec, KNN):
        if spec.k > y.size:
            raise DataError(f"k={spec.k} exceeds the {y.size} training pairs")
        return TrainedModel(**base, params={"train_features": Z, "train_targets": y.copy()})
    if isinstance(spec, MLP):
        y_mean, y_std = float(y.mean()), float(_std_guard([y.std()])[0])
        params = _mlp_train(spec, Z, (y - y_mean) / y_std)
        params.update(target_mean=y_mean, target_std=y_std)
        return TrainedModel(**base, params=params)
    raise TypeError(f"unsupported model spec: {spec!r}")


def _ridge_solve(Z, y, lam):
    """Minimise ``||y - b - Z c||^2 + lam ||c||^2`` for centred ``Z``; ``b`` is not penalised."""
    y_mean = float(y.mean())
    p = Z.shape[1]
    if lam == 0 and np.linalg.matrix_rank(Z) < p:
        raise SingularDesign(
            "design matrix is rank deficient with lambda = 0; use a ridge lambda > 0"
        )
    A = Z.T @ Z + lam * np.eye(p)
    try:
        coef = np.linalg.solve(A, Z.T @ (y - y_mean))
    except np.linalg.LinAlgError:
        raise SingularDesign("normal equations are singular; use a ridge lambda > 0") from None
    return coef, y_mean


def ridge_objective_gradient(model: TrainedModel, X, y) -> np.ndarray:
    """Gradient of the ridge objective w.r.t. ``(coef, intercept)`` at the fit."""
    Z = model.standardize(np.asarray(X, dtype=np.float64))
    r = Z @ model.params["coef"] + model.params["intercept"] - y
    g_coef = 2 * Z.T @ r + 2 * model.spec.lam * model.params["coef"]
    return np.append(g_coef, 2 * r.sum())


# --------------------------------------------------------------------------
# MLP
# --------------------------------------------------------------------------


def mlp_init(n_inputs: int, hidden: int, rng: np.random.Generator) -> dict:
    return {
        "W1": rng.standard_normal((n_inputs, hidden)) / math.sqrt(n_inputs),
        "b1": np.zeros(hidden),
        "W2": rng.standard_normal(hidden) / math.sqrt(hidden),
        "b2": np.zeros(1),
    }


def mlp_forward(params: dict, Z) -> np.ndarray:
    H = np.tanh(Z @ params["W1"] + params["b1"])
    return H @ params["W2"] + params["b2"][0]


def mlp_loss_and_grads(params: dict, Z, y):
    """Half mean squared error and its gradients for every parameter array."""
    H = np.tanh(Z @ params["W1"] + params["b1"])
    out = H @ params["W2"] + params["b2"][0]
    diff = out - y
    loss = 0.5 * float(np.mean(diff**2))
    r = diff / y.size
    dH = np.outer(r, params["W2"]) * (1.0 - H**2)
    grads = {
        "W1": Z.T @ dH,
        "b1": dH.sum(axis=0),
        "W2": H.T @ r,
        "b2": np.array([r.sum()]),
    }
    return loss, grads


def _mlp_train(spec: MLP, Z, y) -> dict:
    rng = np.random.default_rng(spec.seed)
    params = mlp_init(Z.shape[1], spec.hidden_units, rng)
    n, bs = y.size, spec.batch_size
    for _ in range(spec.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, bs):
            batch = perm[start : start + bs]
            _, grads = mlp_loss_and_grads(params, Z[batch], y[batch])
            for key, g in grads.items():
                params[key] -= spec.learning_rate * g
    return params


# --------------------------------------------------------------------------
# Prediction
# --------------------------------------------------------------------------

_KNN_CHUNK_ELEMENTS = 4_000_000


def predict_features(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeMismatch(
            f"expected N x {model.n_features} features, got shape {X.shape}"
        )
    spec = model.spec
    if isinstance(spec, Persistence):
        return X[:, last_value_column(model.target_index)].copy()
    Z = model.standardize(X)
    if isinstance(spec, Ridge):
        return Z @ model.params["coef"] + model.params["intercept"]
    if isinstance(spec, MLP):
        return mlp_forward(model.params, Z) * model.params["target_std"] + model.params["target_mean"]
    if isinstance(spec, KNN):
        return _knn_predict(model.params["train_features"], model.params["train_targets"], Z, spec.k)
    raise TypeError(f"unsupported model spec: {spec!r}")


def _knn_predict(train, targets, Z, k):
    """Mean target of the ``k`` nearest training rows; ties go to the lower row."""
    n = train.shape[0]
    out = np.empty(Z.shape[0])
    sq_train = np.einsum("ij,ij->i", train, train)
    chunk = max(1, _KNN_CHUNK_ELEMENTS // max(1, n))
    for s in range(0, Z.shape[0], chunk):
        q = Z[s : s + chunk]
        d2 = np.einsum("ij,ij->i", q, q)[:, None] + sq_train[None, :] - 2.0 * (q @ train.T)
        # shortlist by the fast expansion, then rank on exact distances
        m = min(n, 2 * k + 8)
        cand = np.argpartition(d2, m - 1, axis=1)[:, :m] if m < n else np.tile(np.arange(n), (q.shape[0], 1))
        exact = ((q[:, None, :] - train[cand]) ** 2).sum(axis=2)
        order = np.lexsort((cand, exact), axis=1)[:, :k]
        nearest = np.take_along_axis(cand, order, axis=1)
        out[s : s + chunk] = targets[nearest].mean(axis=1)
    return out


def _check_windows(model: TrainedModel, w: np.ndarray):
    if model.window_shape is not None and tuple(w.shape[1:]) != tuple(model.window_shape):
        raise ShapeMismatch(
            f"window shape {tuple(w.shape[1:])} does not match training shape {tuple(model.window_shape)}"
        )


def predict_batch(model: TrainedModel, windows) -> np.ndarray:
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 3:
        raise ShapeMismatch(f"expected N x L x C windows, got shape {w.shape}")
    _check_windows(model, w)
    return predict_features(model, extract_features_batch(w))


def predict(model: TrainedModel, window) -> float:
    w = np.asarray(window, dtype=np.float64)
    if w.ndim == 1:
        w = w[:, None]
    return float(predict_batch(model, w[None])[0])


# --------------------------------------------------------------------------
# Serialisation
# --------------------------------------------------------------------------


def _to_jsonable(v):
    if isinstance(v, np.ndarray):
        return {"shape": list(v.shape), "data": v.ravel().tolist()}
    return v


def _from_jsonable(v):
    if isinstance(v, dict) and set(v) == {"shape", "data"}:
        return np.array(v["data"], dtype=np.float64).reshape(v["shape"])
    return v


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format": "imbalanced_ts.trained_model",
        "version": 1,
        "model": model_spec_to_dict(model.spec),
        "target_index": model.target_index,
        "n_features": model.n_features,
        "feature_names_per_channel": list(FEATURE_STATS),
        "window_shape": list(model.window_shape) if model.window_shape else None,
        "standardization": {
            "feature_mean": model.feature_mean.tolist(),
            "feature_std": model.feature_std.tolist(),
        },
        "parameters": {k: _to_jsonable(v) for k, v in model.params.items()},
    }


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("format") != "imbalanced_ts.trained_model":
        raise DataError("not a serialised trained model")
    ws = d.get("window_shape")
    return TrainedModel(
        spec=model_spec_from_dict(d["model"]),
        target_index=int(d["target_index"]),
        n_features=int(d["n_features"]),
        feature_mean=np.array(d["standardization"]["feature_mean"], dtype=np.float64),
        feature_std=np.array(d["standardization"]["feature_std"], dtype=np.float64),
        params={k: _from_jsonable(v) for k, v in d["parameters"].items()},
        window_shape=tuple(ws) if ws else None,
    )


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
