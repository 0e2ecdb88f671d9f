"""The five traditional decoders, trained on feature vectors.

All hyperparameters are fixed here (and overridable per call):

    lda            class means + pooled covariance, ridge 1e-3 * trace / d
    naive_bayes    per-feature Gaussians, variance floor 1e-9
    knn            k = 5 on standardised features; distance then lowest-id
                   tie-breaks
    linear_svm     one-vs-rest linear hinge, sub-gradient descent, 50 epochs,
                   step 1/(lambda*t) with lambda = 1e-4, seeded shuffle,
                   standardised features
    random_forest  100 trees, Gini, bootstrap, sqrt(d) features per split,
                   max depth 16, min leaf 2, seeded

Training is deterministic under a fixed seed for every kind.  Prediction ties
resolve to the lowest class id (KNN first prefers the smaller mean neighbour
distance).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg as _linalg

from ..errors import ArgumentError, DataError, NumericError
from . import _forest
from ._knn import knn_search as _knn_search
from ._svm import pegasos_train

MODEL_KINDS = ("lda", "naive_bayes", "knn", "linear_svm", "random_forest")

DEFAULT_HYPER = {
    "lda": {"ridge_scale": 1e-3},
    "naive_bayes": {"var_floor": 1e-9},
    "knn": {"k": 5},
    "linear_svm": {"lam": 1e-4, "epochs": 50},
    "random_forest": {"n_trees": 100, "max_depth": 16, "min_leaf": 2},
}

SAVE_FORMAT_VERSION = 1


@dataclass
class TrainedModel:
    kind: str
    classes: np.ndarray  # sorted label values
    feature_dim: int
    params: dict
    hyper: dict
    feature_layout: tuple[str, ...] = ()

    @property
    def n_classes(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (K, K) int64, rows true, cols predicted
    classes: np.ndarray

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("true\\pred," + ",".join(str(c) for c in self.classes) + "\n")
            for i, c in enumerate(self.classes):
                fh.write(str(c) + "," + ",".join(str(v) for v in self.counts[i]) + "\n")


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    confusion: ConfusionMatrix


def _check_training_data(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ArgumentError(f"X must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ArgumentError(f"y shape {y.shape} does not match X rows {X.shape[0]}")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise DataError("need at least two classes")
    thin = classes[counts < 2]
    if thin.size:
        raise DataError(f"classes with fewer than 2 samples: {thin.tolist()}")
    return X, y, classes


def _class_indices(y, classes):
    return np.searchsorted(classes, y)


def _standardize_fit(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd == 0, 1.0, sd)  # constant features contribute nothing
    return mu, sd


def _fit_lda(X, y_idx, n_classes, hyper, seed):
    n, d = X.shape
    means = np.vstack([X[y_idx == k].mean(axis=0) for k in range(n_classes)])
    centered = X - means[y_idx]
    cov = centered.T @ centered / (n - n_classes)
    lam = hyper["ridge_scale"] * np.trace(cov) / d
    cov_r = cov + lam * np.eye(d)
    try:
        cho = _linalg.cho_factor(cov_r)
        coef = _linalg.cho_solve(cho, means.T).T  # (K, d)
    except (np.linalg.LinAlgError, _linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"pooled covariance is singular even after ridge: {exc}") from None
    if not np.all(np.isfinite(coef)):
        raise NumericError("LDA solve produced non-finite coefficients")
    priors = np.bincount(y_idx, minlength=n_classes) / n
    intercept = -0.5 * np.einsum("kd,kd->k", coef, means) + np.log(priors)
    return {"coef": coef, "intercept": intercept}


def _predict_lda(params, X):
    scores = X @ params["coef"].T + params["intercept"]
    return np.argmax(scores, axis=1)


def _fit_nb(X, y_idx, n_classes, hyper, seed):
    n, d = X.shape
    means = np.vstack([X[y_idx == k].mean(axis=0) for k in range(n_classes)])
    variances = np.vstack([X[y_idx == k].var(axis=0) for k in range(n_classes)])
    variances = np.maximum(variances, hyper["var_floor"])
    priors = np.bincount(y_idx, minlength=n_classes) / n
    return {"means": means, "vars": variances, "log_priors": np.log(priors)}


def _predict_nb(params, X):
    n = X.shape[0]
    k = params["means"].shape[0]
    scores = np.empty((n, k))
    for c in range(k):
        mu = params["means"][c]
        var = params["vars"][c]
        scores[:, c] = params["log_priors"][c] - 0.5 * np.sum(
            (X - mu) ** 2 / var + np.log(2 * np.pi * var), axis=1
        )
    return np.argmax(scores, axis=1)


def _fit_knn(X, y_idx, n_classes, hyper, seed):
    mu, sd = _standardize_fit(X)
    return {"mu": mu, "sd": sd, "train": (X - mu) / sd, "labels": y_idx.astype(np.int64),
            "k": np.asarray(hyper["k"])}


def _predict_knn(params, X, n_classes):
    k = min(int(params["k"]), params["train"].shape[0])
    Xs = np.ascontiguousarray((X - params["mu"]) / params["sd"])
    nn_idx, nn_d2 = _knn_search(params["train"], Xs, k)
    labels = params["labels"]
    out = np.empty(Xs.shape[0], np.int64)
    for i in range(Xs.shape[0]):
        neigh = labels[nn_idx[i]]
        dist = np.sqrt(np.maximum(nn_d2[i], 0.0))
        counts = np.bincount(neigh, minlength=n_classes)
        best = counts.max()
        tied = np.flatnonzero(counts == best)
        if tied.size == 1:
            out[i] = tied[0]
            continue
        # Vote tie: smaller mean neighbour distance, then lowest class id.
        mean_d = np.array([dist[neigh == c].mean() for c in tied])
        out[i] = tied[np.argmin(mean_d)]
    return out


def _fit_svm(X, y_idx, n_classes, hyper, seed):
    mu, sd = _standardize_fit(X)
    Xs = np.hstack([(X - mu) / sd, np.ones((X.shape[0], 1))])
    lam = float(hyper["lam"])
    epochs = int(hyper["epochs"])
    n = Xs.shape[0]
    weights = np.empty((n_classes, Xs.shape[1]))
    for c in range(n_classes):
        rng = np.random.default_rng([seed, 9176, c])
        perm = np.vstack([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)
        ybin = np.where(y_idx == c, 1.0, -1.0)
        weights[c] = pegasos_train(Xs, ybin, lam, perm)
    return {"mu": mu, "sd": sd, "weights": weights}


def _predict_svm(params, X):
    Xs = np.hstack([(X - params["mu"]) / params["sd"], np.ones((X.shape[0], 1))])
    scores = Xs @ params["weights"].T
    return np.argmax(scores, axis=1)


def _fit_rf(X, y_idx, n_classes, hyper, seed):
    return _forest.fit_forest(X, y_idx, n_classes, n_trees=int(hyper["n_trees"]),
                              seed=int(seed) & 0xFFFFFFFFFFFF,
                              max_depth=int(hyper["max_depth"]), min_leaf=int(hyper["min_leaf"]))


def train(kind: str, X, y, hyper: dict | None = None, seed: int = 0,
          feature_layout: tuple[str, ...] = ()) -> TrainedModel:
    """Fit one decoder; deterministic for a fixed (kind, X, y, hyper, seed)."""
    if kind not in MODEL_KINDS:
        raise ArgumentError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    X, y, classes = _check_training_data(X, y)
    merged = dict(DEFAULT_HYPER[kind])
    if hyper:
        merged.update(hyper)
    y_idx = _class_indices(y, classes)
    fit = {
        "lda": _fit_lda,
        "naive_bayes": _fit_nb,
        "knn": _fit_knn,
        "linear_svm": _fit_svm,
        "random_forest": _fit_rf,
    }[kind]
    params = fit(X, y_idx, classes.size, merged, seed)
    return TrainedModel(kind=kind, classes=classes, feature_dim=X.shape[1], params=params,
                        hyper=merged, feature_layout=tuple(feature_layout))


def predict(model: TrainedModel, X) -> np.ndarray:
    """Deterministic labels; see the module docstring for tie-break rules."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.feature_dim:
        raise ArgumentError(
            f"expected (n, {model.feature_dim}) features, got shape {X.shape}"
        )
    if model.kind == "lda":
        idx = _predict_lda(model.params, X)
    elif model.kind == "naive_bayes":
        idx = _predict_nb(model.params, X)
    elif model.kind == "knn":
        idx = _predict_knn(model.params, X, model.n_classes)
    elif model.kind == "linear_svm":
        idx = _predict_svm(model.params, X)
    elif model.kind == "random_forest":
        idx = _forest.forest_predict_idx(model.params, X, model.n_classes)
    else:
        raise ArgumentError(f"unknown model kind {model.kind!r}")
    return model.classes[idx]


def evaluate(model: TrainedModel, X, y) -> EvalResult:
    """Accuracy plus the confusion matrix (rows true, cols predicted)."""
    y = np.asarray(y)
    if y.size == 0:
        raise ArgumentError("empty test set")
    pred = predict(model, X)
    classes = model.classes
    k = classes.size
    ti = np.searchsorted(classes, y)
    pi = np.searchsorted(classes, pred)
    if np.any(classes[ti] != y):
        raise ArgumentError("test labels contain classes unknown to the model")
    counts = np.zeros((k, k), np.int64)
    np.add.at(counts, (ti, pi), 1)
    # Structural invariants, asserted on every evaluation.
    assert counts.sum(axis=1).tolist() == np.bincount(ti, minlength=k).tolist()
    accuracy = float(np.trace(counts) / counts.sum())
    return EvalResult(accuracy=accuracy, confusion=ConfusionMatrix(counts=counts, classes=classes))


def save_model(model: TrainedModel, path) -> None:
    """Versioned binary save with the feature layout embedded."""
    meta = {
        "version": SAVE_FORMAT_VERSION,
        "kind": model.kind,
        "feature_dim": model.feature_dim,
        "hyper": model.hyper,
        "feature_layout": list(model.feature_layout),
    }
    arrays = {"classes": model.classes}
    for name, value in model.params.items():
        arrays[f"param__{name}"] = np.asarray(value)
    np.savez_compressed(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_model(path) -> TrainedModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != SAVE_FORMAT_VERSION:
            raise ArgumentError(f"unsupported model format version {meta.get('version')}")
        params = {}
        for key in data.files:
            if key.startswith("param__"):
                params[key[len("param__"):]] = data[key]
        return TrainedModel(
            kind=meta["kind"],
            classes=data["classes"],
            feature_dim=int(meta["feature_dim"]),
            params=params,
            hyper=meta["hyper"],
            feature_layout=tuple(meta["feature_layout"]),
        )
