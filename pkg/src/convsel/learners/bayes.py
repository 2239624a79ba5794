"""Gaussian naive Bayes over the numeric layer features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyDataset
from ..shapes import ConvMethod

N_CLASSES = len(ConvMethod)
VARIANCE_FLOOR_FACTOR = 1e-9


@dataclass
class NaiveBayesModel:
    """Per-class priors and per-class, per-feature Gaussian parameters.

    Arrays are indexed by method code; a class never seen in training has
    prior 0 and can never be predicted.
    """

    priors: np.ndarray  # (n_classes,)
    means: np.ndarray  # (n_classes, n_features)
    variances: np.ndarray  # (n_classes, n_features)
    variance_floor: float

    kind = "nb"

    def predict(self, features) -> ConvMethod:
        return predict_nb(self, features)[0]

    def predict_many(self, X) -> np.ndarray:
        scores = log_scores_many(self, X)
        return np.argmax(scores, axis=1).astype(np.int64)


def train_naive_bayes(X, y) -> NaiveBayesModel:
    """Fit class frequencies and per-class sample means / population variances.

    Variances are floored at ``1e-9`` times the largest whole-dataset feature
    variance (1e-9 itself if every feature is constant); classes with fewer
    than two samples get exactly the floor.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyDataset("cannot train naive Bayes on an empty dataset")
    n, d = X.shape
    floor = VARIANCE_FLOOR_FACTOR * float(np.max(X.var(axis=0)))
    if floor <= 0.0:
        floor = VARIANCE_FLOOR_FACTOR
    priors = np.zeros(N_CLASSES)
    means = np.zeros((N_CLASSES, d))
    variances = np.full((N_CLASSES, d), floor)
    for c in range(N_CLASSES):
        rows = X[y == c]
        priors[c] = len(rows) / n
        if len(rows) == 0:
            continue
        means[c] = rows.mean(axis=0)
        if len(rows) >= 2:
            variances[c] = np.maximum(rows.var(axis=0), floor)
    return NaiveBayesModel(priors, means, variances, floor)


def log_scores_many(model: NaiveBayesModel, X) -> np.ndarray:
    """Unnormalised log posteriors, shape (n_samples, n_classes)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    with np.errstate(divide="ignore"):
        log_prior = np.log(model.priors)
    diff = X[:, None, :] - model.means[None, :, :]
    log_lik = -0.5 * (
        np.log(2.0 * np.pi * model.variances)[None, :, :] + diff**2 / model.variances[None, :, :]
    )
    return log_prior[None, :] + log_lik.sum(axis=2)


def log_scores(model: NaiveBayesModel, features) -> np.ndarray:
    return log_scores_many(model, features)[0]


def predict_nb(model: NaiveBayesModel, features) -> tuple[ConvMethod, np.ndarray]:
    """Return the most probable method and the normalised posterior."""
    scores = log_scores(model, features)
    top = np.max(scores)
    weights = np.exp(scores - top)
    posterior = weights / weights.sum()
    return ConvMethod(int(np.argmax(scores))), posterior
