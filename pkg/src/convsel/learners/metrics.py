from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyDataset
from ..shapes import ConvMethod

N_CLASSES = len(ConvMethod)


@dataclass
class Evaluation:
    accuracy: float
    confusion: np.ndarray  # rows: true class, columns: predicted class

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    @property
    def precision(self) -> np.ndarray:
        predicted = self.confusion.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(predicted > 0, np.diag(self.confusion) / predicted, 0.0)

    @property
    def recall(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.support > 0, np.diag(self.confusion) / self.support, 0.0)


@dataclass
class TrainReport:
    kind: str
    n_train: int
    training: Evaluation
    holdout: Evaluation | None = None
    extras: dict = field(default_factory=dict)

    @property
    def training_accuracy(self) -> float:
        return self.training.accuracy

    @property
    def holdout_accuracy(self) -> float | None:
        return None if self.holdout is None else self.holdout.accuracy

    def format(self) -> str:
        lines = [f"kind: {self.kind}", f"train_samples: {self.n_train}"]
        lines.append(f"training_accuracy: {self.training.accuracy:.4f}")
        if self.holdout is not None:
            lines.append(f"holdout_samples: {self.holdout.total}")
            lines.append(f"holdout_accuracy: {self.holdout.accuracy:.4f}")
        for key, value in self.extras.items():
            lines.append(f"{key}: {value}")
        ev = self.holdout if self.holdout is not None else self.training
        for m in ConvMethod:
            lines.append(
                f"{m.token}: support={ev.support[m]} precision={ev.precision[m]:.4f} "
                f"recall={ev.recall[m]:.4f}"
            )
        lines.append("confusion (rows true, cols predicted; gemm,direct,winograd):")
        for row in ev.confusion:
            lines.append("  " + " ".join(f"{v:6d}" for v in row))
        return "\n".join(lines)


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


def evaluate_accuracy(model, X, y) -> Evaluation:
    """Accuracy and confusion matrix of ``model`` on a labelled dataset."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    predicted = model.predict_many(X)
    cm = confusion_matrix(y, predicted)
    return Evaluation(float(np.trace(cm)) / len(y), cm)


def holdout_split(n: int, fraction: float, seed: int = 0):
    """Seeded shuffle, then the first ``round(fraction * n)`` indices are held out."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("holdout fraction must be in [0, 1)")
    order = np.random.default_rng(seed).permutation(n)
    n_hold = int(round(fraction * n))
    return order[n_hold:], order[:n_hold]
