"""Brute-force K-nearest-neighbour classifier on flattened traces."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..sensor_data import N_CLASSES


@dataclass
class KnnModel:
    train_x: np.ndarray  # (n, D)
    train_y: np.ndarray  # (n,) label indices
    k: int = 4

    def __post_init__(self):
        self.train_x = np.asarray(self.train_x, dtype=np.float64)
        self.train_y = np.asarray(self.train_y, dtype=np.int64)
        if len(self.train_x) == 0 or len(self.train_x) != len(self.train_y):
            raise ValueError("KNN needs a non-empty training set with one label per vector")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k > len(self.train_x):
            raise ValueError(f"k={self.k} exceeds training size {len(self.train_x)}")


def _vote(dist: np.ndarray, labels: np.ndarray) -> int:
    votes = np.bincount(labels, minlength=N_CLASSES)
    summed = np.bincount(labels, weights=dist, minlength=N_CLASSES)
    best = votes.max()
    tied = np.flatnonzero(votes == best)
    # fewest total distance among the tied labels, then lowest label index
    return int(tied[np.argmin(summed[tied])])


def knn_predict(model: KnnModel, x: np.ndarray) -> int:
    """Majority label among the k closest training vectors (Euclidean).

    Equal distances are ordered by training index. Vote ties go to the label
    with the smallest summed distance, then the smallest label index.
    """
    d = np.sqrt(((model.train_x - np.asarray(x, dtype=np.float64)) ** 2).sum(axis=1))
    nearest = np.argsort(d, kind="stable")[: model.k]
    return _vote(d[nearest], model.train_y[nearest])


def knn_predict_batch(model: KnnModel, X: np.ndarray, chunk: int = 8) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(len(X), dtype=np.int64)
    for s in range(0, len(X), chunk):
        q = X[s : s + chunk]
        d = np.sqrt(((model.train_x[None, :, :] - q[:, None, :]) ** 2).sum(axis=2))
        nearest = np.argsort(d, axis=1, kind="stable")[:, : model.k]
        for j in range(len(q)):
            out[s + j] = _vote(d[j, nearest[j]], model.train_y[nearest[j]])
    return out


def save_knn(model: KnnModel, path: str | Path) -> None:
    """CSV with a ``k,<k>`` line followed by ``label_index, x_1..x_D`` per training vector."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", model.k])
        for x, y in zip(model.train_x, model.train_y):
            w.writerow([int(y)] + [repr(float(v)) for v in x])


def load_knn(path: str | Path) -> KnnModel:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "k":
        raise ValueError(f"{path}: missing k line")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return KnnModel(data[:, 1:], data[:, 0].astype(np.int64), int(rows[0][1]))
