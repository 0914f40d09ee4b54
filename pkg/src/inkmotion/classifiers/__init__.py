"""The four classifiers behind one fit/predict interface.

Every classifier takes (B, N, 3) resampled traces, standardizes them with
per-dimension statistics of its own training data, and reshapes them into the
layout its model expects: flattened 3N vectors for KNN/SVM, (3, N)
channel-major for the CNN and (N, 3) time-major for the RNN.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cnn import CnnConfig, CnnModel, cnn_forward, cnn_predict, cnn_train
from .knn import KnnModel, knn_predict, knn_predict_batch, load_knn, save_knn
from .rnn import LstmLayerParams, RnnConfig, RnnModel, lstm_cell, rnn_forward, rnn_predict, rnn_train
from .svm import SvmConfig, SvmModel, load_svm, save_svm, svm_predict, svm_predict_batch, svm_train

MODELS = ("knn", "svm", "cnn", "rnn")


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        std = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(std < 1e-8, 1.0, std))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


class Classifier:
    name = "base"

    def __init__(self):
        self.scaler: Standardizer | None = None
        self.curves: list[dict] = []

    def _layout(self, z: np.ndarray) -> np.ndarray:
        return z

    def _prep(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != 3:
            raise ValueError(f"{self.name}: expected (B, N, 3) traces, got {x.shape}")
        return self._layout(self.scaler.transform(x))

    def fit(self, x: np.ndarray, y: np.ndarray, seed: int = 0, dev=None) -> "Classifier":
        self.scaler = Standardizer.fit(x)
        dev_p = None if dev is None or not len(dev[0]) else (self._prep(dev[0]), np.asarray(dev[1]))
        self._fit(self._prep(x), np.asarray(y, dtype=np.int64), seed, dev_p)
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        if self.scaler is None:
            raise RuntimeError(f"{self.name} classifier is not trained")
        return self._predict(self._prep(x))

    def save(self, directory: str | Path) -> list[Path]:
        """Write the standardization constants and the model file into ``directory``."""
        if self.scaler is None:
            raise RuntimeError(f"{self.name} classifier is not trained")
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        scaler = directory / "scaler.json"
        scaler.write_text(json.dumps({"mean": self.scaler.mean.tolist(), "std": self.scaler.std.tolist()}))
        return [scaler, self._save_model(directory)]

    def _save_model(self, directory: Path) -> Path:
        raise NotImplementedError

    def _fit(self, x, y, seed, dev):
        raise NotImplementedError

    def _predict(self, x):
        raise NotImplementedError


class KnnClassifier(Classifier):
    name = "knn"

    def __init__(self, k: int = 4):
        super().__init__()
        self.k = k
        self.model: KnnModel | None = None

    def _layout(self, z):
        return z.reshape(len(z), -1)

    def _fit(self, x, y, seed, dev):
        self.model = KnnModel(x, y, self.k)

    def _predict(self, x):
        return knn_predict_batch(self.model, x)

    def _save_model(self, directory):
        save_knn(self.model, directory / "knn.csv")
        return directory / "knn.csv"


class SvmClassifier(Classifier):
    name = "svm"

    def __init__(self, cfg: SvmConfig | None = None):
        super().__init__()
        self.cfg = cfg or SvmConfig()
        self.model: SvmModel | None = None

    def _layout(self, z):
        return z.reshape(len(z), -1)

    def _fit(self, x, y, seed, dev):
        self.model = svm_train(x, y, self.cfg, seed)

    def _predict(self, x):
        return svm_predict_batch(self.model, x)

    def _save_model(self, directory):
        save_svm(self.model, directory / "svm.csv")
        return directory / "svm.csv"


class CnnClassifier(Classifier):
    name = "cnn"

    def __init__(self, cfg: CnnConfig | None = None):
        super().__init__()
        self.cfg = cfg or CnnConfig()
        self.model: CnnModel | None = None

    def _layout(self, z):
        return np.ascontiguousarray(z.transpose(0, 2, 1))

    def _fit(self, x, y, seed, dev):
        self.model, self.curves = cnn_train(x, y, self.cfg, seed, dev)

    def _predict(self, x):
        return cnn_predict(self.model, x)

    def _save_model(self, directory):
        self.model.save(directory / "cnn.bin")
        return directory / "cnn.bin"


class RnnClassifier(Classifier):
    name = "rnn"

    def __init__(self, cfg: RnnConfig | None = None):
        super().__init__()
        self.cfg = cfg or RnnConfig()
        self.model: RnnModel | None = None

    def _fit(self, x, y, seed, dev):
        self.model, self.curves = rnn_train(x, y, self.cfg, seed, dev)

    def _predict(self, x):
        return rnn_predict(self.model, x)

    def _save_model(self, directory):
        self.model.save(directory / "rnn.bin")
        return directory / "rnn.bin"


__all__ = [
    "MODELS",
    "Classifier",
    "CnnClassifier",
    "CnnConfig",
    "CnnModel",
    "KnnClassifier",
    "KnnModel",
    "LstmLayerParams",
    "RnnClassifier",
    "RnnConfig",
    "RnnModel",
    "Standardizer",
    "SvmClassifier",
    "SvmConfig",
    "SvmModel",
    "cnn_forward",
    "cnn_train",
    "knn_predict",
    "load_knn",
    "load_svm",
    "lstm_cell",
    "rnn_forward",
    "rnn_train",
    "save_knn",
    "save_svm",
    "svm_predict",
    "svm_train",
]
