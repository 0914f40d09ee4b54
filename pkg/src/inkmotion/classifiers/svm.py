"""One-vs-all polynomial-kernel SVMs trained by kernelized stochastic subgradient descent."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..sensor_data import N_CLASSES

log = logging.getLogger(__name__)


@dataclass
class SvmConfig:
    degree: int = 3
    coef0: float = 1.0
    lam: float = 1e-4
    iterations: int = 40000

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SvmModel:
    """26 binary machines sharing one support set.

    ``coef[j, c]`` is alpha_j * y_j for machine c (alpha counts margin
    violations). The decision value of machine c is
    ``(K(x, X) @ coef[:, c] + bias_sum[c]) / (lam * T)``, where the bias is the
    weight on a constant feature of 1 appended to the kernel feature map.
    """

    support_x: np.ndarray
    coef: np.ndarray  # (n, 26)
    bias_sum: np.ndarray  # (26,)
    config: SvmConfig
    steps: int

    @property
    def bias(self) -> np.ndarray:
        return self.bias_sum / (self.config.lam * max(self.steps, 1))

    @property
    def dual_coef(self) -> np.ndarray:
        return self.coef / (self.config.lam * max(self.steps, 1))


def poly_kernel(U: np.ndarray, V: np.ndarray, degree: int, coef0: float) -> np.ndarray:
    """(u . v / D + coef0) ** degree, D = feature dimension."""
    D = U.shape[-1]
    return (U @ V.T / D + coef0) ** degree


def svm_train(train_x: np.ndarray, train_y: np.ndarray, cfg: SvmConfig | None = None, seed: int = 0) -> SvmModel:
    """Train all 26 one-vs-all machines with a shared sample stream.

    At step t one training index is drawn and every machine whose margin on it
    is below 1 takes a subgradient step of size 1/(lam * t).
    """
    cfg = cfg or SvmConfig()
    X = np.asarray(train_x, dtype=np.float64)
    y = np.asarray(train_y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("SVM training needs at least 2 distinct labels")
    for c in range(N_CLASSES):
        if not np.any(y == c):
            log.warning("no training samples for label %d; its machine is always negative", c)
    n = len(X)
    Y = np.where(y[:, None] == np.arange(N_CLASSES)[None, :], 1.0, -1.0)
    coef = np.zeros((n, N_CLASSES))
    bias_sum = np.zeros(N_CLASSES)
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, n, size=cfg.iterations)
    for t, i in enumerate(picks, start=1):
        k_row = poly_kernel(X[i : i + 1], X, cfg.degree, cfg.coef0)[0]
        score = (k_row @ coef + bias_sum) / (cfg.lam * t)
        viol = Y[i] * score < 1.0
        if viol.any():
            coef[i, viol] += Y[i, viol]
            bias_sum[viol] += Y[i, viol]
    return SvmModel(X, coef, bias_sum, cfg, cfg.iterations)


def svm_scores(model: SvmModel, X: np.ndarray, chunk: int = 2048) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    scale = model.config.lam * max(model.steps, 1)
    out = np.empty((len(X), N_CLASSES))
    active = np.flatnonzero(np.any(model.coef != 0, axis=1))
    sx, sc = model.support_x[active], model.coef[active]
    for s in range(0, len(X), chunk):
        K = poly_kernel(X[s : s + chunk], sx, model.config.degree, model.config.coef0)
        out[s : s + chunk] = (K @ sc + model.bias_sum) / scale
    return out


def argmax_label(scores: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest label index on ties
    return np.argmax(scores, axis=-1)


def svm_predict(model: SvmModel, x: np.ndarray) -> int:
    return int(argmax_label(svm_scores(model, x)[0]))


def svm_predict_batch(model: SvmModel, X: np.ndarray) -> np.ndarray:
    return argmax_label(svm_scores(model, X))


def save_svm(model: SvmModel, path: str | Path) -> None:
    """Self-describing CSV: a JSON header line, the bias row, then one row per support vector.

    Support rows are ``index, coef_1..coef_26, x_1..x_D``; training rows with
    all-zero coefficients are omitted.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = dict(model.config.to_dict(), steps=model.steps, n_train=len(model.support_x), dim=model.support_x.shape[1])
    with path.open("w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["bias"] + [repr(float(v)) for v in model.bias_sum])
        for j in np.flatnonzero(np.any(model.coef != 0, axis=1)):
            w.writerow([int(j)] + [repr(float(v)) for v in model.coef[j]] + [repr(float(v)) for v in model.support_x[j]])


def load_svm(path: str | Path) -> SvmModel:
    with Path(path).open(newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing SVM header line")
        header = json.loads(first[2:])
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "bias":
        raise ValueError(f"{path}: missing bias row")
    n, dim = header.pop("n_train"), header.pop("dim")
    steps = header.pop("steps")
    support_x = np.zeros((n, dim))
    coef = np.zeros((n, N_CLASSES))
    for rec in rows[1:]:
        j = int(rec[0])
        coef[j] = [float(v) for v in rec[1 : 1 + N_CLASSES]]
        support_x[j] = [float(v) for v in rec[1 + N_CLASSES :]]
    bias_sum = np.array([float(v) for v in rows[0][1:]])
    return SvmModel(support_x, coef, bias_sum, SvmConfig(**header), steps)
