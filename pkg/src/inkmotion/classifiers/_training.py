from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from ..nn_core import AdamState, Params, adam_step

log = logging.getLogger(__name__)


def minibatch_adam(
    params: Params,
    loss_and_grads: Callable[[np.ndarray, np.ndarray], tuple[float, Params, np.ndarray]],
    x: np.ndarray,
    y: np.ndarray,
    *,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    rng: np.random.Generator,
    predict: Callable[[np.ndarray], np.ndarray] | None = None,
    dev: tuple[np.ndarray, np.ndarray] | None = None,
    name: str = "model",
) -> list[dict]:
    """Shuffled minibatch Adam; returns one curve record per epoch.

    ``train_acc`` is the running accuracy of the minibatch forward passes
    within the epoch (before each update); ``dev_acc`` is evaluated after the
    epoch when a dev set is given.
    """
    opt = AdamState(learning_rate=learning_rate)
    curves = []
    n = len(x)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        correct = 0
        total_loss = 0.0
        for s in range(0, n, batch_size):
            idx = order[s : s + batch_size]
            loss, grads, logits = loss_and_grads(x[idx], y[idx])
            correct += int(np.sum(np.argmax(logits, axis=1) == y[idx]))
            total_loss += loss
            adam_step(opt, params, grads)
        rec = {"epoch": epoch, "loss": total_loss / n, "train_acc": correct / n, "dev_acc": None}
        if dev is not None and predict is not None and len(dev[0]):
            rec["dev_acc"] = float(np.mean(predict(dev[0]) == dev[1]))
        log.debug("%s epoch %d: %s", name, epoch, rec)
        curves.append(rec)
    return curves
