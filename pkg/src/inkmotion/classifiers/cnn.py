"""1-D CNN: three (conv -> maxpool -> relu) blocks, three relu FC layers, 26 logits."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..nn_core import (
    Conv1dLayer,
    DenseLayer,
    Params,
    conv1d_backward_cl,
    conv1d_forward_cl,
    dense_backward,
    dense_forward,
    l2_penalty,
    load_checkpoint,
    maxpool1d,
    maxpool1d_backward,
    relu,
    relu_backward,
    save_checkpoint,
    softmax_cross_entropy,
)
from ..sensor_data import N_CLASSES
from ._training import minibatch_adam


@dataclass
class CnnConfig:
    epochs: int = 20
    batch_size: int = 500
    lam: float = 0.1
    learning_rate: float = 1e-3
    channels: tuple[int, ...] = (32, 64, 64)
    fc_widths: tuple[int, ...] = (3200, 1600, 500)

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.fc_widths = tuple(int(w) for w in self.fc_widths)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["fc_widths"] = list(self.fc_widths)
        return d


@dataclass
class CnnModel:
    convs: list[Conv1dLayer]
    fcs: list[DenseLayer]
    out: DenseLayer
    length: int = 100
    in_channels: int = 3
    scaler: dict = field(default_factory=dict)

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        length: int = 100,
        channels=(32, 64, 64),
        fc_widths=(3200, 1600, 500),
        in_channels: int = 3,
    ) -> "CnnModel":
        convs, c_in = [], in_channels
        for c in channels:
            convs.append(Conv1dLayer.init(c_in, c, rng))
            c_in = c
        fcs, w_in = [], c_in * length
        for w in fc_widths:
            fcs.append(DenseLayer.init(w_in, w, rng))
            w_in = w
        return cls(convs, fcs, DenseLayer.init(w_in, N_CLASSES, rng), length, in_channels)

    def params(self) -> Params:
        p = {}
        for i, c in enumerate(self.convs):
            p[f"conv{i + 1}.k"] = c.kernels
            p[f"conv{i + 1}.b"] = c.bias
        for i, f in enumerate(self.fcs):
            p[f"fc{i + 1}.W"] = f.W
            p[f"fc{i + 1}.b"] = f.b
        p["out.W"] = self.out.W
        p["out.b"] = self.out.b
        return p

    def weight_names(self) -> list[str]:
        return [k for k in self.params() if k.endswith((".k", ".W"))]

    def save(self, path) -> None:
        channels = [c.kernels.shape[0] for c in self.convs]
        widths = [f.W.shape[0] for f in self.fcs]
        arch = "cnn-" + "-".join(map(str, [self.in_channels, *channels])) + "-fc-" + "-".join(map(str, widths))
        meta = {"length": self.length, "in_channels": self.in_channels, "channels": channels, "fc_widths": widths}
        save_checkpoint(path, arch, self.params(), meta)

    @classmethod
    def load(cls, path) -> "CnnModel":
        arch, p, meta = load_checkpoint(path)
        if not arch.startswith("cnn-"):
            raise ValueError(f"{path}: not a CNN checkpoint ({arch})")
        convs = [Conv1dLayer(p[f"conv{i + 1}.k"], p[f"conv{i + 1}.b"]) for i in range(len(meta["channels"]))]
        fcs = [DenseLayer(p[f"fc{i + 1}.W"], p[f"fc{i + 1}.b"]) for i in range(len(meta["fc_widths"]))]
        return cls(convs, fcs, DenseLayer(p["out.W"], p["out.b"]), meta["length"], meta["in_channels"])


def _check_input(model: CnnModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (model.in_channels, model.length):
        raise ValueError(f"CNN expects input (B, {model.in_channels}, {model.length}), got {x.shape}")
    return x


def _forward(model: CnnModel, x: np.ndarray):
    # convolution blocks run channels-last, (B, L, C)
    cache = []
    h = np.ascontiguousarray(x.transpose(0, 2, 1))
    for conv in model.convs:
        a = conv1d_forward_cl(conv, h)
        p, took = maxpool1d(a, axis=1)
        if p.shape[1] != model.length:
            raise RuntimeError(f"sequence length changed to {p.shape[1]} inside CNN")
        cache.append((h, took, p))
        h = relu(p)
    B = h.shape[0]
    conv_shape = h.shape
    h = h.reshape(B, -1)
    fc_cache = []
    for fc in model.fcs:
        a = dense_forward(fc, h)
        fc_cache.append((h, a))
        h = relu(a)
    logits = dense_forward(model.out, h)
    return logits, (cache, conv_shape, fc_cache, h)


def cnn_forward(model: CnnModel, x: np.ndarray) -> np.ndarray:
    """Logits (26,) for one (3, L) input or (B, 26) for a batch."""
    single = np.ndim(x) == 2
    logits, _ = _forward(model, _check_input(model, x))
    return logits[0] if single else logits


def cnn_loss_and_grads(model: CnnModel, x: np.ndarray, y: np.ndarray, lam: float) -> tuple[float, Params, np.ndarray]:
    """Batch-summed cross-entropy plus lam * sum of squared weights."""
    x = _check_input(model, x)
    logits, (cache, conv_shape, fc_cache, h_last) = _forward(model, x)
    loss, g = softmax_cross_entropy(logits, y)
    grads: Params = {}
    g, grads["out.W"], grads["out.b"] = dense_backward(model.out, h_last, g)
    for i in range(len(model.fcs) - 1, -1, -1):
        h_in, a = fc_cache[i]
        g = relu_backward(a, g)
        g, grads[f"fc{i + 1}.W"], grads[f"fc{i + 1}.b"] = dense_backward(model.fcs[i], h_in, g)
    g = g.reshape(conv_shape)
    for i in range(len(model.convs) - 1, -1, -1):
        h_in, took, p = cache[i]
        g = relu_backward(p, g)
        g = maxpool1d_backward(g, took, axis=1)
        g, grads[f"conv{i + 1}.k"], grads[f"conv{i + 1}.b"] = conv1d_backward_cl(model.convs[i], h_in, g)
    if lam:
        params = model.params()
        reg, reg_grads = l2_penalty({k: params[k] for k in model.weight_names()}, lam)
        loss += reg
        for k, rg in reg_grads.items():
            grads[k] = grads[k] + rg
    return loss, grads, logits


def cnn_predict(model: CnnModel, x: np.ndarray, batch: int = 500) -> np.ndarray:
    x = _check_input(model, x)
    return np.concatenate(
        [np.argmax(_forward(model, x[s : s + batch])[0], axis=1) for s in range(0, len(x), batch)]
    )


def cnn_train(
    x: np.ndarray,
    y: np.ndarray,
    cfg: CnnConfig | None = None,
    seed: int = 0,
    dev: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[CnnModel, list[dict]]:
    """Train on (B, 3, L) channel-major inputs with Adam; returns (model, curves)."""
    cfg = cfg or CnnConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(seed)
    model = CnnModel.init(rng, length=x.shape[2], channels=cfg.channels, fc_widths=cfg.fc_widths, in_channels=x.shape[1])
    curves = minibatch_adam(
        model.params(),
        lambda bx, by: cnn_loss_and_grads(model, bx, by, cfg.lam),
        x,
        y,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        rng=rng,
        predict=lambda dx: cnn_predict(model, dx),
        dev=dev,
        name="cnn",
    )
    return model, curves
