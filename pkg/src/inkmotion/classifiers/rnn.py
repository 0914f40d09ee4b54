"""Stacked LSTM classifier with hand-written backpropagation through time.

Gate equations, per layer and timestep::

    i = sigmoid(W_ii x + b_ii + W_hi h + b_hi)
    f = sigmoid(W_if x + b_if + W_hf h + b_hf)
    g = tanh   (W_ig x + b_ig + W_hg h + b_hg)
    o = sigmoid(W_io x + b_io + W_ho h + b_ho)
    c' = f * c + i * g
    h' = o * tanh(c')

The four gates are stored stacked in the order i, f, g, o.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..nn_core import (
    DenseLayer,
    Params,
    dense_backward,
    dense_forward,
    glorot_uniform,
    load_checkpoint,
    save_checkpoint,
    sigmoid,
    softmax_cross_entropy,
)
from ..sensor_data import N_CLASSES
from ._lstm_kernels import lstm_backward_tm, lstm_forward_tm
from ._training import minibatch_adam

GATES = ("i", "f", "g", "o")


@dataclass
class RnnConfig:
    epochs: int = 250
    batch_size: int = 500
    learning_rate: float = 1e-3
    hidden: int = 128
    layers: int = 5

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LstmLayerParams:
    Wx: np.ndarray  # (4H, in)   rows: W_ii, W_if, W_ig, W_io
    Wh: np.ndarray  # (4H, H)    rows: W_hi, W_hf, W_hg, W_ho
    bx: np.ndarray  # (4H,)      b_ii, b_if, b_ig, b_io
    bh: np.ndarray  # (4H,)      b_hi, b_hf, b_hg, b_ho

    @classmethod
    def init(cls, n_in: int, hidden: int, rng: np.random.Generator, forget_bias: float = 1.0) -> "LstmLayerParams":
        Wx = np.concatenate([glorot_uniform(rng, (hidden, n_in), n_in, hidden) for _ in GATES])
        Wh = np.concatenate([glorot_uniform(rng, (hidden, hidden), hidden, hidden) for _ in GATES])
        bx = np.zeros(4 * hidden)
        bx[hidden : 2 * hidden] = forget_bias
        return cls(Wx, Wh, bx, np.zeros(4 * hidden))

    @classmethod
    def zeros(cls, n_in: int, hidden: int) -> "LstmLayerParams":
        return cls(np.zeros((4 * hidden, n_in)), np.zeros((4 * hidden, hidden)), np.zeros(4 * hidden), np.zeros(4 * hidden))

    @property
    def hidden(self) -> int:
        return self.Wh.shape[1]

    @property
    def n_in(self) -> int:
        return self.Wx.shape[1]

    def gate(self, name: str) -> dict[str, np.ndarray]:
        """Views W_i<name>, W_h<name>, b_i<name>, b_h<name> for one gate."""
        H = self.hidden
        k = GATES.index(name)
        sl = slice(k * H, (k + 1) * H)
        return {f"W_i{name}": self.Wx[sl], f"W_h{name}": self.Wh[sl], f"b_i{name}": self.bx[sl], f"b_h{name}": self.bh[sl]}

    def as_dict(self, prefix: str = "") -> Params:
        return {f"{prefix}Wx": self.Wx, f"{prefix}Wh": self.Wh, f"{prefix}bx": self.bx, f"{prefix}bh": self.bh}


def _gates(pre: np.ndarray, H: int):
    i = sigmoid(pre[..., :H])
    f = sigmoid(pre[..., H : 2 * H])
    g = np.tanh(pre[..., 2 * H : 3 * H])
    o = sigmoid(pre[..., 3 * H :])
    return i, f, g, o


def lstm_cell(params: LstmLayerParams, x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
    """One step; returns (h_t, c_t)."""
    h, c, _ = lstm_cell_forward(params, x_t, h_prev, c_prev)
    return h, c


def lstm_cell_forward(params: LstmLayerParams, x_t, h_prev, c_prev):
    if x_t.shape[-1] != params.n_in or h_prev.shape[-1] != params.hidden or c_prev.shape[-1] != params.hidden:
        raise ValueError(
            f"lstm_cell shapes x{x_t.shape} h{h_prev.shape} c{c_prev.shape} "
            f"do not match (in={params.n_in}, hidden={params.hidden})"
        )
    H = params.hidden
    pre = x_t @ params.Wx.T + params.bx + h_prev @ params.Wh.T + params.bh
    i, f, g, o = _gates(pre, H)
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x_t, h_prev, c_prev, i, f, g, o, tc)


def lstm_cell_backward(params: LstmLayerParams, cache, dh: np.ndarray, dc: np.ndarray):
    """Returns (dx, dh_prev, dc_prev, grads) for one cell step."""
    x_t, h_prev, c_prev, i, f, g, o, tc = cache
    dpre, dc_prev = _cell_grads(dh, dc, c_prev, i, f, g, o, tc)
    x2, h2, d2 = np.atleast_2d(x_t), np.atleast_2d(h_prev), np.atleast_2d(dpre)
    grads = {"Wx": d2.T @ x2, "Wh": d2.T @ h2, "bx": d2.sum(0), "bh": d2.sum(0)}
    return dpre @ params.Wx, dpre @ params.Wh, dc_prev, grads


def _cell_grads(dh, dc, c_prev, i, f, g, o, tc):
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc * tc)
    di = dc * g
    dg = dc * i
    df = dc * c_prev
    dpre = np.concatenate(
        [di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)], axis=-1
    )
    return dpre, dc * f


def lstm_layer_forward_reference(params: LstmLayerParams, X: np.ndarray, h0: np.ndarray, c0: np.ndarray):
    """Plain numpy time loop over (B, T, in); returns (B, T, H) hidden states and a cache."""
    B, T, _ = X.shape
    H = params.hidden
    xpre = X @ params.Wx.T + (params.bx + params.bh)
    hs = np.empty((B, T, H))
    cs = np.empty((B, T, H))
    gates = np.empty((B, T, 4, H))
    tcs = np.empty((B, T, H))
    h = np.broadcast_to(h0, (B, H))
    c = np.broadcast_to(c0, (B, H))
    for t in range(T):
        pre = xpre[:, t] + h @ params.Wh.T
        i, f, g, o = _gates(pre, H)
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[:, t], cs[:, t], tcs[:, t] = h, c, tc
        gates[:, t, 0], gates[:, t, 1], gates[:, t, 2], gates[:, t, 3] = i, f, g, o
    return hs, (X, h0, c0, hs, cs, gates, tcs)


def lstm_layer_backward_reference(params: LstmLayerParams, cache, dHs: np.ndarray):
    """BPTT through one layer (plain numpy); returns (dX, grads)."""
    X, h0, c0, hs, cs, gates, tcs = cache
    B, T, H = hs.shape
    dpres = np.empty((B, T, 4 * H))
    dWh = np.zeros_like(params.Wh)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        h_prev = np.broadcast_to(h0, (B, H)) if t == 0 else hs[:, t - 1]
        c_prev = np.broadcast_to(c0, (B, H)) if t == 0 else cs[:, t - 1]
        i, f, g, o = gates[:, t, 0], gates[:, t, 1], gates[:, t, 2], gates[:, t, 3]
        dpre, dc_next = _cell_grads(dHs[:, t] + dh_next, dc_next, c_prev, i, f, g, o, tcs[:, t])
        dWh += dpre.T @ h_prev
        dh_next = dpre @ params.Wh
        dpres[:, t] = dpre
    d2 = dpres.reshape(B * T, 4 * H)
    db = d2.sum(0)
    grads = {"Wx": d2.T @ X.reshape(B * T, -1), "Wh": dWh, "bx": db, "bh": db.copy()}
    return dpres @ params.Wx, grads


def _layer_forward_tm(params: LstmLayerParams, X: np.ndarray, h0: np.ndarray, c0: np.ndarray):
    # X is time-major (T, B, in)
    T, B, _ = X.shape
    H = params.hidden
    xpre = (X.reshape(T * B, -1) @ params.Wx.T + (params.bx + params.bh)).reshape(T, B, 4 * H)
    h0b = np.ascontiguousarray(np.broadcast_to(h0, (B, H)))
    c0b = np.ascontiguousarray(np.broadcast_to(c0, (B, H)))
    hs, cs, gates, tcs = lstm_forward_tm(xpre, np.ascontiguousarray(params.Wh.T), h0b, c0b)
    return hs, (X, h0b, c0b, hs, cs, gates, tcs)


def _layer_backward_tm(params: LstmLayerParams, cache, dHs: np.ndarray):
    X, h0b, c0b, hs, cs, gates, tcs = cache
    T, B, H = hs.shape
    dpres = lstm_backward_tm(np.ascontiguousarray(dHs), np.ascontiguousarray(params.Wh), cs, gates, tcs, c0b)
    d2 = dpres.reshape(T * B, 4 * H)
    h_prev = np.concatenate([h0b[None], hs[:-1]]).reshape(T * B, H)
    db = d2.sum(0)
    grads = {"Wx": d2.T @ X.reshape(T * B, -1), "Wh": d2.T @ h_prev, "bx": db, "bh": db.copy()}
    return (d2 @ params.Wx).reshape(T, B, -1), grads


def lstm_layer_forward(params: LstmLayerParams, X: np.ndarray, h0: np.ndarray, c0: np.ndarray):
    """Run one layer over (B, T, in); returns (B, T, H) hidden states and a cache."""
    hs, cache = _layer_forward_tm(params, np.ascontiguousarray(X.transpose(1, 0, 2)), h0, c0)
    return hs.transpose(1, 0, 2), cache


def lstm_layer_backward(params: LstmLayerParams, cache, dHs: np.ndarray):
    """BPTT through one layer; dHs is (B, T, H). Returns (dX (B, T, in), grads)."""
    dX, grads = _layer_backward_tm(params, cache, dHs.transpose(1, 0, 2))
    return dX.transpose(1, 0, 2), grads


@dataclass
class RnnModel:
    layers: list[LstmLayerParams]
    h0: np.ndarray  # (layers, H)
    c0: np.ndarray  # (layers, H)
    head: DenseLayer
    scaler: dict = field(default_factory=dict)

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int = 3, hidden: int = 128, n_layers: int = 5) -> "RnnModel":
        layers = [LstmLayerParams.init(n_in if k == 0 else hidden, hidden, rng) for k in range(n_layers)]
        h0 = rng.standard_normal((n_layers, hidden))
        c0 = rng.standard_normal((n_layers, hidden))
        return cls(layers, h0, c0, DenseLayer.init(hidden, N_CLASSES, rng))

    @property
    def hidden(self) -> int:
        return self.layers[0].hidden

    def params(self) -> Params:
        p = {}
        for k, layer in enumerate(self.layers):
            p.update(layer.as_dict(f"lstm{k + 1}."))
        p["head.W"] = self.head.W
        p["head.b"] = self.head.b
        return p

    def save(self, path) -> None:
        tensors = dict(self.params(), h0=self.h0, c0=self.c0)
        n_in = self.layers[0].n_in
        save_checkpoint(path, f"lstm-{n_in}-{self.hidden}x{len(self.layers)}", tensors, {"layers": len(self.layers)})

    @classmethod
    def load(cls, path) -> "RnnModel":
        arch, p, meta = load_checkpoint(path)
        if not arch.startswith("lstm-"):
            raise ValueError(f"{path}: not an LSTM checkpoint ({arch})")
        layers = [
            LstmLayerParams(*(p[f"lstm{k + 1}.{n}"] for n in ("Wx", "Wh", "bx", "bh"))) for k in range(meta["layers"])
        ]
        return cls(layers, p["h0"], p["c0"], DenseLayer(p["head.W"], p["head.b"]))


def _check_input(model: RnnModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != model.layers[0].n_in:
        raise ValueError(f"RNN expects input (B, T, {model.layers[0].n_in}), got {x.shape}")
    return x


def _forward(model: RnnModel, x: np.ndarray):
    # layers run time-major, (T, B, ·)
    caches = []
    h = np.ascontiguousarray(x.transpose(1, 0, 2))
    for k, layer in enumerate(model.layers):
        h, cache = _layer_forward_tm(layer, h, model.h0[k], model.c0[k])
        caches.append(cache)
    last = h[-1]
    return dense_forward(model.head, last), (caches, last)


def rnn_forward(model: RnnModel, x: np.ndarray) -> np.ndarray:
    """Logits from the top layer's final hidden state; x is (T, 3) or (B, T, 3)."""
    single = np.ndim(x) == 2
    logits, _ = _forward(model, _check_input(model, x))
    return logits[0] if single else logits


def rnn_loss_and_grads(model: RnnModel, x: np.ndarray, y: np.ndarray) -> tuple[float, Params, np.ndarray]:
    x = _check_input(model, x)
    logits, (caches, last) = _forward(model, x)
    loss, g = softmax_cross_entropy(logits, y)
    grads: Params = {}
    g_last, grads["head.W"], grads["head.b"] = dense_backward(model.head, last, g)
    T, B, H = caches[-1][3].shape
    dH = np.zeros((T, B, H))
    dH[-1] = g_last
    for k in range(len(model.layers) - 1, -1, -1):
        dH, lg = _layer_backward_tm(model.layers[k], caches[k], dH)
        for name, v in lg.items():
            grads[f"lstm{k + 1}.{name}"] = v
    return loss, grads, logits


def rnn_predict(model: RnnModel, x: np.ndarray, batch: int = 500) -> np.ndarray:
    x = _check_input(model, x)
    return np.concatenate(
        [np.argmax(_forward(model, x[s : s + batch])[0], axis=1) for s in range(0, len(x), batch)]
    )


def rnn_train(
    x: np.ndarray,
    y: np.ndarray,
    cfg: RnnConfig | None = None,
    seed: int = 0,
    dev: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[RnnModel, list[dict]]:
    """Train on (B, T, 3) time-major inputs; returns (model, curves)."""
    cfg = cfg or RnnConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(seed)
    model = RnnModel.init(rng, n_in=x.shape[2], hidden=cfg.hidden, n_layers=cfg.layers)
    curves = minibatch_adam(
        model.params(),
        lambda bx, by: rnn_loss_and_grads(model, bx, by),
        x,
        y,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        rng=rng,
        predict=lambda dx: rnn_predict(model, dx),
        dev=dev,
        name="rnn",
    )
    return model, curves
