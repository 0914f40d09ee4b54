"""Small float64 neural-network toolkit with explicit backward passes.

Arrays are plain numpy float64 arrays. Layers hold parameters only; every
forward function has a matching ``*_backward`` that returns exact gradients.
Batched inputs put the batch axis first.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

Params = dict[str, np.ndarray]


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------- dense

@dataclass
class DenseLayer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "DenseLayer":
        return cls(glorot_uniform(rng, (n_out, n_in), n_in, n_out), np.zeros(n_out))

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    if x.shape[-1] != layer.n_in:
        raise ValueError(f"dense input width {x.shape[-1]} != {layer.n_in}")
    return x @ layer.W.T + layer.b


def dense_backward(layer: DenseLayer, x: np.ndarray, grad_out: np.ndarray):
    """Returns (grad_x, grad_W, grad_b)."""
    if grad_out.shape[-1] != layer.n_out:
        raise ValueError(f"dense grad width {grad_out.shape[-1]} != {layer.n_out}")
    grad_x = grad_out @ layer.W
    x2 = x.reshape(-1, layer.n_in)
    g2 = grad_out.reshape(-1, layer.n_out)
    return grad_x, g2.T @ x2, g2.sum(axis=0)


# ---------------------------------------------------------------- conv1d

@dataclass
class Conv1dLayer:
    """Kernel width 3, stride 1, zero padding 1 (length preserving)."""

    kernels: np.ndarray  # (out_ch, in_ch, 3)
    bias: np.ndarray  # (out_ch,)

    @classmethod
    def init(cls, in_ch: int, out_ch: int, rng: np.random.Generator) -> "Conv1dLayer":
        k = glorot_uniform(rng, (out_ch, in_ch, 3), in_ch * 3, out_ch * 3)
        return cls(k, np.zeros(out_ch))

    @property
    def in_ch(self) -> int:
        return self.kernels.shape[1]

    @property
    def out_ch(self) -> int:
        return self.kernels.shape[0]


def _as_batch(x: np.ndarray, ndim: int) -> tuple[np.ndarray, bool]:
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise ValueError(f"expected {ndim - 1}- or {ndim}-d input, got shape {x.shape}")
    return x, False


def _shifted_cols(x: np.ndarray) -> np.ndarray:
    # (B, L, C) -> (B, L, 3C); position l holds [x[l-1], x[l], x[l+1]] with zero padding
    B, L, C = x.shape
    cols = np.zeros((B, L, 3 * C))
    cols[:, 1:, :C] = x[:, :-1]
    cols[:, :, C : 2 * C] = x
    cols[:, :-1, 2 * C :] = x[:, 1:]
    return cols


def _tap_major(kernels: np.ndarray) -> np.ndarray:
    # (out, in, 3) -> (out, 3*in) matching the column order of _shifted_cols
    return kernels.transpose(0, 2, 1).reshape(kernels.shape[0], -1)


def conv1d_forward_cl(layer: Conv1dLayer, x: np.ndarray) -> np.ndarray:
    """Channels-last convolution: (B, L, in_ch) -> (B, L, out_ch)."""
    if x.ndim != 3 or x.shape[2] != layer.in_ch or x.shape[1] < 1:
        raise ValueError(f"conv1d input shape {x.shape} incompatible with in_ch={layer.in_ch}")
    return _shifted_cols(x) @ _tap_major(layer.kernels).T + layer.bias


def conv1d_backward_cl(layer: Conv1dLayer, x: np.ndarray, grad_out: np.ndarray):
    """Channels-last backward; returns (grad_x, grad_kernels, grad_bias)."""
    B, L, C = x.shape
    if grad_out.shape != (B, L, layer.out_ch):
        raise ValueError(f"conv1d grad shape {grad_out.shape} does not match output")
    g2 = grad_out.reshape(B * L, layer.out_ch)
    cols = _shifted_cols(x).reshape(B * L, 3 * C)
    grad_W = (g2.T @ cols).reshape(layer.out_ch, 3, C).transpose(0, 2, 1)
    gcols = (g2 @ _tap_major(layer.kernels)).reshape(B, L, 3 * C)
    grad_x = gcols[:, :, C : 2 * C].copy()
    grad_x[:, :-1] += gcols[:, 1:, :C]
    grad_x[:, 1:] += gcols[:, :-1, 2 * C :]
    return grad_x, np.ascontiguousarray(grad_W), g2.sum(axis=0)


def conv1d_forward(layer: Conv1dLayer, x: np.ndarray) -> np.ndarray:
    """(in_ch, L) or (B, in_ch, L) -> same layout with out_ch channels."""
    xb, single = _as_batch(x, 3)
    if xb.shape[1] != layer.in_ch:
        raise ValueError(f"conv1d input shape {x.shape} incompatible with in_ch={layer.in_ch}")
    out = conv1d_forward_cl(layer, xb.transpose(0, 2, 1)).transpose(0, 2, 1)
    return out[0] if single else out


def conv1d_backward(layer: Conv1dLayer, x: np.ndarray, grad_out: np.ndarray):
    """Returns (grad_x, grad_kernels, grad_bias) for the channel-major layout."""
    xb, single = _as_batch(x, 3)
    gb, _ = _as_batch(grad_out, 3)
    if gb.shape != (xb.shape[0], layer.out_ch, xb.shape[2]):
        raise ValueError(f"conv1d grad shape {grad_out.shape} does not match output")
    gx, gW, gbias = conv1d_backward_cl(layer, xb.transpose(0, 2, 1), gb.transpose(0, 2, 1))
    gx = gx.transpose(0, 2, 1)
    return (gx[0] if single else gx), gW, gbias


# ---------------------------------------------------------------- pooling

def maxpool1d(x: np.ndarray, axis: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Window 2, stride 1, one zero appended after the last element so length is kept.

    Returns (out, took_right); ties keep the earlier index.
    """
    xm = np.moveaxis(x, axis, -1)
    right = np.zeros_like(xm)
    right[..., :-1] = xm[..., 1:]
    took_right = right > xm
    out = np.where(took_right, right, xm)
    return np.moveaxis(out, -1, axis), np.moveaxis(took_right, -1, axis)


def maxpool1d_backward(grad_out: np.ndarray, took_right: np.ndarray, axis: int = -1) -> np.ndarray:
    g = np.moveaxis(grad_out, axis, -1)
    t = np.moveaxis(took_right, axis, -1)
    moved = g * t
    grad_x = g - moved
    # output i drew from input i+1; the padding slot has no input
    grad_x[..., 1:] += moved[..., :-1]
    return np.moveaxis(grad_x, -1, axis)


# ---------------------------------------------------------------- activations

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def sigmoid_backward(y: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """``y`` is the forward output."""
    return grad_out * y * (1.0 - y)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(y: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """``y`` is the forward output."""
    return grad_out * (1.0 - y * y)


# ---------------------------------------------------------------- losses

def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def softmax_cross_entropy(logits: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Cross-entropy summed over the batch.

    ``target`` is either one-hot with the shape of ``logits`` or integer class
    indices. Returns (loss, grad_logits) with grad = softmax(logits) - onehot.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if target.shape != logits.shape:
        onehot = np.zeros_like(logits)
        idx = np.asarray(target, dtype=np.int64)
        if logits.ndim == 1:
            onehot[int(idx)] = 1.0
        else:
            onehot[np.arange(len(idx)), idx] = 1.0
        target = onehot
    logp = log_softmax(logits)
    loss = float(-(target * logp).sum())
    return loss, np.exp(logp) - target


def l2_penalty(weights: Mapping[str, np.ndarray] | list[np.ndarray], lam: float):
    """lam * sum ||W||^2 over the given weight tensors (callers leave biases out).

    Returns (loss, grads) with grads matching the container type of ``weights``.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    items = weights.items() if isinstance(weights, Mapping) else enumerate(weights)
    loss = 0.0
    grads = {}
    for k, w in items:
        loss += lam * float(np.sum(w * w))
        grads[k] = 2.0 * lam * w
    if isinstance(weights, Mapping):
        return loss, grads
    return loss, [grads[i] for i in range(len(weights))]


def mse_loss(x: np.ndarray, xhat: np.ndarray) -> float:
    x, xhat = np.asarray(x, dtype=np.float64), np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise ValueError(f"mse_loss shape mismatch {x.shape} vs {xhat.shape}")
    return float(np.mean((x - xhat) ** 2))


# ---------------------------------------------------------------- Adam

@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")


def adam_step(state: AdamState, params: Params, grads: Mapping[str, np.ndarray]) -> Params:
    """Bias-corrected Adam update of ``params`` in place; returns ``params``."""
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape {g.shape} != parameter {name!r} shape {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for name, g in grads.items():
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return params


# ---------------------------------------------------------------- gradient check

def grad_check(
    loss_fn: Callable[[Params], tuple[float, Mapping[str, np.ndarray]]],
    params: Params,
    eps: float = 1e-5,
    n_samples: int | None = 20,
    seed: int = 0,
    names: list[str] | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(params)`` returns (loss, grads). Up to ``n_samples`` coordinates
    per tensor are probed (all of them when None). Error per coordinate is
    ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    _, grads = loss_fn(params)
    grads = {k: np.array(v, copy=True) for k, v in grads.items()}
    worst = 0.0
    for name in names or list(params):
        p = params[name]
        flat = p.reshape(-1)
        if n_samples is None or n_samples >= flat.size:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, size=n_samples, replace=False)
        ga = grads[name].reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            fp, _ = loss_fn(params)
            flat[i] = orig - eps
            fm, _ = loss_fn(params)
            flat[i] = orig
            num = (fp - fm) / (2 * eps)
            a = ga[i]
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------- checkpoints

MAGIC = b"INKMOTN1"


def save_checkpoint(path: str | Path, arch: str, params: Mapping[str, np.ndarray], meta: dict | None = None) -> None:
    """Binary layout: magic, tag, shape table, little-endian f64 data; JSON sidecar at ``path + '.json'``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tag = arch.encode()
    header = [MAGIC, struct.pack("<I", len(tag)), tag, struct.pack("<I", len(params))]
    for name, arr in params.items():
        nb = name.encode()
        header += [struct.pack("<I", len(nb)), nb, struct.pack("<I", arr.ndim)]
        header += [struct.pack("<I", d) for d in arr.shape]
    with path.open("wb") as fh:
        fh.write(b"".join(header))
        for arr in params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    sidecar = {"arch": arch, **(meta or {})}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[str, Params, dict]:
    path = Path(path)
    buf = path.read_bytes()
    if buf[:8] != MAGIC:
        raise ValueError(f"{path} is not an inkmotion checkpoint")
    pos = 8

    def u32():
        nonlocal pos
        (v,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        return v

    n = u32()
    arch = buf[pos : pos + n].decode()
    pos += n
    table = []
    for _ in range(u32()):
        n = u32()
        name = buf[pos : pos + n].decode()
        pos += n
        shape = tuple(u32() for _ in range(u32()))
        table.append((name, shape))
    params = {}
    for name, shape in table:
        count = int(np.prod(shape)) if shape else 1
        params[name] = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * count
    sidecar = Path(str(path) + ".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return arch, params, meta
