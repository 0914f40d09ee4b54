"""Per-channel fully connected denoising autoencoder (N -> 128 -> 64 -> 128 -> N)."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .nn_core import (
    AdamState,
    DenseLayer,
    Params,
    adam_step,
    dense_backward,
    dense_forward,
    load_checkpoint,
    relu,
    relu_backward,
    save_checkpoint,
)
from .preprocess import ResampledSequence

log = logging.getLogger(__name__)

HIDDEN = 128
CODE = 64
CHANNELS = ("yaw", "pitch", "roll")


@dataclass
class AeConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Autoencoder:
    enc1: DenseLayer
    enc2: DenseLayer
    dec1: DenseLayer
    dec2: DenseLayer
    activation: str = "relu"
    # input standardization, applied before encoding and undone after decoding
    mean: float = 0.0
    std: float = 1.0

    @classmethod
    def init(cls, n: int, rng: np.random.Generator, hidden: int = HIDDEN, code: int = CODE) -> "Autoencoder":
        return cls(
            DenseLayer.init(n, hidden, rng),
            DenseLayer.init(hidden, code, rng),
            DenseLayer.init(code, hidden, rng),
            DenseLayer.init(hidden, n, rng),
        )

    @property
    def n(self) -> int:
        return self.enc1.n_in

    def params(self) -> Params:
        out = {}
        for name in ("enc1", "enc2", "dec1", "dec2"):
            layer = getattr(self, name)
            out[f"{name}.W"] = layer.W
            out[f"{name}.b"] = layer.b
        return out

    def save(self, path: str | Path) -> None:
        save_checkpoint(
            path,
            f"ae-{self.n}-{self.enc1.n_out}-{self.enc2.n_out}",
            self.params(),
            {"activation": self.activation, "mean": self.mean, "std": self.std},
        )

    @classmethod
    def load(cls, path: str | Path) -> "Autoencoder":
        arch, p, meta = load_checkpoint(path)
        if not arch.startswith("ae-"):
            raise ValueError(f"{path}: not an autoencoder checkpoint ({arch})")
        layers = [DenseLayer(p[f"{n}.W"], p[f"{n}.b"]) for n in ("enc1", "enc2", "dec1", "dec2")]
        return cls(*layers, activation=meta.get("activation", "relu"), mean=meta["mean"], std=meta["std"])


def _forward(ae: Autoencoder, z: np.ndarray):
    """Forward on standardized input, keeping the activations for backward."""
    a1 = dense_forward(ae.enc1, z)
    h1 = relu(a1)
    code = dense_forward(ae.enc2, h1)
    hc = relu(code)
    a3 = dense_forward(ae.dec1, hc)
    h3 = relu(a3)
    recon = dense_forward(ae.dec2, h3)
    return code, recon, (z, a1, h1, code, hc, a3, h3)


def ae_forward(ae: Autoencoder, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns (code, reconstruction) in the input's units."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != ae.n:
        raise ValueError(f"autoencoder expects width {ae.n}, got {x.shape[-1]}")
    code, recon, _ = _forward(ae, (x - ae.mean) / ae.std)
    return code, recon * ae.std + ae.mean


def ae_loss_and_grads(ae: Autoencoder, z: np.ndarray) -> tuple[float, Params]:
    """Mean over the batch of the per-row MSE, on standardized rows ``z``."""
    z2 = np.atleast_2d(z)
    B, N = z2.shape
    _, recon, (z_, a1, h1, code, hc, a3, h3) = _forward(ae, z2)
    diff = recon - z2
    loss = float(np.mean(diff**2))
    g = 2.0 * diff / (B * N)
    grads = {}
    g, grads["dec2.W"], grads["dec2.b"] = dense_backward(ae.dec2, h3, g)
    g = relu_backward(a3, g)
    g, grads["dec1.W"], grads["dec1.b"] = dense_backward(ae.dec1, hc, g)
    g = relu_backward(code, g)
    g, grads["enc2.W"], grads["enc2.b"] = dense_backward(ae.enc2, h1, g)
    g = relu_backward(a1, g)
    _, grads["enc1.W"], grads["enc1.b"] = dense_backward(ae.enc1, z_, g)
    return loss, grads


def train_autoencoder(
    rows: np.ndarray,
    epochs: int = 100,
    batch_size: int = 64,
    learning_rate: float = 1e-3,
    seed: int = 0,
) -> tuple[Autoencoder, list[float]]:
    """Fit one channel's autoencoder; returns the model and per-epoch mean training MSE.

    Losses are measured on standardized rows.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or len(rows) == 0:
        raise ValueError("train_autoencoder needs a non-empty (rows, N) array")
    rng = np.random.default_rng(seed)
    ae = Autoencoder.init(rows.shape[1], rng)
    ae.mean = float(rows.mean())
    ae.std = float(rows.std()) or 1.0
    z = (rows - ae.mean) / ae.std
    params = ae.params()
    opt = AdamState(learning_rate=learning_rate)
    curve = []
    for _ in range(epochs):
        order = rng.permutation(len(z))
        total = 0.0
        for start in range(0, len(z), batch_size):
            batch = z[order[start : start + batch_size]]
            loss, grads = ae_loss_and_grads(ae, batch)
            adam_step(opt, params, grads)
            total += loss * len(batch)
        curve.append(total / len(z))
    return ae, curve


@dataclass
class ChannelAutoencoders:
    """One trained autoencoder per rotation channel."""

    yaw: Autoencoder
    pitch: Autoencoder
    roll: Autoencoder
    curves: dict[str, list[float]] = field(default_factory=dict)

    def models(self) -> tuple[Autoencoder, Autoencoder, Autoencoder]:
        return (self.yaw, self.pitch, self.roll)

    def save(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = [directory / f"ae_{name}.bin" for name in CHANNELS]
        for path, ae in zip(paths, self.models()):
            ae.save(path)
        return paths

    @classmethod
    def load(cls, directory: str | Path) -> "ChannelAutoencoders":
        directory = Path(directory)
        return cls(*(Autoencoder.load(directory / f"ae_{name}.bin") for name in CHANNELS))


def fit_channel_autoencoders(rows: list[ResampledSequence], cfg: AeConfig, seed: int = 0) -> ChannelAutoencoders:
    if not rows:
        raise ValueError("cannot fit autoencoders on an empty partition")
    x = np.stack([r.values for r in rows])
    models, curves = [], {}
    for k, name in enumerate(CHANNELS):
        ae, curve = train_autoencoder(x[:, :, k], cfg.epochs, cfg.batch_size, cfg.learning_rate, seed=seed * 3 + k)
        log.info("autoencoder %s: final MSE %.4g", name, curve[-1] if curve else float("nan"))
        models.append(ae)
        curves[name] = curve
    return ChannelAutoencoders(*models, curves=curves)


def denoise_dataset(
    rows: list[ResampledSequence], ae_y: Autoencoder, ae_p: Autoencoder, ae_r: Autoencoder
) -> list[ResampledSequence]:
    """Replace each channel of every row with its autoencoder reconstruction."""
    if not rows:
        return []
    x = np.stack([r.values for r in rows])
    n = x.shape[1]
    for ae in (ae_y, ae_p, ae_r):
        if ae.n != n:
            raise ValueError(f"autoencoder width {ae.n} != resampled length {n}")
    out = np.empty_like(x)
    for k, ae in enumerate((ae_y, ae_p, ae_r)):
        _, out[:, :, k] = ae_forward(ae, x[:, :, k])
    return [r.with_values(v) for r, v in zip(rows, out)]
