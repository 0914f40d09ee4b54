"""Label-preserving augmentation of resampled traces: jitter, rotation, stretch.

Yaw/pitch/roll use the intrinsic Z-Y-X convention, R = Rz(yaw) @ Ry(pitch) @ Rx(roll).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .preprocess import ResampledSequence

# cos(pitch) below this is treated as gimbal lock (|pitch| within 1e-6 deg of 90)
_GIMBAL_COS = math.sin(math.radians(1e-6))


@dataclass
class AugmentConfig:
    noise_sigma: float = 0.5
    max_rotation_deg: float = 5.0
    stretch_low: float = 0.9
    stretch_high: float = 1.1
    copies_per_sequence: int = 4
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= self.max_rotation_deg <= 180:
            raise ValueError("max_rotation_deg must lie in [0, 180]")
        if not 0 < self.stretch_low <= self.stretch_high:
            raise ValueError("need 0 < stretch_low <= stretch_high")
        if int(self.copies_per_sequence) != self.copies_per_sequence or self.copies_per_sequence < 0:
            raise ValueError("copies_per_sequence must be a non-negative integer")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class UnitQuaternion:
    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = self.w**2 + self.x**2 + self.y**2 + self.z**2
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion is not unit (norm^2 = {n})")

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, angle_deg: float) -> "UnitQuaternion":
        axis = np.asarray(axis, dtype=np.float64)
        norm = np.linalg.norm(axis)
        if norm == 0:
            return cls.identity()
        axis = axis / norm
        half = math.radians(angle_deg) / 2
        s = math.sin(half)
        return cls.normalized(math.cos(half), *(s * axis))

    @classmethod
    def normalized(cls, w, x, y, z) -> "UnitQuaternion":
        n = math.sqrt(w * w + x * x + y * y + z * z)
        return cls(float(w / n), float(x / n), float(y / n), float(z / n))

    def inverse(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, o: "UnitQuaternion") -> "UnitQuaternion":
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = o.w, o.x, o.y, o.z
        return UnitQuaternion.normalized(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def angle_deg(self) -> float:
        return math.degrees(2 * math.atan2(math.sqrt(self.x**2 + self.y**2 + self.z**2), abs(self.w)))

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )


def euler_to_matrix(ypr_deg: np.ndarray) -> np.ndarray:
    """(..., 3) yaw/pitch/roll in degrees -> (..., 3, 3) rotation matrices."""
    a = np.radians(np.asarray(ypr_deg, dtype=np.float64))
    cy, sy = np.cos(a[..., 0]), np.sin(a[..., 0])
    cp, sp = np.cos(a[..., 1]), np.sin(a[..., 1])
    cr, sr = np.cos(a[..., 2]), np.sin(a[..., 2])
    R = np.empty(a.shape[:-1] + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def matrix_to_euler(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`euler_to_matrix`.

    At gimbal lock roll is pinned to 0 and the whole heading goes to yaw.
    """
    R = np.asarray(R, dtype=np.float64)
    pitch = np.arcsin(np.clip(-R[..., 2, 0], -1.0, 1.0))
    cp = np.hypot(R[..., 0, 0], R[..., 1, 0])
    locked = cp < _GIMBAL_COS
    yaw = np.where(locked, np.arctan2(-R[..., 0, 1], R[..., 1, 1]), np.arctan2(R[..., 1, 0], R[..., 0, 0]))
    roll = np.where(locked, 0.0, np.arctan2(R[..., 2, 1], R[..., 2, 2]))
    return np.degrees(np.stack([yaw, pitch, roll], axis=-1))


def _wrap180(a: np.ndarray) -> np.ndarray:
    return (a + 180.0) % 360.0 - 180.0


def rotate_values(values: np.ndarray, q: UnitQuaternion) -> np.ndarray:
    """Left-compose every row's orientation with ``q``.

    Yaw and roll are unwrapped to the branch nearest the input so small
    rotations give small angle changes even for traces outside (-180, 180].
    """
    values = np.asarray(values, dtype=np.float64)
    out = matrix_to_euler(q.to_matrix() @ euler_to_matrix(values))
    for k in (0, 2):
        out[:, k] = values[:, k] + _wrap180(out[:, k] - values[:, k])
    return out


def jitter(r: ResampledSequence, sigma: float, rng: np.random.Generator) -> ResampledSequence:
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return r.with_values(r.values)
    return r.with_values(r.values + rng.normal(0.0, sigma, size=r.values.shape))


def rotate(r: ResampledSequence, q: UnitQuaternion) -> ResampledSequence:
    return r.with_values(rotate_values(r.values, q))


def stretch(r: ResampledSequence, sy: float, sp: float, sr: float) -> ResampledSequence:
    scale = np.array([sy, sp, sr], dtype=np.float64)
    if np.any(scale <= 0):
        raise ValueError("stretch factors must be positive")
    return r.with_values(r.values * scale)


def random_quaternion(rng: np.random.Generator, max_angle_deg: float) -> UnitQuaternion:
    """Uniform random axis, angle uniform in [0, max_angle_deg]."""
    axis = rng.normal(size=3)
    while np.linalg.norm(axis) < 1e-12:
        axis = rng.normal(size=3)
    return UnitQuaternion.from_axis_angle(axis, rng.uniform(0.0, max_angle_deg))


def augment_row(r: ResampledSequence, cfg: AugmentConfig, rng: np.random.Generator, copy_id: str) -> ResampledSequence:
    """One augmented copy: stretch, then rotate, then jitter."""
    s = rng.uniform(cfg.stretch_low, cfg.stretch_high, size=3)
    q = random_quaternion(rng, cfg.max_rotation_deg)
    out = jitter(rotate(stretch(r, *s), q), cfg.noise_sigma, rng)
    return out.with_values(out.values, sequence_id=copy_id)


def augment_dataset(rows: list[ResampledSequence], cfg: AugmentConfig) -> list[ResampledSequence]:
    """Originals followed by ``copies_per_sequence`` copies of each original.

    Copy k of row i draws from its own generator seeded with (seed, i, k), so
    the result does not depend on evaluation order.
    """
    cfg.validate()
    out = list(rows)
    for i, r in enumerate(rows):
        for k in range(cfg.copies_per_sequence):
            rng = np.random.default_rng([cfg.seed & 0xFFFFFFFFFFFFFFFF, i, k])
            out.append(augment_row(r, cfg, rng, f"{r.sequence_id}#aug{k}"))
    return out


def base_id(sequence_id: str) -> str:
    """Strip the augmentation suffix from a row id."""
    return sequence_id.split("#aug", 1)[0]
