"""Deterministic synthetic pen-motion datasets in the standard directory layout.

Each letter gets a smooth procedural orientation trace. Each subject writes it
with its own speed, per-channel scale, grip orientation, small letter-specific
style deformation, sampling rate and sensor noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .augment import UnitQuaternion, matrix_to_euler, random_quaternion, rotate_values
from .sensor_data import LETTERS, CalibrationRecord, Dataset, Frame, Label, Sequence

N_WAYPOINTS = 12
MAX_ABS_DEG = 45.0
BASE_DURATION_MS = 1200.0
# minimum RMS per-point difference between two letters' zero-origin traces, degrees
TEMPLATE_MARGIN_DEG = 4.0
AMPLITUDE_DEG = (2.0, 8.0)


@dataclass(frozen=True)
class LetterTemplate:
    label: Label
    waypoints: np.ndarray  # (n_waypoints, 3) degrees

    def curve(self, u: np.ndarray, waypoints: np.ndarray | None = None) -> np.ndarray:
        """Evaluate the cubic spline through the waypoints at u in [0, 1]."""
        wp = self.waypoints if waypoints is None else waypoints
        knots = np.linspace(0.0, 1.0, len(wp))
        return CubicSpline(knots, wp, axis=0, bc_type="natural")(np.asarray(u, dtype=np.float64))


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: str
    speed: float
    scale: tuple[float, float, float]
    offset: UnitQuaternion
    noise_deg: float
    period_ms: float
    period_jitter_ms: float
    style_deg: float = 0.0
    rep_variability_deg: float = 0.0
    style_seed: int = 0
    rep_warp: float = 0.0

    def __post_init__(self):
        if not 0.5 <= self.speed <= 2.0:
            raise ValueError("speed must lie in [0.5, 2.0]")
        if not 5.0 <= self.period_ms <= 30.0:
            raise ValueError("sample period mean must lie in [5, 30] ms")

    @classmethod
    def identity(cls, subject_id: str = "subject_00", period_ms: float = 15.0) -> "SubjectProfile":
        return cls(subject_id, 1.0, (1.0, 1.0, 1.0), UnitQuaternion.identity(), 0.0, period_ms, 0.0)

    def calibration(self, rng: np.random.Generator | None = None) -> CalibrationRecord:
        """Mean upright-hold reading: the grip orientation plus a little hold noise."""
        ypr = matrix_to_euler(self.offset.to_matrix())
        if rng is not None:
            ypr = ypr + rng.normal(0.0, 0.05, size=3)
        return CalibrationRecord(self.subject_id, *(float(v) for v in ypr))


def _random_waypoints(rng: np.random.Generator) -> np.ndarray:
    u = np.linspace(0.0, 1.0, N_WAYPOINTS)
    wp = np.zeros((N_WAYPOINTS, 3))
    for ch in range(3):
        for _ in range(rng.integers(2, 5)):
            amp = rng.uniform(*AMPLITUDE_DEG)
            freq = rng.uniform(0.5, 2.0)
            phase = rng.uniform(0.0, 2 * math.pi)
            wp[:, ch] += amp * np.sin(2 * math.pi * freq * u + phase)
    peak = np.abs(wp).max()
    if peak > MAX_ABS_DEG:
        wp *= MAX_ABS_DEG / peak
    return wp


def _trace_signature(t: LetterTemplate, n: int = 100) -> np.ndarray:
    c = t.curve(np.linspace(0.0, 1.0, n))
    return c - c[0]


def _rms_gap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def make_templates(seed: int = 0, margin_deg: float = TEMPLATE_MARGIN_DEG) -> list[LetterTemplate]:
    """26 letter templates whose zero-origin traces differ pairwise by at least ``margin_deg`` RMS."""
    rng = np.random.default_rng([seed, 0])
    templates: list[LetterTemplate] = []
    sigs: list[np.ndarray] = []
    for idx, letter in enumerate(LETTERS):
        while True:
            t = LetterTemplate(Label(letter, idx), _random_waypoints(rng))
            sig = _trace_signature(t)
            if all(_rms_gap(sig, s) >= margin_deg for s in sigs):
                break
        templates.append(t)
        sigs.append(sig)
    return templates


def random_profile(subject_id: str, rng: np.random.Generator) -> SubjectProfile:
    grip = (
        UnitQuaternion.from_axis_angle((0, 0, 1), rng.uniform(-180.0, 180.0))
        * UnitQuaternion.from_axis_angle((0, 1, 0), rng.uniform(-25.0, 25.0))
        * UnitQuaternion.from_axis_angle((1, 0, 0), rng.uniform(-25.0, 25.0))
    )
    return SubjectProfile(
        subject_id=subject_id,
        speed=float(rng.uniform(0.7, 1.5)),
        scale=tuple(float(s) for s in rng.uniform(1 / 1.4, 1.4, size=3)),
        offset=grip * random_quaternion(rng, 10.0),
        noise_deg=float(rng.uniform(2.0, 6.0)),
        period_ms=float(rng.uniform(8.0, 25.0)),
        period_jitter_ms=float(rng.uniform(0.0, 5.0)),
        style_deg=7.0,
        rep_variability_deg=5.0,
        style_seed=int(rng.integers(0, 2**31)),
        rep_warp=0.2,
    )


def sample_times(duration_ms: float, period_ms: float, jitter_ms: float, rng: np.random.Generator) -> np.ndarray:
    """Integer sample times from 0 up to ``duration_ms`` with jittered spacing."""
    times = [0]
    while True:
        step = max(1, int(round(period_ms + (rng.uniform(-jitter_ms, jitter_ms) if jitter_ms else 0.0))))
        if times[-1] + step > duration_ms:
            break
        times.append(times[-1] + step)
    return np.array(times, dtype=np.int64)


def gen_sequence(
    template: LetterTemplate,
    profile: SubjectProfile,
    rng: np.random.Generator,
    sequence_id: str = "seq",
) -> Sequence:
    wp = template.waypoints
    if profile.style_deg:
        style_rng = np.random.default_rng([profile.style_seed, template.label.index])
        wp = wp + style_rng.normal(0.0, profile.style_deg, size=wp.shape)
    if profile.rep_variability_deg:
        wp = wp + rng.normal(0.0, profile.rep_variability_deg, size=wp.shape)
    duration = BASE_DURATION_MS / profile.speed
    times = sample_times(duration, profile.period_ms, profile.period_jitter_ms, rng)
    u = times / duration
    if profile.rep_warp:
        # monotone time warp u + a sin(pi u), |a| < 1/pi
        a = float(np.clip(rng.normal(0.0, profile.rep_warp), -0.3, 0.3))
        u = u + a * np.sin(np.pi * u)
    rot = template.curve(u, wp) * np.asarray(profile.scale)
    rot = rotate_values(rot, profile.offset)
    if profile.noise_deg:
        rot = rot + rng.normal(0.0, profile.noise_deg, size=rot.shape)
    accel = np.round(np.array([0.0, 0.0, 1000.0]) + rng.normal(0.0, 15.0, size=(len(times), 3)), 1)
    td = np.diff(times, prepend=0)
    td[0] = max(1, int(round(profile.period_ms)))
    frames = tuple(
        Frame(int(td[i]), float(rot[i, 0]), float(rot[i, 1]), float(rot[i, 2]), *(float(a) for a in accel[i]))
        for i in range(len(times))
    )
    return Sequence(frames, template.label, profile.subject_id, sequence_id)


def gen_dataset(n_subjects: int = 8, reps_per_letter: int = 20, seed: int = 0) -> Dataset:
    """``n_subjects`` x 26 x ``reps_per_letter`` sequences plus per-subject calibration."""
    if n_subjects < 1 or reps_per_letter < 1:
        raise ValueError("need at least one subject and one repetition")
    templates = make_templates(seed)
    ds = Dataset()
    for s in range(n_subjects):
        subject_id = f"subject_{s + 1:02d}"
        profile = random_profile(subject_id, np.random.default_rng([seed, 1, s]))
        ds.calibrations[subject_id] = profile.calibration(np.random.default_rng([seed, 3, s]))
        for t in templates:
            for rep in range(reps_per_letter):
                rng = np.random.default_rng([seed, 2, s, t.label.index, rep])
                seq_id = f"s{s + 1:02d}_{t.label.letter}_{rep:02d}"
                ds.sequences.append(gen_sequence(t, profile, rng, seq_id))
    return ds
