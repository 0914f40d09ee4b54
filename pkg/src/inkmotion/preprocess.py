"""Calibration, zero-origin normalization and fixed-length resampling."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .sensor_data import CalibrationRecord, Dataset, Label, Sequence, timestamps

DEFAULT_N = 100


@dataclass(frozen=True, eq=False)
class ResampledSequence:
    """Fixed-length (N, 3) yaw/pitch/roll trace, the classifier input."""

    values: np.ndarray
    label: Label
    subject_id: str
    sequence_id: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"values must be (N, 3), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite resampled values in {self.sequence_id!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_features(self) -> int:
        return self.values.shape[0]

    def with_values(self, values: np.ndarray, sequence_id: str | None = None) -> "ResampledSequence":
        return replace(
            self,
            values=values,
            sequence_id=self.sequence_id if sequence_id is None else sequence_id,
        )

    def __eq__(self, other):
        if not isinstance(other, ResampledSequence):
            return NotImplemented
        return (
            self.label == other.label
            and self.subject_id == other.subject_id
            and self.sequence_id == other.sequence_id
            and np.array_equal(self.values, other.values)
        )


def calibrate(seq: Sequence, cal: CalibrationRecord) -> Sequence:
    if cal.subject_id != seq.subject_id:
        raise ValueError(
            f"calibration subject {cal.subject_id!r} does not match sequence subject {seq.subject_id!r}"
        )
    return seq.with_rotations(seq.rotations() - np.asarray(cal.means))


def zero_origin(seq: Sequence) -> Sequence:
    rot = seq.rotations()
    return seq.with_rotations(rot - rot[0])


def collapse_duplicates(t: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Keep the last sample at each repeated timestamp. ``t`` must be non-decreasing."""
    t = np.asarray(t)
    keep = np.ones(len(t), dtype=bool)
    keep[:-1] = t[1:] != t[:-1]
    return t[keep], values[keep]


def resample(seq: Sequence, n: int = DEFAULT_N) -> ResampledSequence:
    """Linearly interpolate each rotation channel onto ``n`` evenly spaced timestamps.

    The grid spans the first and last original timestamps inclusive. ``td`` only
    contributes through the time axis.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 resampled points, got {n}")
    t, rot = collapse_duplicates(timestamps(seq).astype(np.float64), seq.rotations())
    if len(t) < 2:
        raise ValueError(f"sequence {seq.sequence_id!r} has fewer than 2 distinct timestamps")
    grid = np.linspace(t[0], t[-1], n)
    out = np.column_stack([np.interp(grid, t, rot[:, k]) for k in range(3)])
    return ResampledSequence(out, seq.label, seq.subject_id, seq.sequence_id)


def flatten(r: ResampledSequence) -> np.ndarray:
    """Interleaved ``[y1, p1, r1, y2, p2, r2, ...]`` vector of length 3N."""
    return r.values.reshape(-1).copy()


def unflatten(vec: np.ndarray, label: Label, subject_id: str, sequence_id: str = "") -> ResampledSequence:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1 or vec.size % 3:
        raise ValueError(f"flattened vector length must be a multiple of 3, got {vec.shape}")
    return ResampledSequence(vec.reshape(-1, 3), label, subject_id, sequence_id)


def preprocess_sequence(
    seq: Sequence,
    n: int,
    cal: CalibrationRecord | None = None,
    apply_zero_origin: bool = True,
) -> ResampledSequence:
    if cal is not None:
        seq = calibrate(seq, cal)
    if apply_zero_origin:
        seq = zero_origin(seq)
    return resample(seq, n)


def preprocess_dataset(
    d: Dataset,
    n: int = DEFAULT_N,
    apply_calibration: bool = True,
    apply_zero_origin: bool = True,
) -> list[ResampledSequence]:
    """calibrate -> zero_origin -> resample for every sequence, in dataset order."""
    rows = []
    for seq in d.sequences:
        cal = None
        if apply_calibration:
            cal = d.calibrations.get(seq.subject_id)
            if cal is None:
                raise ValueError(
                    f"sequence {seq.sequence_id!r}: no calibration record for subject {seq.subject_id!r}"
                )
        try:
            rows.append(preprocess_sequence(seq, n, cal, apply_zero_origin))
        except ValueError as exc:
            raise ValueError(f"sequence {seq.sequence_id!r}: {exc}") from exc
    return rows


def write_resampled(rows: list[ResampledSequence], path: str | Path) -> None:
    """One line per row: ``subject_id,label,v_1..v_3N`` (interleaved layout)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        for r in rows:
            w.writerow([r.subject_id, r.label.letter] + [repr(float(v)) for v in flatten(r)])


def read_resampled(path: str | Path) -> list[ResampledSequence]:
    rows = []
    with Path(path).open(newline="") as fh:
        for i, rec in enumerate(csv.reader(fh)):
            if not rec:
                continue
            subject_id, letter, *vals = rec
            rows.append(
                unflatten(np.array([float(v) for v in vals]), Label.from_letter(letter), subject_id, f"row{i:06d}")
            )
    return rows


def stack(rows: list[ResampledSequence]) -> tuple[np.ndarray, np.ndarray]:
    """(B, N, 3) values and (B,) integer labels."""
    if not rows:
        return np.zeros((0, 0, 3)), np.zeros(0, dtype=np.int64)
    x = np.stack([r.values for r in rows])
    y = np.array([r.label.index for r in rows], dtype=np.int64)
    return x, y
