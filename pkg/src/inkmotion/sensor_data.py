"""Frame / sequence data model and the on-disk CSV dataset layout.

Layout::

    <root>/<subject_id>/<letter>/<sequence_id>.csv   # td,yaw,pitch,roll,ax,ay,az per line
    <root>/<subject_id>/calibration.csv              # mean_yaw,mean_pitch,mean_roll
"""

from __future__ import annotations

import logging
import math
import string
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

LETTERS = string.ascii_lowercase
N_CLASSES = len(LETTERS)


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class Label:
    letter: str
    index: int

    def __post_init__(self):
        if len(self.letter) != 1 or self.letter not in LETTERS:
            raise ValueError(f"label must be a lowercase letter a-z, got {self.letter!r}")
        if LETTERS.index(self.letter) != self.index:
            raise ValueError(f"label {self.letter!r} does not match index {self.index}")

    @classmethod
    def from_letter(cls, letter: str) -> "Label":
        if len(letter) != 1 or letter not in LETTERS:
            raise ValueError(f"unknown label character {letter!r}")
        return cls(letter, LETTERS.index(letter))

    @classmethod
    def from_index(cls, index: int) -> "Label":
        if not 0 <= int(index) < N_CLASSES:
            raise ValueError(f"label index out of range: {index}")
        return cls(LETTERS[int(index)], int(index))

    def __str__(self) -> str:
        return self.letter


@dataclass(frozen=True)
class Frame:
    td_ms: int
    yaw_deg: float
    pitch_deg: float
    roll_deg: float
    ax: float
    ay: float
    az: float

    def __post_init__(self):
        if self.td_ms < 0:
            raise ValueError(f"negative time delta: {self.td_ms}")
        vals = (self.yaw_deg, self.pitch_deg, self.roll_deg, self.ax, self.ay, self.az)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite frame value in {vals}")

    @property
    def rotation(self) -> tuple[float, float, float]:
        return (self.yaw_deg, self.pitch_deg, self.roll_deg)


def parse_frame(csv_line: str) -> Frame:
    """Parse one ``td,yaw,pitch,roll,ax,ay,az`` line."""
    line = csv_line.strip()
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != 7:
        raise ParseError(f"expected 7 fields, got {len(parts)}: {line!r}")
    try:
        td_f = float(parts[0])
        rest = [float(p) for p in parts[1:]]
    except ValueError:
        raise ParseError(f"non-numeric field in line: {line!r}") from None
    if not td_f.is_integer():
        raise ParseError(f"time delta must be integer milliseconds: {line!r}")
    if td_f < 0:
        raise ParseError(f"negative time delta in line: {line!r}")
    try:
        return Frame(int(td_f), *rest)
    except ValueError as exc:
        raise ParseError(f"{exc}: {line!r}") from None


def format_frame(frame: Frame) -> str:
    # repr() of a float round-trips exactly
    vals = (frame.yaw_deg, frame.pitch_deg, frame.roll_deg, frame.ax, frame.ay, frame.az)
    return ",".join([str(int(frame.td_ms))] + [repr(float(v)) for v in vals])


@dataclass(frozen=True)
class Sequence:
    frames: tuple[Frame, ...]
    label: Label
    subject_id: str
    sequence_id: str

    def __post_init__(self):
        # single-frame sequences are representable (timestamps, zero_origin accept them);
        # loading and resampling enforce the two-frame minimum
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise ValueError(f"sequence {self.sequence_id!r} has no frames")

    def __len__(self) -> int:
        return len(self.frames)

    @cached_property
    def array(self) -> np.ndarray:
        """(M, 7) float array of the frames, columns in file order."""
        arr = np.array(
            [(f.td_ms, f.yaw_deg, f.pitch_deg, f.roll_deg, f.ax, f.ay, f.az) for f in self.frames],
            dtype=np.float64,
        )
        arr.setflags(write=False)
        return arr.reshape(-1, 7)

    def rotations(self) -> np.ndarray:
        return self.array[:, 1:4]

    def with_rotations(self, rot: np.ndarray) -> "Sequence":
        """Copy with yaw/pitch/roll replaced; td and acceleration kept."""
        rot = np.asarray(rot, dtype=np.float64)
        if rot.shape != (len(self.frames), 3):
            raise ValueError(f"rotation array shape {rot.shape} != ({len(self.frames)}, 3)")
        frames = tuple(
            Frame(f.td_ms, float(r[0]), float(r[1]), float(r[2]), f.ax, f.ay, f.az)
            for f, r in zip(self.frames, rot)
        )
        return Sequence(frames, self.label, self.subject_id, self.sequence_id)

    @classmethod
    def from_array(cls, arr: np.ndarray, label: Label, subject_id: str, sequence_id: str) -> "Sequence":
        frames = tuple(
            Frame(int(round(row[0])), *(float(v) for v in row[1:])) for row in np.asarray(arr)
        )
        return cls(frames, label, subject_id, sequence_id)


@dataclass(frozen=True)
class CalibrationRecord:
    subject_id: str
    mean_yaw: float
    mean_pitch: float
    mean_roll: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.means):
            raise ValueError(f"non-finite calibration for {self.subject_id}")

    @property
    def means(self) -> tuple[float, float, float]:
        return (self.mean_yaw, self.mean_pitch, self.mean_roll)


@dataclass
class Dataset:
    sequences: list[Sequence] = field(default_factory=list)
    calibrations: dict[str, CalibrationRecord] = field(default_factory=dict)
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def subjects(self) -> list[str]:
        return sorted({s.subject_id for s in self.sequences})


def timestamps(seq: Sequence) -> np.ndarray:
    """Cumulative time axis in ms; the first frame is anchored at 0."""
    if len(seq.frames) < 1:
        raise ValueError("sequence has no frames")
    td = np.array([f.td_ms for f in seq.frames], dtype=np.int64)
    td[0] = 0
    return np.cumsum(td)


def _read_frames(path: Path) -> list[Frame]:
    frames = []
    with path.open() as fh:
        for line in fh:
            if line.strip():
                frames.append(parse_frame(line))
    return frames


def load_dataset(root: str | Path) -> Dataset:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    ds = Dataset()
    for subj_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        subject_id = subj_dir.name
        cal_path = subj_dir / "calibration.csv"
        if cal_path.exists():
            text = cal_path.read_text().strip()
            parts = text.split(",")
            if len(parts) != 3:
                raise ParseError(f"calibration file must hold 3 values: {cal_path}")
            try:
                ds.calibrations[subject_id] = CalibrationRecord(subject_id, *(float(p) for p in parts))
            except ValueError as exc:
                raise ParseError(f"bad calibration file {cal_path}: {exc}") from None
        for letter_dir in sorted(p for p in subj_dir.iterdir() if p.is_dir()):
            label = Label.from_letter(letter_dir.name)
            for csv_path in sorted(letter_dir.glob("*.csv")):
                frames = _read_frames(csv_path)
                if len(frames) < 2:
                    log.warning("skipping %s: %d frame(s), need at least 2", csv_path, len(frames))
                    ds.skipped += 1
                    continue
                ds.sequences.append(Sequence(tuple(frames), label, subject_id, csv_path.stem))
    return ds


def write_dataset(ds: Dataset, root: str | Path) -> int:
    """Write ``ds`` in the standard layout; returns the number of sequence files."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for subject_id, cal in ds.calibrations.items():
        (root / subject_id).mkdir(parents=True, exist_ok=True)
        (root / subject_id / "calibration.csv").write_text(
            ",".join(repr(float(v)) for v in cal.means) + "\n"
        )
    for seq in ds.sequences:
        d = root / seq.subject_id / seq.label.letter
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{seq.sequence_id}.csv").write_text(
            "\n".join(format_frame(f) for f in seq.frames) + "\n"
        )
    return len(ds.sequences)
