from __future__ import annotations

import numpy as np
import pytest

from inkmotion.preprocess import ResampledSequence
from inkmotion.sensor_data import Frame, Label, Sequence


def make_sequence(rot, td=None, letter="a", subject="subject_01", seq_id="s0") -> Sequence:
    rot = np.asarray(rot, dtype=np.float64)
    td = [10] * len(rot) if td is None else td
    frames = tuple(Frame(int(t), *map(float, r), 0.0, 0.0, 1000.0) for t, r in zip(td, rot))
    return Sequence(frames, Label.from_letter(letter), subject, seq_id)


def make_row(values, letter="a", subject="subject_01", seq_id="r0") -> ResampledSequence:
    return ResampledSequence(np.asarray(values, dtype=np.float64), Label.from_letter(letter), subject, seq_id)


def random_rows(rng, n_rows=10, n=20, n_subjects=3, scale=20.0) -> list[ResampledSequence]:
    return [
        make_row(
            rng.normal(0, scale, size=(n, 3)),
            letter="abcdefghijklmnopqrstuvwxyz"[i % 26],
            subject=f"subject_{i % n_subjects:02d}",
            seq_id=f"r{i:03d}",
        )
        for i in range(n_rows)
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance reporting

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def criterion():
    """``criterion(name, ok, detail)`` records one pass/fail line and asserts ``ok``."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        line = f"{name}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE[name] = line
        print(line)
        assert ok, line

    return record


@pytest.fixture
def criterion_skip():
    def record(name: str, reason: str) -> None:
        _ACCEPTANCE[name] = f"{name}: SKIP ({reason})"
        pytest.skip(reason)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split()[1].rstrip(":"))):
            terminalreporter.write_line(_ACCEPTANCE[name])
