import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from inkmotion.sensor_data import (
    LETTERS,
    CalibrationRecord,
    Dataset,
    Frame,
    Label,
    ParseError,
    format_frame,
    load_dataset,
    parse_frame,
    timestamps,
    write_dataset,
)

from conftest import make_sequence

TABLE1 = [
    "7,90.10,-10.34,-20.02,206.9,-374.1,1052.9",
    "25,90.27,-9.86,-20.29,193.0,-401.7,1046.2",
]


def test_parse_table1_rows():
    assert parse_frame(TABLE1[0]) == Frame(7, 90.10, -10.34, -20.02, 206.9, -374.1, 1052.9)
    assert parse_frame(TABLE1[1]) == Frame(25, 90.27, -9.86, -20.29, 193.0, -401.7, 1046.2)


def test_parse_zero_line():
    f = parse_frame("0,0,0,0,0,0,0")
    assert f == Frame(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize(
    "line",
    ["1,2,3", "1,2,3,4,5,6,7,8", "1,a,3,4,5,6,7", "-1,0,0,0,0,0,0", "1.5,0,0,0,0,0,0", "1,nan,0,0,0,0,0", ""],
)
def test_parse_errors_name_the_line(line):
    with pytest.raises(ParseError) as exc:
        parse_frame(line)
    assert repr(line) in str(exc.value) or line in str(exc.value)


finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


@given(st.integers(0, 10**6), finite, finite, finite, finite, finite, finite)
def test_format_parse_round_trip(td, y, p, r, ax, ay, az):
    f = Frame(td, y, p, r, ax, ay, az)
    g = parse_frame(format_frame(f))
    assert g.td_ms == f.td_ms
    np.testing.assert_allclose(g.rotation + (g.ax, g.ay, g.az), f.rotation + (f.ax, f.ay, f.az), rtol=0, atol=1e-9)


def test_label_bijection():
    for i, letter in enumerate(LETTERS):
        assert Label.from_letter(letter).index == i
        assert Label.from_index(i).letter == letter
    with pytest.raises(ValueError):
        Label.from_letter("A")
    with pytest.raises(ValueError):
        Label.from_index(26)


def test_frame_invariants():
    with pytest.raises(ValueError):
        Frame(-1, 0, 0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        Frame(0, float("inf"), 0, 0, 0, 0, 0)


def test_sequence_needs_frames():
    with pytest.raises(ValueError):
        make_sequence(np.zeros((0, 3)))


@pytest.mark.parametrize(
    "td,expected",
    [([7, 25], [0, 25]), ([3, 0, 0], [0, 0, 0]), ([5, 10, 20, 1], [0, 10, 30, 31])],
)
def test_timestamps(td, expected):
    seq = make_sequence(np.zeros((len(td), 3)), td=td)
    assert list(timestamps(seq)) == expected


def test_timestamps_single_frame():
    assert list(timestamps(make_sequence([[1, 2, 3]], td=[5]))) == [0]


@given(st.lists(st.integers(0, 1000), min_size=2, max_size=50))
def test_timestamps_monotone(td):
    t = timestamps(make_sequence(np.zeros((len(td), 3)), td=td))
    assert len(t) == len(td) and t[0] == 0
    assert np.all(np.diff(t) >= 0)
    # oracle: running sum that ignores the first delta
    acc, ref = 0, [0]
    for d in td[1:]:
        acc += d
        ref.append(acc)
    assert list(t) == ref


def test_load_empty_directory(tmp_path):
    ds = load_dataset(tmp_path)
    assert len(ds.sequences) == 0


def test_load_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "nope")


def test_load_minimal(tmp_path):
    d = tmp_path / "subject_01" / "a"
    d.mkdir(parents=True)
    (d / "seq1.csv").write_text("\n".join(TABLE1) + "\n")
    ds = load_dataset(tmp_path)
    assert len(ds.sequences) == 1
    s = ds.sequences[0]
    assert s.label.letter == "a" and s.subject_id == "subject_01" and s.sequence_id == "seq1"
    assert s.frames[1] == parse_frame(TABLE1[1])


def test_load_skips_short_files(tmp_path, caplog):
    d = tmp_path / "subject_01" / "b"
    d.mkdir(parents=True)
    (d / "short.csv").write_text(TABLE1[0] + "\n")
    (d / "ok.csv").write_text("\n".join(TABLE1) + "\n")
    with caplog.at_level(logging.WARNING):
        ds = load_dataset(tmp_path)
    assert len(ds.sequences) == 1 and ds.skipped == 1
    assert "short" in caplog.text


def test_load_unknown_label(tmp_path):
    d = tmp_path / "subject_01" / "A"
    d.mkdir(parents=True)
    (d / "x.csv").write_text("\n".join(TABLE1) + "\n")
    with pytest.raises(ValueError):
        load_dataset(tmp_path)


def test_write_load_round_trip(tmp_path, rng):
    seqs = [
        make_sequence(rng.normal(0, 30, (int(rng.integers(2, 20)), 3)),
                      td=list(rng.integers(0, 40, 20)), letter=l, subject=s, seq_id=f"{s}_{l}_{k}")
        for s in ("subject_01", "subject_02") for l in "az" for k in range(2)
    ]
    ds = Dataset(seqs, {s: CalibrationRecord(s, 1.5, -2.25, 3.0) for s in ("subject_01", "subject_02")})
    assert write_dataset(ds, tmp_path) == len(seqs)
    back = load_dataset(tmp_path)
    key = lambda s: s.sequence_id
    assert sorted(back.sequences, key=key) == sorted(seqs, key=key)
    assert back.calibrations == ds.calibrations
