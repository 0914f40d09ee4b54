import dataclasses

import numpy as np
import pytest

from inkmotion.augment import matrix_to_euler
from inkmotion.classifiers import KnnModel, knn_predict
from inkmotion.experiments import ExperimentConfig, prepare_rows
from inkmotion.preprocess import flatten
from inkmotion.sensor_data import load_dataset, write_dataset
from inkmotion.synth import (
    MAX_ABS_DEG,
    SubjectProfile,
    _trace_signature,
    gen_dataset,
    gen_sequence,
    make_templates,
    random_profile,
)


@pytest.fixture(scope="module")
def templates():
    return make_templates(seed=0)


def natural_spline(knots, values, u):
    """Natural cubic spline through (knots, values), solved from the second-derivative system."""
    n = len(knots) - 1
    h = np.diff(knots)
    A = np.zeros((n + 1, n + 1))
    r = np.zeros(n + 1)
    A[0, 0] = A[n, n] = 1.0
    for i in range(1, n):
        A[i, i - 1], A[i, i], A[i, i + 1] = h[i - 1], 2 * (h[i - 1] + h[i]), h[i]
        r[i] = 6 * ((values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1])
    M = np.linalg.solve(A, r)
    out = []
    for x in u:
        i = min(max(np.searchsorted(knots, x) - 1, 0), n - 1)
        a, b = knots[i + 1] - x, x - knots[i]
        out.append(
            M[i] * a**3 / (6 * h[i]) + M[i + 1] * b**3 / (6 * h[i])
            + (values[i] / h[i] - M[i] * h[i] / 6) * a + (values[i + 1] / h[i] - M[i + 1] * h[i] / 6) * b
        )
    return np.array(out)


def test_templates_basic(templates):
    assert len(templates) == 26
    assert [t.label.index for t in templates] == list(range(26))
    for t in templates:
        assert t.waypoints.shape[0] >= 4 and t.waypoints.shape[1] == 3
        assert np.abs(t.waypoints).max() <= MAX_ABS_DEG + 1e-12


def test_templates_deterministic(templates):
    again = make_templates(seed=0)
    for a, b in zip(templates, again):
        np.testing.assert_array_equal(a.waypoints, b.waypoints)
    other = make_templates(seed=1)
    assert not np.array_equal(templates[0].waypoints, other[0].waypoints)


def test_templates_pairwise_margin(templates):
    sigs = [_trace_signature(t) for t in templates]
    gaps = [
        np.sqrt(np.mean((sigs[i] - sigs[j]) ** 2)) for i in range(26) for j in range(i + 1, 26)
    ]
    assert len(gaps) == 325 and min(gaps) > 0
    assert min(gaps) >= 4.0


def test_sequence_lies_on_template_curve(templates):
    t = templates[3]
    # duration 1155 ms = 11 knot intervals of 105 ms, sampled every 15 ms
    profile = dataclasses.replace(SubjectProfile.identity(period_ms=15.0), speed=1200.0 / 1155.0)
    seq = gen_sequence(t, profile, np.random.default_rng(0))
    rot = seq.rotations()
    times = np.concatenate([[0], np.cumsum([f.td_ms for f in seq.frames[1:]])])
    u = times / 1155.0
    for ch in range(3):
        np.testing.assert_allclose(rot[:, ch], natural_spline(np.linspace(0, 1, 12), t.waypoints[:, ch], u), atol=1e-6)
    np.testing.assert_allclose(rot[::7], t.waypoints, atol=1e-6)


def test_speed_halves_frame_count(templates):
    slow = gen_sequence(templates[0], SubjectProfile.identity(), np.random.default_rng(0))
    fast = gen_sequence(templates[0], dataclasses.replace(SubjectProfile.identity(), speed=2.0), np.random.default_rng(0))
    assert abs(len(fast.frames) - len(slow.frames) / 2) <= 1


def test_sequence_deterministic(templates):
    p = random_profile("s", np.random.default_rng(4))
    a = gen_sequence(templates[5], p, np.random.default_rng(9))
    b = gen_sequence(templates[5], p, np.random.default_rng(9))
    assert a == b


def test_profile_invariants():
    with pytest.raises(ValueError):
        dataclasses.replace(SubjectProfile.identity(), speed=2.5)
    with pytest.raises(ValueError):
        SubjectProfile.identity(period_ms=4.0)
    for s in range(20):
        p = random_profile("s", np.random.default_rng(s))
        assert 0.5 <= p.speed <= 2.0 and 5.0 <= p.period_ms <= 30.0


def test_dataset_counts_and_calibration():
    ds = gen_dataset(2, 3, seed=1)
    assert len(ds.sequences) == 156
    assert sorted(ds.calibrations) == ["subject_01", "subject_02"]
    for s in range(2):
        prof = random_profile(f"subject_{s + 1:02d}", np.random.default_rng([1, 1, s]))
        cal = ds.calibrations[prof.subject_id]
        ypr = matrix_to_euler(prof.offset.to_matrix())
        np.testing.assert_allclose([cal.mean_yaw, cal.mean_pitch, cal.mean_roll], ypr, atol=0.5)


def test_paper_scale_shape_arithmetic():
    assert 20 * 26 * 20 == 10_400


def test_dataset_deterministic_and_round_trip(tmp_path):
    a = gen_dataset(2, 1, seed=7)
    b = gen_dataset(2, 1, seed=7)
    assert a.sequences == b.sequences
    write_dataset(a, tmp_path)
    back = load_dataset(tmp_path)
    assert len(back.sequences) == len(a.sequences) == 52
    key = lambda s: s.sequence_id
    for x, y in zip(sorted(a.sequences, key=key), sorted(back.sequences, key=key)):
        assert x.label == y.label and x.subject_id == y.subject_id
        np.testing.assert_allclose(x.rotations(), y.rotations(), atol=1e-9)


def test_one_nn_separates_noise_free_data(templates):
    quiet = lambda p: dataclasses.replace(p, noise_deg=0.0, rep_variability_deg=0.0, rep_warp=0.0)
    from inkmotion.sensor_data import Dataset

    ds = Dataset()
    for s in range(3):
        prof = quiet(random_profile(f"subject_{s}", np.random.default_rng([0, 1, s])))
        ds.calibrations[prof.subject_id] = prof.calibration()
        for t in templates:
            for rep in range(2):
                ds.sequences.append(gen_sequence(t, prof, np.random.default_rng([s, t.label.index, rep]), f"{s}{t.label.letter}{rep}"))
    rows = prepare_rows(ExperimentConfig(), ds)
    train = [r for r in rows if r.sequence_id.endswith("0")]
    test = [r for r in rows if r.sequence_id.endswith("1")]
    model = KnnModel(np.stack([flatten(r) for r in train]), np.array([r.label.index for r in train]), k=1)
    preds = [knn_predict(model, flatten(r)) for r in test]
    assert np.mean(np.array(preds) == np.array([r.label.index for r in test])) == 1.0
