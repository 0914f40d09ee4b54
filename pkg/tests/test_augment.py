import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from inkmotion.augment import (
    AugmentConfig,
    UnitQuaternion,
    augment_dataset,
    base_id,
    euler_to_matrix,
    jitter,
    matrix_to_euler,
    random_quaternion,
    rotate,
    stretch,
)

from conftest import make_row, random_rows


def scipy_quat(q: UnitQuaternion) -> Rotation:
    return Rotation.from_quat([q.x, q.y, q.z, q.w])


# ---------------------------------------------------------------- jitter

def test_jitter_sigma_zero_identity(rng):
    r = make_row(rng.normal(size=(20, 3)))
    np.testing.assert_array_equal(jitter(r, 0.0, rng).values, r.values)


def test_jitter_statistics():
    r = make_row(np.zeros((3334, 3)))
    out = jitter(r, 1.0, np.random.default_rng(3))
    d = (out.values - r.values).ravel()
    assert d.size >= 10_000
    assert abs(d.mean()) <= 0.05
    assert 0.95 <= d.std() <= 1.05


def test_jitter_deterministic(rng):
    r = make_row(rng.normal(size=(20, 3)))
    a = jitter(r, 0.7, np.random.default_rng(9))
    b = jitter(r, 0.7, np.random.default_rng(9))
    assert a == b


def test_jitter_negative_sigma(rng):
    with pytest.raises(ValueError):
        jitter(make_row(np.zeros((2, 3))), -1.0, rng)


# ---------------------------------------------------------------- quaternions / euler

def test_quaternion_must_be_unit():
    with pytest.raises(ValueError):
        UnitQuaternion(1.0, 0.1, 0.0, 0.0)


angles = st.tuples(st.floats(-179, 179), st.floats(-89, 89), st.floats(-179, 179))


@settings(max_examples=80)
@given(angles)
def test_euler_matrix_matches_intrinsic_zyx(ypr):
    ref = Rotation.from_euler("ZYX", ypr, degrees=True).as_matrix()
    np.testing.assert_allclose(euler_to_matrix(np.array([ypr]))[0], ref, atol=1e-12)
    np.testing.assert_allclose(matrix_to_euler(ref[None])[0], ypr, atol=1e-7)


@settings(max_examples=50)
@given(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(lambda a: np.linalg.norm(a) > 1e-3),
       st.floats(-180, 180))
def test_quaternion_matrix_matches_scipy(axis, angle):
    q = UnitQuaternion.from_axis_angle(axis, angle)
    np.testing.assert_allclose(q.to_matrix(), scipy_quat(q).as_matrix(), atol=1e-12)
    assert q.angle_deg() == pytest.approx(abs(angle), abs=1e-6)


def test_quaternion_product_and_inverse(rng):
    a = random_quaternion(rng, 90)
    b = random_quaternion(rng, 90)
    np.testing.assert_allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-12)
    np.testing.assert_allclose((a * a.inverse()).to_matrix(), np.eye(3), atol=1e-12)


def test_random_quaternion_bounded(rng):
    for _ in range(200):
        assert random_quaternion(rng, 5.0).angle_deg() <= 5.0 + 1e-9


# ---------------------------------------------------------------- rotate

def test_rotate_identity(rng):
    r = make_row(rng.uniform(-60, 60, (30, 3)))
    np.testing.assert_allclose(rotate(r, UnitQuaternion.identity()).values, r.values, atol=1e-9)


def test_rotate_yaw_ten_degrees():
    q = UnitQuaternion.from_axis_angle((0, 0, 1), 10.0)
    out = rotate(make_row([[0.0, 0.0, 0.0]]), q)
    np.testing.assert_allclose(out.values, [[10.0, 0.0, 0.0]], atol=1e-9)


def test_rotate_matches_matrix_oracle(rng):
    vals = rng.uniform(-80, 80, (25, 3))
    q = random_quaternion(rng, 30.0)
    out = rotate(make_row(vals), q).values
    ref = (scipy_quat(q) * Rotation.from_euler("ZYX", vals, degrees=True)).as_matrix()
    np.testing.assert_allclose(Rotation.from_euler("ZYX", out, degrees=True).as_matrix(), ref, atol=1e-9)


def test_rotate_inverse_round_trip(rng):
    r = make_row(rng.uniform(-80, 80, (40, 3)))
    for _ in range(10):
        q = random_quaternion(rng, 20.0)
        back = rotate(rotate(r, q), q.inverse())
        np.testing.assert_allclose(back.values, r.values, atol=1e-6)


def test_rotate_gimbal_lock_is_finite():
    vals = np.array([[30.0, 90.0, 10.0], [0.0, -90.0, 0.0], [5.0, 89.9999999, 1.0]])
    q = UnitQuaternion.from_axis_angle((1, 0, 0), 0.0)
    out = rotate(make_row(vals), q).values
    assert np.all(np.isfinite(out))
    # the orientation itself is preserved even though the angle split is not unique
    np.testing.assert_allclose(euler_to_matrix(out), euler_to_matrix(vals), atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 30.0))
def test_rotation_distortion_bounded(seed, theta):
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-80, 80, (10, 3))
    q = random_quaternion(rng, theta)
    out = rotate(make_row(vals), q).values
    rel = Rotation.from_euler("ZYX", out, degrees=True) * Rotation.from_euler("ZYX", vals, degrees=True).inv()
    assert np.all(np.degrees(rel.magnitude()) <= theta + 1e-6)


# ---------------------------------------------------------------- stretch

def test_stretch_examples():
    r = make_row([[1, 1, 1], [2, 2, 2]])
    assert stretch(r, 1, 1, 1).values.tolist() == r.values.tolist()
    assert stretch(r, 2, 1, 1).values.tolist() == [[2, 1, 1], [4, 2, 2]]


def test_stretch_inverse(rng):
    r = make_row(rng.normal(0, 30, (20, 3)))
    a, b, c = rng.uniform(0.5, 2.0, 3)
    np.testing.assert_allclose(stretch(stretch(r, a, b, c), 1 / a, 1 / b, 1 / c).values, r.values, atol=1e-9)


def test_stretch_rejects_nonpositive():
    with pytest.raises(ValueError):
        stretch(make_row(np.zeros((2, 3))), 0, 1, 1)


# ---------------------------------------------------------------- augment_dataset

def test_augment_zero_copies(rng):
    rows = random_rows(rng, 10)
    assert augment_dataset(rows, AugmentConfig(copies_per_sequence=0)) == rows


def test_augment_counts_and_labels(rng):
    rows = random_rows(rng, 10)
    out = augment_dataset(rows, AugmentConfig(copies_per_sequence=2, seed=4))
    assert len(out) == 30
    assert out[:10] == rows
    hist_in = np.bincount([r.label.index for r in rows], minlength=26)
    hist_out = np.bincount([r.label.index for r in out], minlength=26)
    assert np.array_equal(hist_out, 3 * hist_in)
    src = {r.sequence_id: r for r in rows}
    for r in out[10:]:
        orig = src[base_id(r.sequence_id)]
        assert (r.label, r.subject_id) == (orig.label, orig.subject_id)
        assert r.sequence_id != orig.sequence_id


def test_augment_deterministic(rng):
    rows = random_rows(rng, 6)
    cfg = AugmentConfig(copies_per_sequence=3, seed=11)
    assert augment_dataset(rows, cfg) == augment_dataset(rows, cfg)
    other = augment_dataset(rows, AugmentConfig(copies_per_sequence=3, seed=12))
    assert other[6:] != augment_dataset(rows, cfg)[6:]


def test_augment_copy_is_stretch_rotate_jitter(rng):
    """Reproduce one copy by hand from the documented draw order."""
    rows = random_rows(rng, 3)
    cfg = AugmentConfig(copies_per_sequence=2, seed=5)
    out = augment_dataset(rows, cfg)
    g = np.random.default_rng([5, 1, 1])
    s = g.uniform(cfg.stretch_low, cfg.stretch_high, 3)
    q = random_quaternion(g, cfg.max_rotation_deg)
    expected = jitter(rotate(stretch(rows[1], *s), q), cfg.noise_sigma, g)
    np.testing.assert_allclose(out[3 + 1 * 2 + 1].values, expected.values, atol=1e-12)


def test_augment_config_validation():
    for bad in (dict(noise_sigma=-1), dict(max_rotation_deg=181), dict(stretch_low=0),
                dict(stretch_low=1.2, stretch_high=1.1), dict(copies_per_sequence=-1)):
        with pytest.raises(ValueError):
            AugmentConfig(**bad)
