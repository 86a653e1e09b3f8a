import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbfxfer import (
    DegenerateQuaternionError,
    NonPositiveDeterminantError,
    align_svd,
    aligned_svd,
    det3,
    quaternion_to_rotation,
    rotation_to_quaternion,
    svd3,
)
from rbfxfer.tensor import RawSVD, canonical_hemisphere
from conftest import random_positive_tensors, random_rotations


def cofactor_det(F):
    return (
        F[..., 0, 0] * (F[..., 1, 1] * F[..., 2, 2] - F[..., 1, 2] * F[..., 2, 1])
        - F[..., 0, 1] * (F[..., 1, 0] * F[..., 2, 2] - F[..., 1, 2] * F[..., 2, 0])
        + F[..., 0, 2] * (F[..., 1, 0] * F[..., 2, 1] - F[..., 1, 1] * F[..., 2, 0])
    )


def rot_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def test_det3(rng):
    assert det3(np.eye(3)) == 1.0
    assert det3(np.diag([2.0, 3.0, 4.0])) == 24.0
    F = rng.normal(size=(1000, 3, 3))
    ref = cofactor_det(F)
    assert np.max(np.abs(det3(F) - ref) / np.abs(ref)) < 1e-12
    assert np.median(np.abs(det3(F) - ref) / np.abs(ref)) < 1e-14


def test_svd3_basic(rng):
    raw = svd3(np.eye(3))
    np.testing.assert_allclose(raw.sigma, [1, 1, 1])
    raw = svd3(np.diag([3.0, 2.0, 1.0]))
    np.testing.assert_allclose(raw.sigma, [3, 2, 1])
    assert np.allclose(np.abs(raw.U), np.eye(3)) and np.allclose(np.abs(raw.V), np.eye(3))
    F = rng.normal(size=(500, 3, 3))
    raw = svd3(F)
    assert np.all(np.diff(raw.sigma, axis=1) <= 0)
    rel = np.linalg.norm(raw.reconstruct() - F, axis=(1, 2)) / np.linalg.norm(F, axis=(1, 2))
    assert rel.max() < 1e-12
    I = np.eye(3)
    assert np.abs(np.swapaxes(raw.U, 1, 2) @ raw.U - I).max() < 1e-13
    assert np.abs(np.swapaxes(raw.V, 1, 2) @ raw.V - I).max() < 1e-13


def test_align_identity():
    al = aligned_svd(np.eye(3))
    np.testing.assert_allclose(al.U, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(al.V, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(al.sigma, [1, 1, 1])
    np.testing.assert_allclose(al.qU, [1, 0, 0, 0], atol=1e-15)


def test_align_restores_natural_order():
    al = aligned_svd(np.diag([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(al.sigma, [1, 2, 3])
    np.testing.assert_allclose(al.U, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(al.V, np.eye(3), atol=1e-15)


def regauge(raw, rng):
    n = raw.U.shape[0]
    perm = np.array([rng.permutation(3) for _ in range(n)])
    signs = rng.choice([-1.0, 1.0], size=(n, 3))
    rows = np.arange(n)[:, None]
    U = np.swapaxes(raw.U, 1, 2)[rows, perm].swapaxes(1, 2) * signs[:, None, :]
    V = np.swapaxes(raw.V, 1, 2)[rows, perm].swapaxes(1, 2) * signs[:, None, :]
    return RawSVD(U, raw.sigma[rows, perm], V)


def test_gauge_invariance(rng):
    F = random_positive_tensors(rng, 2000)
    raw = svd3(F)
    ref = align_svd(raw)
    for _ in range(3):
        other = align_svd(regauge(raw, rng))
        for name in ("U", "sigma", "V", "qU", "qV"):
            np.testing.assert_array_equal(getattr(other, name), getattr(ref, name))
    assert np.all(det3(ref.U) > 0) and np.all(det3(ref.V) > 0)
    rel = np.linalg.norm(ref.reconstruct() - F, axis=(1, 2)) / np.linalg.norm(F, axis=(1, 2))
    assert rel.max() < 1e-12


def test_align_v_columns_face_reference(rng):
    al = aligned_svd(random_positive_tensors(rng, 500))
    assert np.all(al.V[:, 0, 0] >= 0) and np.all(al.V[:, 1, 1] >= 0)
    # first column is the one most aligned with e1
    assert np.all(np.abs(al.V[:, 0, 0])[:, None] >= np.abs(al.V[:, 0, 1:]) - 1e-15)


def test_align_custom_reference(rng):
    W = random_rotations(rng, 1)[0].T
    F = random_positive_tensors(rng, 50)
    al = aligned_svd(F, W)
    dots = np.einsum("km,pmk->pk", W, al.V)
    assert np.all(dots[:, :2] >= 0)
    np.testing.assert_allclose(al.reconstruct(), F, atol=1e-12)


def test_align_rejects_bad_input():
    with pytest.raises(NonPositiveDeterminantError):
        aligned_svd(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(NonPositiveDeterminantError):
        aligned_svd(np.diag([1.0, 1.0, 0.0]))
    raw = svd3(np.eye(3))
    with pytest.raises(NonPositiveDeterminantError):
        align_svd(RawSVD(raw.U, raw.sigma, -raw.V))


def test_quaternion_examples():
    np.testing.assert_array_equal(rotation_to_quaternion(np.eye(3)), [1, 0, 0, 0])
    h = np.sqrt(2) / 2
    np.testing.assert_allclose(rotation_to_quaternion(rot_z(np.pi / 2)), [h, 0, 0, h], atol=1e-15)


def test_quaternion_rejects_non_rotation(rng):
    with pytest.raises(ValueError):
        rotation_to_quaternion(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        rotation_to_quaternion(2 * np.eye(3))


def test_quaternion_round_trip(rng):
    R = random_rotations(rng, 5000)
    q = rotation_to_quaternion(R)
    assert np.all(q[:, 0] >= 0)
    np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1, atol=1e-15)
    assert np.abs(quaternion_to_rotation(q) - R).max() < 1e-12


def test_quaternion_near_pi():
    for axis in np.eye(3):
        ang = np.pi
        K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
        R = np.eye(3) + np.sin(ang) * K + (1 - np.cos(ang)) * K @ K
        q = rotation_to_quaternion(R)
        assert abs(q[0]) < 1e-15
        assert np.abs(quaternion_to_rotation(q) - R).max() < 1e-12


def test_quaternion_to_rotation_normalizes(rng):
    q = rng.normal(size=(100, 4))
    R = quaternion_to_rotation(3.7 * q)
    np.testing.assert_allclose(R, quaternion_to_rotation(q / np.linalg.norm(q, axis=1, keepdims=True)), atol=1e-14)
    np.testing.assert_allclose(det3(R), 1.0, atol=1e-14)
    with pytest.raises(DegenerateQuaternionError) as info:
        quaternion_to_rotation(np.array([[1, 0, 0, 0], [1e-8, 0, 0, 0]], float))
    assert info.value.index == 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_hemisphere_representative(q):
    q = np.array(q)
    if not np.any(q):
        return
    h = canonical_hemisphere(q)
    assert np.array_equal(canonical_hemisphere(-q), h)
    assert h[np.flatnonzero(h)[0]] > 0
