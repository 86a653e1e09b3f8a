import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from rbfxfer import (
    PointSet,
    RadiusConfig,
    SolverConfig,
    UncoveredDestinationError,
    adaptive_radii,
    assemble_eval_gradient,
    assemble_eval_matrix,
    assemble_interp_matrix,
    build_cardinal_preconditioner,
    build_interpolant,
    build_rescaled,
    gmres,
    wendland,
)
from rbfxfer.rbf import evaluate_rescaled
from conftest import random_cloud


def dense_kernel(dst, src, radii):
    t = np.linalg.norm(dst[:, None] - src[None], axis=2)
    s = t / radii[None]
    return np.where(s < 1, (1 - s) ** 4 * (1 + 4 * s), 0.0)


def test_wendland_values():
    assert wendland(0.0, 2.0) == 1.0
    assert wendland(3.0, 3.0) == 0.0 and wendland(5.0, 3.0) == 0.0
    assert wendland(1.5, 3.0) == pytest.approx(0.1875, abs=1e-16)
    for t, r in [(-1, 1), (0.5, 0), (0.5, -1)]:
        with pytest.raises(ValueError):
            wendland(t, r)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 10), st.floats(0.01, 10))
def test_wendland_range(t, r):
    v = wendland(t, r)
    assert 0.0 <= v <= 1.0 + 4 * np.finfo(float).eps
    assert (v == 0.0) == (t >= r)


def test_one_point_interp_matrix():
    A = assemble_interp_matrix(PointSet([[1, 2, 3]]), np.array([0.5]))
    assert A.toarray().tolist() == [[1.0]]


def test_two_point_interp_matrix():
    d = 0.4
    ps = PointSet([[0, 0, 0], [d, 0, 0]])
    A = assemble_interp_matrix(ps, np.array([1.2 * d, 1.2 * d])).toarray()
    off = (1 / 6) ** 4 * (1 + 10 / 3)
    assert off == pytest.approx(0.003344, abs=1e-6)
    np.testing.assert_allclose(A, [[1, off], [off, 1]], rtol=1e-13)


@pytest.mark.parametrize("seed", range(3))
def test_assembly_matches_dense(seed):
    rng = np.random.default_rng(seed)
    src = random_cloud(rng, 200)
    dst = random_cloud(rng, 150)
    radii = adaptive_radii(src, RadiusConfig(2, 2.0))
    A = assemble_interp_matrix(src, radii)
    np.testing.assert_allclose(A.toarray(), dense_kernel(src.points, src.points, radii), rtol=0, atol=1e-14)
    dist = np.linalg.norm(src.points[:, None] - src.points[None], axis=2)
    assert np.all(A.toarray()[dist >= radii[None]] == 0)
    B = assemble_eval_matrix(dst, src, radii, workers=2)
    np.testing.assert_allclose(B.toarray(), dense_kernel(dst.points, src.points, radii), rtol=0, atol=1e-14)


def test_eval_on_source_is_interp(rng):
    src = random_cloud(rng, 80)
    radii = adaptive_radii(src, RadiusConfig(2, 2.0))
    assert (assemble_eval_matrix(src, src, radii) != assemble_interp_matrix(src, radii)).nnz == 0


def test_coincident_destination_row(rng):
    src = random_cloud(rng, 30)
    radii = np.full(30, 1e-3)
    row = assemble_eval_matrix(PointSet(src.points[[7]]), src, radii).toarray()[0]
    assert row[7] == 1.0 and np.count_nonzero(row) == 1


def test_eval_gradient_matches_finite_differences(rng):
    src = random_cloud(rng, 60)
    radii = adaptive_radii(src, RadiusConfig(3, 2.5))
    x = rng.uniform(0.2, 0.8, size=(10, 3))
    G = assemble_eval_gradient(PointSet(x), src, radii)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (dense_kernel(x + e, src.points, radii) - dense_kernel(x - e, src.points, radii)) / (2 * h)
        np.testing.assert_allclose(G[k].toarray(), fd, atol=1e-7)


def test_preconditioner_identity_when_isolated(rng):
    src = random_cloud(rng, 20)
    radii = np.full(20, 1e-6)
    A = assemble_interp_matrix(src, radii)
    P, _ = build_cardinal_preconditioner(A, src, radii)
    np.testing.assert_array_equal(P.toarray(), np.eye(20))


def test_preconditioner_two_points_is_inverse():
    d = 0.4
    src = PointSet([[0, 0, 0], [d, 0, 0]])
    radii = np.array([1.2 * d, 1.2 * d])
    A = assemble_interp_matrix(src, radii)
    P, _ = build_cardinal_preconditioner(A, src, radii)
    np.testing.assert_allclose(P.toarray(), np.linalg.inv(A.toarray()), rtol=1e-13, atol=1e-16)
    _, st_ = gmres(A, np.array([1.0, -2.0]), precond=P)
    assert st_.iterations == 1


def test_preconditioner_gmres_path_matches_dense(rng):
    # force the iterative local solves and compare with direct ones
    src = random_cloud(rng, 150)
    radii = adaptive_radii(src, RadiusConfig(5, 3.0))
    A = assemble_interp_matrix(src, radii)
    dense, it_dense = build_cardinal_preconditioner(A, src, radii, dense_limit=10**6)
    iterative, it_gmres = build_cardinal_preconditioner(
        A, src, radii, inner_cfg=SolverConfig(1e-12, 500, 50), dense_limit=0
    )
    assert it_dense == 0 and it_gmres > 0
    assert (dense != 0).nnz == (iterative != 0).nnz
    np.testing.assert_allclose(iterative.toarray(), dense.toarray(), atol=1e-9)


def test_preconditioner_reduces_iterations(rng):
    src = random_cloud(rng, 500)
    radii = adaptive_radii(src, RadiusConfig(2, 2.0))
    A = assemble_interp_matrix(src, radii)
    P, _ = build_cardinal_preconditioner(A, src, radii)
    b = rng.normal(size=500)
    _, plain = gmres(A, b)
    _, pre = gmres(A, b, precond=P)
    assert plain.converged and pre.converged
    assert pre.iterations < plain.iterations


def test_interpolant_trivial_cases(rng):
    src = random_cloud(rng, 40)
    radii = adaptive_radii(src, RadiusConfig(2, 2.0))
    f = build_interpolant(src, np.zeros(40), radii)
    assert np.all(f.coeffs == 0)
    one = PointSet([[0.3, 0.3, 0.3]])
    g = build_interpolant(one, np.array([2.5]), np.array([1.0]))
    assert g.coeffs.tolist() == [2.5]


def test_interpolant_self_reproduction(rng):
    src = random_cloud(rng, 100)
    radii = adaptive_radii(src, RadiusConfig(2, 2.0))
    A = assemble_interp_matrix(src, radii)
    P, _ = build_cardinal_preconditioner(A, src, radii)
    v = rng.normal(size=100)
    f = build_interpolant(src, v, radii, P)
    assert np.linalg.norm(A @ f.coeffs - v) / np.linalg.norm(v) <= 1e-10
    np.testing.assert_allclose(f(src.points), v, atol=1e-9)


def test_rescaled_constants_and_dst_equals_src(rng):
    src = random_cloud(rng, 120)
    radii = adaptive_radii(src, RadiusConfig(2, 2.0))
    g = build_interpolant(src, np.ones(120), radii)
    f = build_interpolant(src, np.full(120, 4.2), radii)
    dst = random_cloud(rng, 300, 0.1, 0.9)
    np.testing.assert_allclose(build_rescaled(f, g)(dst), 4.2, atol=1e-9)
    v = rng.normal(size=120)
    fv = build_rescaled(build_interpolant(src, v, radii), g)
    np.testing.assert_allclose(fv(src), v, atol=1e-8)


def test_rescaled_linear_field_refines():
    errs = []
    for n in (5, 10, 20):
        g1 = (np.arange(n) + 0.5) / n
        src = PointSet(np.stack(np.meshgrid(g1, g1, g1, indexing="ij"), -1).reshape(-1, 3))
        radii = adaptive_radii(src, RadiusConfig(2, 2.0))
        g = build_interpolant(src, np.ones(src.count), radii)
        f = build_interpolant(src, src.points[:, 0], radii)
        dst = np.random.default_rng(0).uniform(0.3, 0.7, size=(400, 3))
        errs.append(np.max(np.abs(build_rescaled(f, g)(dst) - dst[:, 0])))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-2


def test_uncovered_destination_is_named(rng):
    src = random_cloud(rng, 50)
    radii = adaptive_radii(src, RadiusConfig(2, 2.0))
    g = build_interpolant(src, np.ones(50), radii)
    dst = PointSet(np.vstack([[0.5, 0.5, 0.5], [5.0, 5.0, 5.0]]))
    phi = assemble_eval_matrix(dst, src, radii)
    with pytest.raises(UncoveredDestinationError) as info:
        evaluate_rescaled(build_rescaled(g, g), phi)
    assert info.value.index == 1


def test_stalled_preconditioned_solve_falls_back(caplog):
    # wide supports on a lattice: inexact cardinal functions make P^{-1} poor
    src = PointSet(np.stack(np.meshgrid(*[np.linspace(0, 1, 17)] * 3, indexing="ij"), -1).reshape(-1, 3))
    radii = adaptive_radii(src, RadiusConfig(5, 3.0))
    A = assemble_interp_matrix(src, radii)
    P, _ = build_cardinal_preconditioner(A, src, radii, dense_limit=64)
    cfg = SolverConfig(1e-10, 300, 50)
    _, direct = gmres(A, src.points[:, 0].copy(), precond=P, cfg=cfg)
    assert not direct.converged
    with caplog.at_level("WARNING"):
        f = build_interpolant(src, src.points[:, 0], radii, P, cfg, phi_int=A)
    assert "stalled" in caplog.text
    assert f.stats[0].converged and f.stats[0].iterations > 300
    assert np.linalg.norm(A @ f.coeffs - src.points[:, 0]) <= 1e-10 * np.linalg.norm(src.points[:, 0])
