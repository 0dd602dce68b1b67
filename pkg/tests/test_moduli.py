import numpy as np
import pytest

from basic_hitchin.deformation import assemble
from basic_hitchin.geometry import GeometryConfig, build_surface
from basic_hitchin.hitchin import SolveConfig, find_irreducible
from basic_hitchin.moduli import (
    build_frame,
    kahler_forms,
    kahler_value,
    metric_g,
    normal_coordinate_check,
    quaternion_apply,
    quaternion_matrix,
    quaternion_report,
)
from oracles import random_skew


@pytest.fixture(scope="module")
def torus_frame(torus_complex):
    return build_frame(torus_complex)


def test_quaternion_sign_bookkeeping(genus2, torus, rng):
    for s in (genus2, torus):
        a, b = random_skew(rng, s.n1, 2), random_skew(rng, s.n1, 2)
        jj = quaternion_apply("J", *quaternion_apply("J", a, b, s), s)
        np.testing.assert_allclose(jj[0], -a, atol=1e-15)
        np.testing.assert_allclose(jj[1], -b, atol=1e-15)
        ij = quaternion_apply("I", *quaternion_apply("J", a, b, s), s)
        k = quaternion_apply("K", a, b, s)
        np.testing.assert_allclose(ij[0], k[0], atol=1e-15)
        np.testing.assert_allclose(ij[1], k[1], atol=1e-15)
    with pytest.raises(ValueError):
        quaternion_apply("L", a, b, s)


def test_i_squared_exact_on_spectral(torus_complex):
    i = quaternion_matrix(torus_complex, "I")
    np.testing.assert_allclose(i @ i, -np.eye(i.shape[0]), atol=1e-15)


def test_quaternions_preserve_harmonic_space(torus_frame):
    for q, leak in torus_frame.leakage.items():
        assert leak <= 1e-8, q


def test_metric_positive_and_i_invariant(torus_complex, rng):
    cx = torus_complex
    x, y = rng.normal(size=cx.L1.size), rng.normal(size=cx.L1.size)
    assert metric_g(cx, x, x) > 0
    i = quaternion_matrix(cx, "I")
    assert abs(metric_g(cx, i @ x, i @ y) - metric_g(cx, x, y)) <= 1e-12 * np.linalg.norm(x) * np.linalg.norm(y)


def _natural_basis(cx):
    """Constant forms (i dx, 0), (i dy, 0), (0, i dx), (0, i dy)."""
    s = cx.surface
    cols = []
    for slot in (0, 1):
        for comp in (0, 1):
            a = [np.zeros((s.n1, 1, 1), complex), np.zeros((s.n1, 1, 1), complex)]
            a[slot][comp * s.P:(comp + 1) * s.P] = 1j
            cols.append(cx.L1.pack(a))
    return np.array(cols).T


def test_abelian_metric_and_symplectic_form():
    s = build_surface(GeometryConfig("spectral", 1, 8, 2.5))
    pair, _, _ = find_irreducible(s, SolveConfig(rank=1, residual_tolerance=1e-12))
    cx = assemble(pair)
    basis = _natural_basis(cx)
    np.testing.assert_allclose(cx.harmonic_project(1, basis), basis, atol=1e-12)
    gram = np.array([[metric_g(cx, x, y) for y in basis.T] for x in basis.T])
    np.testing.assert_allclose(gram, 2.5 * np.eye(4), atol=1e-12)
    omega = np.array([[kahler_value(cx, "I", x, y) for y in basis.T] for x in basis.T])
    j = np.array([[0.0, -1.0], [1.0, 0.0]])
    expected = 2.5 * np.block([[j, np.zeros((2, 2))], [np.zeros((2, 2)), -j]])
    np.testing.assert_allclose(omega, expected, atol=1e-12)


def test_kahler_forms_skew_and_compatible(torus_frame):
    for q, om in zip("IJK", kahler_forms(torus_frame)):
        np.testing.assert_allclose(om, -om.T, atol=1e-12)
        np.testing.assert_allclose(np.diag(om), 0, atol=1e-12)
        np.testing.assert_allclose(om, torus_frame.gram @ torus_frame.quaternions[q], atol=1e-9)


def test_quaternion_report_at_abelian_torus(torus_frame):
    rep = quaternion_report(torus_frame)
    assert rep["dim"] == 4
    assert max(rep["I2"], rep["J2"], rep["K2"], rep["K_minus_IJ"]) <= 1e-8
    assert rep["gram_deviation"] <= 1e-12


def test_grid_quaternion_report_is_finite(genus2_rank2_complex):
    # on the grid the star is only approximately an involution, so the
    # relations hold up to discretisation error; J never involves the star
    rep = quaternion_report(build_frame(genus2_rank2_complex))
    assert rep["dim"] == 20 and rep["dim"] % 4 == 0
    assert rep["compat_I"] <= 1e-9 and rep["compat_K"] <= 1e-9
    assert rep["J2"] < rep["I2"]


def test_normal_coordinates_abelian(torus_complex):
    rep = normal_coordinate_check(torus_complex, n_triples=2)
    assert rep["max_abs_g"] <= 1e-12 and rep["max_abs_omega"] <= 1e-12


def test_normal_coordinates_metric_rank_two(genus2_rank2_complex):
    rep = normal_coordinate_check(genus2_rank2_complex, n_triples=2, seed=1)
    assert rep["min_slope_g"] >= 1.8
    assert len(rep["rows"]) == 2 and rep["dim_h1"] == 20
