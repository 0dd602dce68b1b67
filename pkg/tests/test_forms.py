import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from basic_hitchin.errors import CheckpointError, DegreeOutOfRange, NotUnitary, RankMismatch
from basic_hitchin.forms import (
    HitchinPair,
    MatCochain,
    covariant_d,
    curvature,
    dbar_theta,
    degree_from_curvature,
    degree_of_bundle,
    flatness_check,
    from_higgs,
    gauge_transform,
    graded_bracket,
    load_pair,
    matrix_wedge,
    random_unitary_field,
    save_pair,
    star,
    to_higgs,
)
from basic_hitchin.geometry import GeometryConfig, build_surface, dagger
from basic_hitchin.hitchin import residual
from oracles import low_mode_field, random_skew


def cochain(s, degree, r, rng, scale=1.0):
    return MatCochain(s, degree, random_skew(rng, s.count(degree), r, scale))


def pair(s, r, rng, scale=0.3):
    return HitchinPair.from_arrays(s, random_skew(rng, s.n1, r, scale), random_skew(rng, s.n1, r, scale))


def smooth_pair(s, r, rng, scale=0.3):
    return HitchinPair.from_arrays(s, low_mode_field(s, r, 1, rng, 2, scale),
                                   low_mode_field(s, r, 1, rng, 2, scale))


# ---------------------------------------------------------------------------
# containers


def test_skew_flag_is_validated(torus):
    bad = np.ones((torus.n1, 2, 2), dtype=complex)
    with pytest.raises(ValueError):
        MatCochain(torus, 1, bad)
    MatCochain(torus, 1, bad, skew=False)


def test_cell_count_is_validated(torus):
    with pytest.raises(ValueError):
        MatCochain(torus, 1, np.zeros((3, 1, 1)))
    with pytest.raises(DegreeOutOfRange):
        MatCochain(torus, 3, np.zeros((torus.n2, 1, 1)))


def test_pair_rank_mismatch(torus, rng):
    with pytest.raises(RankMismatch):
        HitchinPair(cochain(torus, 1, 1, rng), cochain(torus, 1, 2, rng))


# ---------------------------------------------------------------------------
# brackets


def test_self_bracket_is_twice_wedge(torus, genus2, rng):
    for s in (torus, genus2):
        a = cochain(s, 1, 2, rng)
        np.testing.assert_allclose(graded_bracket(a, a).values, 2 * matrix_wedge(a, a).values, atol=1e-13)


def test_abelian_brackets_vanish(torus, rng):
    for p, q in ((0, 0), (0, 1), (1, 1), (0, 2)):
        x, y = cochain(torus, p, 1, rng), cochain(torus, q, 1, rng)
        assert np.max(np.abs(graded_bracket(x, y).values)) < 1e-13


@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_star_bracket_identity(seed):
    s = build_surface(GeometryConfig("spectral", 1, 4))
    rng = np.random.default_rng(seed)
    a, b = cochain(s, 1, 2, rng), cochain(s, 1, 2, rng)
    lhs = graded_bracket(star(a), b).values
    rhs = -graded_bracket(a, star(b)).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * max(1.0, np.max(np.abs(lhs)))


# ---------------------------------------------------------------------------
# covariant derivative and curvature


def test_covariant_d_of_constant_identity(torus, genus2, rng):
    for s in (torus, genus2):
        z = HitchinPair.zero(s, 2)
        c = MatCochain(s, 0, np.broadcast_to(0.7j * np.eye(2), (s.n0, 2, 2)).copy())
        assert np.max(np.abs(covariant_d(z, c).values)) < 1e-13
        p = pair(s, 2, rng)
        assert np.max(np.abs(covariant_d(p, c).values)) < 1e-13


def test_covariant_d_of_central_field(torus, rng):
    p = smooth_pair(torus, 2, rng)
    f = low_mode_field(torus, 1, 0, rng, 2)[:, 0, 0]
    psi = MatCochain(torus, 0, f[:, None, None] * np.eye(2))
    df = torus.d0(f[:, None, None])
    np.testing.assert_allclose(covariant_d(p, psi).values, df * np.eye(2), atol=1e-12)


def test_covariant_d_matches_dense_oracle(small_torus, rng):
    s = small_torus
    # with |k| <= 1 inputs every product stays inside the band, so the
    # dealiased product equals the pointwise one used below
    p = HitchinPair.from_arrays(s, low_mode_field(s, 2, 1, rng, 1), low_mode_field(s, 2, 1, rng, 1))
    psi = MatCochain(s, 0, low_mode_field(s, 2, 0, rng, 1))
    # dense spectral differentiation matrix, then explicit commutator
    eye = np.eye(s.n0)[:, :, None, None].astype(complex)
    dmat = s.d0(eye)[..., 0, 0]                         # (n0 inputs, n1 outputs)
    grad = np.einsum("io,iab->oab", dmat, psi.values)
    A = p.A.values
    expected = grad + A @ np.concatenate([psi.values, psi.values]) - np.concatenate([psi.values, psi.values]) @ A
    np.testing.assert_allclose(covariant_d(p, psi).values, expected, atol=1e-11)


def test_curvature_simple_cases(torus, genus2, rng):
    for s in (torus, genus2):
        assert np.max(np.abs(curvature(HitchinPair.zero(s, 2)).values)) < 1e-15
        f = random_skew(rng, s.n0, 1, 0.2)
        closed = s.d0(f)
        p = HitchinPair.from_arrays(s, closed, np.zeros_like(closed))
        assert np.max(np.abs(curvature(p).values)) < 1e-12


@pytest.mark.parametrize("which", ["torus", "genus2"])
def test_curvature_is_gauge_covariant(which, torus, genus2, rng):
    s = {"torus": torus, "genus2": genus2}[which]
    if which == "torus":
        # a single-mode phase times a constant unitary keeps every product
        # inside the band, so truncation plays no role
        p = HitchinPair.from_arrays(s, low_mode_field(s, 2, 1, rng, 1, 0.3),
                                    low_mode_field(s, 2, 1, rng, 1, 0.3))
        v = random_unitary_field(s, 2, 1.0, rng)[0]
        phase = np.ones((s.n0, 2), complex)
        phase[:, 0] = s.mode_field(1, 0)
        g = (phase[:, :, None] * np.eye(2)) @ v
    else:
        p = pair(s, 2, rng, 0.2)
        g = random_unitary_field(s, 2, 1.0, rng)
    q = gauge_transform(g, p)
    F, Fq = curvature(p).values, curvature(q).values
    if which == "torus":
        gi = dagger(g)
        expected = s.product(2, 0, s.product(0, 2, gi, F), g)
        tol = 1e-10
    else:
        base = g[s.face_verts[:, 0]]
        expected = dagger(base) @ F @ base
        tol = 1e-12
    np.testing.assert_allclose(Fq, expected, atol=tol)


# ---------------------------------------------------------------------------
# gauge transformations


def test_gauge_identity_and_central(torus, genus2, rng):
    for s in (torus, genus2):
        p = pair(s, 2, rng)
        eye = np.broadcast_to(np.eye(2, dtype=complex), (s.n0, 2, 2)).copy()
        q = gauge_transform(eye, p)
        np.testing.assert_allclose(q.A.values, p.A.values, atol=1e-13)
        q = gauge_transform(np.exp(0.4j) * eye, p)
        np.testing.assert_allclose(q.A.values, p.A.values, atol=1e-13)
        np.testing.assert_allclose(q.Phi.values, p.Phi.values, atol=1e-13)


def test_gauge_requires_unitary(torus, rng):
    with pytest.raises(NotUnitary):
        gauge_transform(2 * np.broadcast_to(np.eye(2), (torus.n0, 2, 2)), pair(torus, 2, rng))


def test_residual_gauge_invariance(torus, genus2, rng):
    p = smooth_pair(torus, 2, rng)
    g = random_unitary_field(torus, 2, 0.1, rng, smooth_modes=1)
    before = residual(p)[1]
    after = residual(gauge_transform(g, p))[1]
    np.testing.assert_allclose(after, before, atol=1e-10)
    p = pair(genus2, 2, rng, 0.2)
    g = random_unitary_field(genus2, 2, 1.0, rng)
    np.testing.assert_allclose(residual(gauge_transform(g, p))[1], residual(p)[1], atol=1e-10)


# ---------------------------------------------------------------------------
# degree, Higgs form, flatness


def test_degree(torus, genus2, rng):
    assert degree_of_bundle(HitchinPair.zero(genus2, 1)) == 0.0
    for s in (torus, genus2):
        k = 3
        F = 2j * np.pi * k / s.total_area * s.area_form()[:, None, None]
        assert math.isclose(degree_from_curvature(s, F), k, rel_tol=1e-12)


def test_degree_at_solutions(torus_solution, genus2_rank2):
    for p, _ in (torus_solution, genus2_rank2):
        assert abs(degree_of_bundle(p)) <= 1e-8


def test_higgs_round_trip(torus, genus2, rng):
    for s in (torus, genus2):
        p = pair(s, 2, rng)
        dbar, theta = to_higgs(p)
        q = from_higgs(dbar, theta)
        np.testing.assert_allclose(q.A.values, p.A.values, atol=1e-12)
        np.testing.assert_allclose(q.Phi.values, p.Phi.values, atol=1e-12)
    zero = HitchinPair.zero(torus, 2)
    assert not np.any(to_higgs(zero)[1].values)


def test_higgs_field_of_abelian_solution(torus_solution):
    p, _ = torus_solution
    t = p.surface
    _, theta = to_higgs(p)
    phi = p.Phi.values[:, 0, 0]
    # harmonic Phi is constant: Phi = i(u dx + v dy); theta = (1,0)-part of i Phi
    u, v = (phi[: t.P] / 1j).real.mean(), (phi[t.P:] / 1j).real.mean()
    ip = -(u + 0j)
    ip_y = -(v + 0j)
    dz_part = 0.5 * (ip - 1j * ip_y)
    np.testing.assert_allclose(theta.values[: t.P, 0, 0], dz_part, atol=1e-12)
    np.testing.assert_allclose(theta.values[t.P:, 0, 0], 1j * dz_part, atol=1e-12)


def test_flatness(torus, torus_solution, genus2_rank2):
    assert flatness_check(HitchinPair.zero(torus, 2)) == 0.0
    for p, _ in (torus_solution, genus2_rank2):
        assert flatness_check(p) <= 1e-8


def test_flatness_grows_linearly(torus_solution, rng):
    p, _ = torus_solution
    t = p.surface
    bump = low_mode_field(t, 1, 1, rng, 1)
    vals = []
    for eps in (1e-3, 2e-3, 4e-3):
        q = HitchinPair.from_arrays(t, p.A.values, p.Phi.values + eps * bump)
        vals.append(flatness_check(q))
    ratios = np.array(vals[1:]) / vals[:-1]
    np.testing.assert_allclose(ratios, 2.0, rtol=1e-2)


def test_dbar_theta_vanishes_at_solution(torus_solution):
    assert np.linalg.norm(dbar_theta(torus_solution[0]).values) < 1e-10


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip(tmp_path, genus2_rank2, torus_solution):
    for p, _ in (genus2_rank2, torus_solution):
        path = tmp_path / "pair.npz"
        save_pair(p, path)
        q = load_pair(path)
        np.testing.assert_array_equal(q.A.values, p.A.values)
        np.testing.assert_array_equal(q.Phi.values, p.Phi.values)
        assert q.surface.config == p.surface.config


def test_checkpoint_errors(tmp_path, torus, genus2, torus_solution):
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_pair(bad)
    good = tmp_path / "good.npz"
    save_pair(torus_solution[0], good)
    with pytest.raises(CheckpointError):
        load_pair(good, surface=genus2)
