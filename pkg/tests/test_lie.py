import numpy as np
import pytest
import scipy.linalg as sla

from basic_hitchin.geometry import dagger
from basic_hitchin.lie import (
    dexp_skew,
    dlog_unitary,
    expm_skew,
    from_coords,
    logm_unitary,
    to_coords,
    u_basis,
    unitary_eig,
)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_basis_orthonormal_and_skew(r):
    b = u_basis(r)
    gram = np.einsum("aij,bij->ab", b, np.conj(b)).real
    np.testing.assert_allclose(gram, np.eye(r * r), atol=1e-15)
    np.testing.assert_allclose(b + np.conj(np.swapaxes(b, -1, -2)), 0, atol=1e-15)


def test_coordinate_round_trip(rng):
    c = rng.normal(size=(5, 9))
    np.testing.assert_allclose(to_coords(from_coords(c, 3)), c, atol=1e-14)


def test_exp_matches_scipy(rng):
    a = from_coords(rng.normal(size=(4, 4)), 2)
    np.testing.assert_allclose(expm_skew(a), np.array([sla.expm(m) for m in a]), atol=1e-13)


def test_log_inverts_exp(rng):
    a = 0.8 * from_coords(rng.normal(size=(6, 9)), 3)
    np.testing.assert_allclose(logm_unitary(expm_skew(a)), a, atol=1e-12)


def test_log_of_repeated_eigenvalues():
    u = np.array([np.eye(2) * np.exp(0.3j)])
    np.testing.assert_allclose(logm_unitary(u), np.array([0.3j * np.eye(2)]), atol=1e-14)


def test_dlog_matches_finite_difference(rng):
    a = 0.7 * from_coords(rng.normal(size=(3, 4)), 2)
    u = expm_skew(a)
    x = from_coords(rng.normal(size=(3, 4)), 2)
    e = x @ u
    t = 1e-6
    fd = (logm_unitary(expm_skew(t * x) @ u) - logm_unitary(expm_skew(-t * x) @ u)) / (2 * t)
    np.testing.assert_allclose(dlog_unitary(unitary_eig(u), e), fd, atol=1e-8)


def test_dexp_matches_finite_difference(rng):
    a = 0.9 * from_coords(rng.normal(size=(3, 4)), 2)
    x = from_coords(rng.normal(size=(3, 4)), 2)
    t = 1e-6
    fd = (expm_skew(a + t * x) - expm_skew(a - t * x)) / (2 * t) @ dagger(expm_skew(a))
    np.testing.assert_allclose(dexp_skew(a, x), fd, atol=1e-8)
