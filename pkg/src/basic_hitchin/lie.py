"""Small helpers for u(r)-valued fields: the orthonormal basis and the unitary exponential map."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .geometry import dagger


@lru_cache(maxsize=None)
def u_basis(r: int) -> np.ndarray:
    """Orthonormal basis of u(r) for <X, Y> = Re tr(X Y^dagger), shape (r*r, r, r).

    Ordered as i E_jj first, then the real and imaginary off-diagonal pairs.
    The first ``r`` elements span the diagonal (Cartan) subalgebra.
    """
    out = []
    for j in range(r):
        m = np.zeros((r, r), dtype=complex)
        m[j, j] = 1j
        out.append(m)
    s = 1 / np.sqrt(2)
    for j in range(r):
        for k in range(j + 1, r):
            m = np.zeros((r, r), dtype=complex)
            m[j, k], m[k, j] = s, -s
            out.append(m)
            m = np.zeros((r, r), dtype=complex)
            m[j, k] = m[k, j] = 1j * s
            out.append(m)
    basis = np.array(out)
    basis.setflags(write=False)
    return basis


def to_coords(x: np.ndarray) -> np.ndarray:
    """(..., n, r, r) skew field -> (..., n, r*r) real coordinates."""
    r = x.shape[-1]
    return np.einsum("...ij,aij->...a", x, np.conj(u_basis(r))).real


def from_coords(c: np.ndarray, r: int) -> np.ndarray:
    return np.einsum("...a,aij->...ij", c.astype(complex), u_basis(r))


def skew_part(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x - dagger(x))


def skew_error(x: np.ndarray) -> float:
    x = np.asarray(x)
    return float(np.max(np.abs(x + dagger(x)))) if x.size else 0.0


def expm_skew(a: np.ndarray) -> np.ndarray:
    """Batched exponential of skew-hermitian matrices (exactly unitary)."""
    theta, v = np.linalg.eigh(-1j * a)
    return (v * np.exp(1j * theta)[..., None, :]) @ dagger(v)


def unitary_eig(u: np.ndarray):
    """Batched unitary eigendecomposition u = Z diag(lam) Z^dagger.

    Uses a complex Schur form per matrix; for normal matrices the triangular
    factor is diagonal, which keeps Z unitary even for repeated eigenvalues.
    """
    u = np.asarray(u)
    flat = u.reshape((-1,) + u.shape[-2:])
    zs = np.empty_like(flat)
    lams = np.empty(flat.shape[:2], dtype=complex)
    for i, m in enumerate(flat):
        t, z = sla.schur(m, output="complex")
        zs[i], lams[i] = z, np.diag(t)
    lams = lams / np.abs(lams)
    return zs.reshape(u.shape), lams.reshape(u.shape[:-1])


def logm_unitary(u: np.ndarray, eig=None) -> np.ndarray:
    """Principal logarithm of unitary matrices (skew-hermitian output)."""
    z, lam = eig if eig is not None else unitary_eig(u)
    return (z * (1j * np.angle(lam))[..., None, :]) @ dagger(z)


def log_divided_differences(lam: np.ndarray) -> np.ndarray:
    """Matrix of (log l_j - log l_k)/(l_j - l_k) with the diagonal limit 1/l_j."""
    lj, lk = lam[..., :, None], lam[..., None, :]
    logs = 1j * np.angle(lam)
    num = logs[..., :, None] - logs[..., None, :]
    den = lj - lk
    close = np.abs(den) < 1e-7
    safe = np.where(close, 1.0, den)
    return np.where(close, 2.0 / (lj + lk), num / safe)


def dlog_unitary(eig, e: np.ndarray) -> np.ndarray:
    """Frechet derivative of the principal log at u = Z diag(lam) Z^dagger, applied to e."""
    z, lam = eig
    dd = log_divided_differences(lam)
    return z @ ((dagger(z) @ e @ z) * dd) @ dagger(z)


def dexp_skew(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Left-trivialised differential of exp at a: d/ds exp(a+sx) exp(-a) at s=0.

    Equals sum_k ad_a^k x / (k+1)!, evaluated in the eigenbasis of a.
    """
    theta, v = np.linalg.eigh(-1j * a)
    diff = 1j * (theta[..., :, None] - theta[..., None, :])
    small = np.abs(diff) < 1e-8
    safe = np.where(small, 1.0, diff)
    phi = np.where(small, 1.0 + diff / 2, np.expm1(safe) / safe)
    return v @ ((dagger(v) @ x @ v) * phi) @ dagger(v)
