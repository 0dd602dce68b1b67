"""Deformation complex of a Hitchin pair, its harmonic spaces and the Kuranishi chart.

All operators are assembled as real matrices in *weighted orthonormal
coordinates*: a u(r)-valued cochain is expanded in an orthonormal basis of
u(r) on every cell and each coefficient is multiplied by the square root of
the cell's L2 weight.  In these coordinates the L2 inner product is the
Euclidean one, so the adjoints of ``D1`` and ``D2`` are plain transposes and
the discrete Hodge theory is exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import AssemblyOverflow, CGDivergence, FixedPointDivergence, GapTooSmall
from .forms import HitchinPair, model_for
from .lie import from_coords, to_coords

ZERO_RATIO = 1e-8
GAP_RATIO = 1e3
DENSE_LIMIT = 8000
PSEUDOINVERSE_LIMIT = 4000


# ---------------------------------------------------------------------------
# coordinates


class Layout:
    """Concatenation of cochain slots in weighted orthonormal coordinates."""

    def __init__(self, surface, rank, slots):
        self.surface, self.rank = surface, rank
        self.slots = list(slots)                       # (degree, dual)
        self.counts = [surface.count(k, d) for k, d in self.slots]
        self.sqrt_w = [np.sqrt(surface.weight(k, d)) for k, d in self.slots]
        self.sizes = [n * rank * rank for n in self.counts]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.size = int(self.offsets[-1])

    def pack(self, arrays) -> np.ndarray:
        parts = []
        for x, sw in zip(arrays, self.sqrt_w):
            c = to_coords(x) * sw[:, None]
            parts.append(c.reshape(c.shape[:-2] + (-1,)))
        return np.concatenate(parts, axis=-1)

    def unpack(self, v) -> list:
        v = np.asarray(v, dtype=float)
        out, r = [], self.rank
        for i, (n, sw) in enumerate(zip(self.counts, self.sqrt_w)):
            c = v[..., self.offsets[i]:self.offsets[i + 1]]
            c = c.reshape(c.shape[:-1] + (n, r * r)) / sw[:, None]
            out.append(from_coords(c, r))
        return out


def level_layouts(surface, rank):
    grid = surface.backend == "grid"
    return (Layout(surface, rank, [(0, False)]),
            Layout(surface, rank, [(1, False), (1, False)]),
            Layout(surface, rank, [(2, False), (2, False), (2, grid)]))


def assemble_matrix(op, lin: Layout, lout: Layout, chunk: int = 128) -> np.ndarray:
    """Dense matrix of a linear map given as a batched function on slot arrays."""
    if max(lin.size, lout.size) > DENSE_LIMIT:
        raise AssemblyOverflow(f"operator of size {lout.size}x{lin.size} exceeds the dense limit")
    mat = np.empty((lout.size, lin.size))
    for start in range(0, lin.size, chunk):
        stop = min(start + chunk, lin.size)
        eye = np.zeros((stop - start, lin.size))
        eye[np.arange(stop - start), np.arange(start, stop)] = 1.0
        mat[:, start:stop] = lout.pack(op(lin.unpack(eye))).T
    return mat


# ---------------------------------------------------------------------------
# kernel counting


@dataclass
class KernelCount:
    dim: int
    threshold: float
    gap_ratio: float
    smallest: list

    def as_dict(self):
        return {"dim": self.dim, "threshold": self.threshold,
                "gap_ratio": self.gap_ratio, "smallest_eigenvalues": self.smallest}


def count_kernel(eigs, zero_ratio=ZERO_RATIO, gap=GAP_RATIO) -> KernelCount:
    """Number of zero eigenvalues of a PSD spectrum with a certified gap."""
    eigs = np.sort(np.asarray(eigs, dtype=float))
    if eigs.size == 0:
        return KernelCount(0, 0.0, math.inf, [])
    lmax = max(float(eigs[-1]), 0.0)
    if lmax == 0.0:
        return KernelCount(int(eigs.size), 0.0, math.inf, eigs[:8].tolist())
    thr = zero_ratio * lmax
    k = int(np.sum(eigs <= thr))
    floor = np.finfo(float).eps * lmax
    if k == eigs.size:
        ratio = math.inf
    elif k == 0:
        ratio = float(eigs[0]) / thr
    else:
        ratio = float(eigs[k]) / max(float(eigs[k - 1]), floor)
    info = KernelCount(k, thr, ratio, eigs[: k + 4].tolist())
    if ratio < gap:
        raise GapTooSmall(f"no certified spectral gap (ratio {ratio:.3g})", eigs[: k + 4])
    return info


# ---------------------------------------------------------------------------
# the complex


class DeformationComplex:
    """D1, D2 and their Hodge theory at a fixed pair (immutable after assembly)."""

    def __init__(self, pair: HitchinPair):
        self.pair = pair
        self.surface, self.rank = pair.surface, pair.rank
        self.model = model_for(self.surface, self.rank)
        self.state = self.model.state(pair.A.values, pair.Phi.values)
        self.L0, self.L1, self.L2 = level_layouts(self.surface, self.rank)
        m, st = self.model, self.state
        self.D1 = assemble_matrix(lambda xs: list(m.gauge_generator(st, xs[0])), self.L0, self.L1)
        self.D2 = assemble_matrix(lambda xs: list(m.linearize(st, xs[0], xs[1])), self.L1, self.L2)
        self.residual_vector = self.L2.pack(list(m.residual(st)))
        self.residual_norm = float(np.linalg.norm(self.residual_vector))
        self._spectra = {}

    # adjoints -----------------------------------------------------------------
    @property
    def D1T(self):
        return self.D1.T

    @property
    def D2T(self):
        return self.D2.T

    def laplacian(self, level: int) -> np.ndarray:
        if level == 0:
            return self.D1.T @ self.D1
        if level == 1:
            return self.D1 @ self.D1.T + self.D2.T @ self.D2
        if level == 2:
            return self.D2 @ self.D2.T
        raise ValueError("levels are 0, 1, 2")

    def spectrum(self, level: int):
        if level not in self._spectra:
            lap = self.laplacian(level)
            lap = 0.5 * (lap + lap.T)
            self._spectra[level] = np.linalg.eigh(lap)
        return self._spectra[level]

    def kernel(self, level: int) -> KernelCount:
        return count_kernel(self.spectrum(level)[0])

    def harmonic_basis(self, level: int) -> np.ndarray:
        k = self.kernel(level).dim
        return self.spectrum(level)[1][:, :k]

    def harmonic_project(self, level: int, v) -> np.ndarray:
        b = self.harmonic_basis(level)
        return b @ (b.T @ v)

    def complex_defect(self) -> float:
        """Operator norm of D2 D1 (vanishes at exact solutions)."""
        if self.D1.size == 0:
            return 0.0
        return float(np.linalg.norm(self.D2 @ self.D1, 2))

    def level(self, k: int) -> "Layout":
        return (self.L0, self.L1, self.L2)[k]

    def d_in(self, level):
        """Operator arriving at ``level`` (None at level 0)."""
        return (None, self.D1, self.D2)[level]

    def d_out(self, level):
        return (self.D1, self.D2, None)[level]


def assemble(pair: HitchinPair, tol_warn: float = 1e-6) -> DeformationComplex:
    cx = DeformationComplex(pair)
    if cx.residual_norm > tol_warn:
        warnings.warn(f"assembling at a pair with residual {cx.residual_norm:.2e}", RuntimeWarning)
    return cx


def harmonic_spaces(cx: DeformationComplex):
    """Dimensions and orthonormal bases (columns, weighted coordinates) of H^0..H^2."""
    dims, bases, gaps = [], [], []
    for k in range(3):
        info = cx.kernel(k)
        dims.append(info.dim)
        bases.append(cx.harmonic_basis(k))
        gaps.append(info)
    return tuple(dims), tuple(bases), tuple(gaps)


def canonical_h2_vectors(cx: DeformationComplex) -> np.ndarray:
    """The three slot vectors i d(eta) Id, normalised, as columns."""
    s, r = cx.surface, cx.rank
    eye = 1j * np.eye(r)
    cols = []
    for slot in range(3):
        arrays = []
        for j, (deg, dual) in enumerate(cx.L2.slots):
            if j != slot:
                arrays.append(np.zeros((s.count(deg, dual), r, r), complex))
                continue
            if s.backend == "grid":
                cell = s.dual_area if dual else s.face_area
            else:
                cell = s.area_form()
            arrays.append(cell[:, None, None] * eye)
        v = cx.L2.pack(arrays)
        cols.append(v / np.linalg.norm(v))
    return np.array(cols).T


def h2_alignment(cx: DeformationComplex) -> list:
    """||H v|| / ||v|| for each canonical i d(eta) Id slot vector."""
    b = cx.harmonic_basis(2)
    return [float(np.linalg.norm(b.T @ v)) for v in canonical_h2_vectors(cx).T]


def green_apply(cx: DeformationComplex, level: int, v, method: str = "auto", tol: float = 1e-12):
    """Green operator: solve Lap u = v - H v with u orthogonal to the harmonic space."""
    v = np.asarray(v, dtype=float)
    n = cx.level(level).size
    if method == "auto":
        method = "dense" if n < PSEUDOINVERSE_LIMIT else "cg"
    if method == "dense":
        lam, vec = cx.spectrum(level)
        k = cx.kernel(level).dim
        lam, vec = lam[k:], vec[:, k:]
        return vec @ ((vec.T @ v) / lam[:, None] if v.ndim > 1 else (vec.T @ v) / lam)
    if method != "cg":
        raise ValueError(f"unknown method {method!r}")
    hb = cx.harmonic_basis(level)
    proj = lambda x: x - hb @ (hb.T @ x)
    din, dout = cx.d_in(level), cx.d_out(level)

    def matvec(x):
        x = proj(np.ravel(x))
        y = np.zeros_like(x)
        if din is not None:
            y += din @ (din.T @ x)
        if dout is not None:
            y += dout.T @ (dout @ x)
        return proj(y)

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    cols = v.reshape(n, -1)
    out = np.empty_like(cols)
    for j in range(cols.shape[1]):
        rhs = proj(cols[:, j])
        sol, info = spla.cg(op, rhs, rtol=tol, atol=0.0, maxiter=20 * n)
        if info != 0:
            raise CGDivergence(f"CG did not converge (info={info})")
        out[:, j] = proj(sol)
    return out.reshape(v.shape)


# ---------------------------------------------------------------------------
# Kuranishi chart


def _split1(cx, v):
    a, b = cx.L1.unpack(v)
    return a, b


def nonlinear_term(cx: DeformationComplex, alpha) -> np.ndarray:
    """Exact nonlinear remainder R(x0 + alpha) - R(x0) - D2 alpha.

    On the spectral torus this is the quadratic term
    (a^a - b^b, [a, b], [a, star b]); on the grid it also contains the
    higher-order terms of the link exponential.
    """
    a, b = _split1(cx, alpha)
    moved = cx.model.displace(cx.state, a, b)
    r_new = cx.L2.pack(list(cx.model.residual(moved)))
    return r_new - cx.residual_vector - cx.D2 @ alpha


def quadratic_term(cx: DeformationComplex, alpha) -> np.ndarray:
    """(a^a - b^b, [a,b], [a, star b]) built from the plain wedge products."""
    s = cx.surface
    a, b = _split1(cx, alpha)
    w = lambda x, y: s.product(1, 1, x, y)
    br = lambda x, y: w(x, y) + w(y, x)
    third = br(a, s.star1(b))
    if s.backend == "grid":
        third = s.star0_2(s.star2_0(third, dual=False))
    return cx.L2.pack([w(a, a) - w(b, b), br(a, b), third])


def kuranishi_map(cx: DeformationComplex, alpha) -> np.ndarray:
    """k(alpha) = alpha + D2^* G (alpha ^~ alpha)."""
    alpha = np.asarray(alpha, float)
    if not np.any(alpha):
        return np.zeros_like(alpha)
    q = nonlinear_term(cx, alpha)
    return alpha + cx.D2.T @ green_apply(cx, 2, q)


@dataclass
class KuranishiResult:
    beta: np.ndarray
    iterations: int
    increments: list
    slice_residual: float
    deformed_residual: float
    harmonic_error: float

    def as_dict(self):
        return {"iterations": self.iterations, "slice_residual": self.slice_residual,
                "deformed_residual": self.deformed_residual,
                "harmonic_error": self.harmonic_error,
                "last_increment": self.increments[-1] if self.increments else 0.0}


def kuranishi_inverse(cx: DeformationComplex, gamma, eps: float, tol: float = 1e-13,
                      max_iter: int = 200, contraction_bound: float = 0.5) -> KuranishiResult:
    """Point of the chart over eps*gamma: alpha = eps*gamma - D2^* G N(alpha).

    Picard iteration; the increment ratio is monitored and a ratio above
    ``contraction_bound`` (after the first few steps) or growth is reported as
    divergence.
    """
    gamma = np.asarray(gamma, float)
    target = eps * gamma
    alpha = target.copy()
    incs = []
    scale = max(np.linalg.norm(target), 1e-300)
    it = 0
    for it in range(1, max_iter + 1):
        if not np.any(alpha):
            break
        new = target - cx.D2.T @ green_apply(cx, 2, nonlinear_term(cx, alpha))
        inc = float(np.linalg.norm(new - alpha)) / scale
        alpha = new
        incs.append(inc)
        if not np.all(np.isfinite(alpha)):
            raise FixedPointDivergence("non-finite iterate")
        if inc <= tol:
            break
        if len(incs) >= 2 and inc < 1e-8 and inc >= 0.5 * incs[-2]:
            break   # stagnated at the rounding floor
        if len(incs) >= 3 and inc > contraction_bound * incs[-2] and inc > 1e-8:
            raise FixedPointDivergence(f"Picard iteration not contracting at eps={eps:g}")
    else:
        raise FixedPointDivergence(f"no convergence after {max_iter} iterations")
    a, b = _split1(cx, alpha)
    moved = cx.model.displace(cx.state, a, b)
    deformed = cx.L2.pack(list(cx.model.residual(moved))) - cx.residual_vector
    return KuranishiResult(
        beta=alpha, iterations=it, increments=incs,
        slice_residual=float(np.linalg.norm(cx.D1.T @ alpha)),
        deformed_residual=float(np.linalg.norm(deformed)),
        harmonic_error=float(np.linalg.norm(cx.harmonic_project(1, alpha) - target)),
    )


def chart_jacobian(cx: DeformationComplex, alpha) -> tuple:
    """Linearised equation at the chart point x0 + alpha, in chart coordinates.

    Returns (J, cx_alpha, L) where ``cx_alpha`` is the complex at the moved
    pair, ``L`` converts chart tangents to that complex's coordinates and
    ``J = cx_alpha.D2 @ L``; on the spectral torus ``L`` is the identity.
    """
    a, b = _split1(cx, alpha)
    moved = cx.model.displace(cx.state, a, b)
    pair = HitchinPair.from_arrays(cx.surface, moved.A, moved.Phi)
    cx_alpha = DeformationComplex(pair)
    if cx.surface.backend == "spectral":
        lmat = np.eye(cx.L1.size)
    else:
        lmat = assemble_matrix(lambda xs: [cx.model.chart_tangent(a, xs[0]), xs[1]], cx.L1, cx.L1)
    return cx_alpha.D2 @ lmat, cx_alpha, lmat


def chart_tangent_field(cx: DeformationComplex, alpha, y, jac=None) -> np.ndarray:
    """Extension Y_bar = Y + D2^* gamma2 of a harmonic Y to the chart point
    alpha: solves (D2 + [alpha, .]~) (Y + D2^* gamma2) = 0 in least squares."""
    J = chart_jacobian(cx, alpha)[0] if jac is None else jac
    lhs = J @ cx.D2.T
    gamma2 = np.linalg.lstsq(lhs, -(J @ y), rcond=1e-12)[0]
    return y + cx.D2.T @ gamma2


# ---------------------------------------------------------------------------
# index and dimension


def dhat_matrix(cx: DeformationComplex) -> np.ndarray:
    """D_hat alpha = (D2 alpha, star0 D1^* alpha); star0 is an isometry onto the
    extra 2-form slot, so in weighted coordinates it is the identity block."""
    return np.vstack([cx.D2, cx.D1.T])


def basic_index(cx: DeformationComplex) -> dict:
    dh = dhat_matrix(cx)
    sv = np.linalg.svd(dh, compute_uv=False)
    lam = sv**2
    n_in, n_out = dh.shape[1], dh.shape[0]
    ker = count_kernel(np.concatenate([lam, np.zeros(max(n_in - lam.size, 0))]))
    coker = count_kernel(np.concatenate([lam, np.zeros(max(n_out - lam.size, 0))]))
    return {"index": ker.dim - coker.dim, "dim_ker": ker.dim, "dim_coker": coker.dim,
            "gap_ratio": min(ker.gap_ratio, coker.gap_ratio),
            "rank_nullity": n_in - n_out}


def dimension_formula(rank: int, genus: int) -> int:
    if rank < 1 or genus < 0:
        raise ValueError("rank >= 1 and genus >= 0 required")
    return 4 * rank * rank * (genus - 1) + 4


def expected_index(rank: int, genus: int) -> int:
    return -2 * rank * rank * (2 - 2 * genus)
