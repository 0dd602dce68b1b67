"""u(r)-valued cochains, Hitchin pairs and the gauge-theoretic operations on them.

Two connection models sit behind the public functions.

* On the spectral torus a connection is a global u(r)-valued 1-form ``A`` and
  all products are the dealiased pointwise products of the surface, so
  ``nabla psi = d psi + [A, psi]`` and ``F = dA + A^A`` literally.
* On square-tiled grids ``A`` is stored edge by edge as the principal
  logarithm of a unitary link ``U_e = exp(A_e)``.  Covariant derivatives
  transport values along links and the curvature is the logarithm of the
  plaquette holonomy.  This makes every residual exactly gauge covariant on
  the mesh, which keeps the deformation complex a complex at solutions.

Gauge transformations act by ``A -> g^-1 A g + g^-1 dg`` and
``Phi -> g^-1 Phi g``; on the grid that reads ``U_e -> g_tail^-1 U_e g_head``.
Higgs fields on the grid live at the tail vertex of each edge.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CheckpointError, DegreeOutOfRange, NotUnitary, RankMismatch
from .geometry import (
    GeometryConfig,
    SpectralTorus,
    SquareTiledGrid,
    TransverseSurface,
    apply_cells,
    build_surface,
    dagger,
    format_config,
    parse_config,
)
from .lie import dexp_skew, dlog_unitary, expm_skew, logm_unitary, skew_error, unitary_eig

SKEW_TOL = 1e-12


@dataclass(frozen=True)
class MatCochain:
    """Degree-k cochain with an r x r complex matrix on every cell."""

    surface: TransverseSurface
    degree: int
    values: np.ndarray
    skew: bool = True
    dual: bool = False

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise DegreeOutOfRange(f"degree {self.degree}")
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ValueError("values must have shape (cells, r, r)")
        if v.shape[0] != self.surface.count(self.degree, self.dual):
            raise ValueError(f"{v.shape[0]} cells for a degree-{self.degree} cochain")
        if self.skew:
            scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
            if skew_error(v) > SKEW_TOL * scale:
                raise ValueError("skew_flag set but values are not skew-hermitian")
        object.__setattr__(self, "values", v)

    @property
    def rank(self) -> int:
        return self.values.shape[-1]

    def clone(self) -> "MatCochain":
        return MatCochain(self.surface, self.degree, self.values.copy(), self.skew, self.dual)

    def norm(self) -> float:
        w = self.surface.inner_arr(self.values, self.values, self.degree, self.dual)
        return math.sqrt(max(float(w), 0.0))

    def with_values(self, values, skew=None) -> "MatCochain":
        return MatCochain(self.surface, self.degree, values,
                          self.skew if skew is None else skew, self.dual)

    @classmethod
    def zeros(cls, surface, degree, rank, dual=False):
        n = surface.count(degree, dual)
        return cls(surface, degree, np.zeros((n, rank, rank), dtype=complex), True, dual)


@dataclass(frozen=True)
class HitchinPair:
    """Connection form ``A`` and Higgs field ``Phi`` on a trivial bundle."""

    A: MatCochain
    Phi: MatCochain

    def __post_init__(self):
        if not (self.A.skew and self.Phi.skew):
            raise ValueError("A and Phi must both be skew")
        if self.A.degree != 1 or self.Phi.degree != 1:
            raise DegreeOutOfRange("A and Phi are 1-cochains")
        if self.A.surface is not self.Phi.surface:
            raise ValueError("A and Phi live on different surfaces")
        if self.A.rank != self.Phi.rank:
            raise RankMismatch("A and Phi have different ranks")

    @property
    def surface(self):
        return self.A.surface

    @property
    def rank(self) -> int:
        return self.A.rank

    @classmethod
    def from_arrays(cls, surface, A, Phi) -> "HitchinPair":
        return cls(MatCochain(surface, 1, A), MatCochain(surface, 1, Phi))

    @classmethod
    def zero(cls, surface, rank) -> "HitchinPair":
        z = np.zeros((surface.n1, rank, rank), dtype=complex)
        return cls.from_arrays(surface, z, z.copy())


# ---------------------------------------------------------------------------
# connection models


class SpectralModel:
    """Lie-algebra connection on the spectral torus (additive displacements)."""

    def __init__(self, surface: SpectralTorus, rank: int):
        self.surface, self.rank = surface, rank

    # state handling ----------------------------------------------------------
    def state(self, A, Phi):
        return _State(np.asarray(A, complex), np.asarray(Phi, complex))

    def displace(self, st, a, b):
        return self.state(st.A + a, st.Phi + b)

    def chart_tangent(self, a, x):
        return x

    # brackets --------------------------------------------------------------
    def br10(self, x, f):
        """[x, f] for a 1-form x and 0-form f."""
        s = self.surface
        return s.product(1, 0, x, f) - s.product(0, 1, f, x)

    def br11(self, x, y):
        s = self.surface
        return s.product(1, 1, x, y) + s.product(1, 1, y, x)

    def br00(self, f, g):
        s = self.surface
        return s.product(0, 0, f, g) - s.product(0, 0, g, f)

    # covariant calculus -----------------------------------------------------
    def cov_d0(self, st, f):
        return self.surface.d0(f) + self.br10(st.A, f)

    def cov_d1(self, st, psi):
        return self.surface.d1(psi) + self.br11(st.A, psi)

    def curvature(self, st):
        s = self.surface
        return s.d1(st.A) + s.product(1, 1, st.A, st.A)

    def phi_wedge(self, st):
        return self.surface.product(1, 1, st.Phi, st.Phi)

    def residual(self, st):
        star = self.surface.star1
        return (self.curvature(st) - self.phi_wedge(st),
                self.cov_d1(st, st.Phi),
                self.cov_d1(st, star(st.Phi)))

    def linearize(self, st, a, b):
        star = self.surface.star1
        return (self.cov_d1(st, a) - self.br11(st.Phi, b),
                self.cov_d1(st, b) + self.br11(a, st.Phi),
                self.cov_d1(st, star(b)) + self.br11(a, star(st.Phi)))

    def gauge_generator(self, st, f):
        return self.cov_d0(st, f), self.br10(st.Phi, f)

    def gauge_transform(self, A, Phi, g):
        s = self.surface
        gi = dagger(g)
        conj = lambda x: s.product(1, 0, s.product(0, 1, gi, x), g)
        return conj(A) + s.product(0, 1, gi, s.d0(g)), conj(Phi)


class LatticeModel:
    """Unitary link variables on a square-tiled grid."""

    def __init__(self, surface: SquareTiledGrid, rank: int):
        self.surface, self.rank = surface, rank
        s = surface
        E, V = s.n1, s.n0
        ones = np.ones(E)
        self.tail = sp.csr_matrix((ones, (s.edge_verts[:, 0], np.arange(E))), shape=(V, E))
        self.head = sp.csr_matrix((ones, (s.edge_verts[:, 1], np.arange(E))), shape=(V, E))

    def state(self, A, Phi, U=None):
        A = np.asarray(A, complex)
        U = expm_skew(A) if U is None else U
        st = _State(A, np.asarray(Phi, complex))
        st.U = U
        fe = self.surface.face_edges
        Ub, Ur, Ut, Ul = (U[fe[:, k]] for k in range(4))
        st.Q = Ub @ Ur @ dagger(Ut)
        st.P = st.Q @ dagger(Ul)
        st.eig = unitary_eig(st.P)
        return st

    def displace(self, st, a, b):
        U = expm_skew(a) @ st.U
        return self.state(logm_unitary(U), st.Phi + b, U=U)

    def chart_tangent(self, a, x):
        """Convert a chart-coordinate tangent at displacement ``a`` to the
        left-trivialised tangent at the displaced links."""
        return dexp_skew(a, x)

    # transport helpers -------------------------------------------------------
    @staticmethod
    def _ad(u, x):
        return u @ x @ dagger(u)

    def _sides(self, st, x):
        """Values of a 1-form on the four sides of each face, transported to
        the face's base corner (order: bottom, right, top, left)."""
        fe = self.surface.face_edges
        Ub, Ul = st.U[fe[:, 0]], st.U[fe[:, 3]]
        xb, xr, xt, xl = (x[..., fe[:, k], :, :] for k in range(4))
        return xb, self._ad(Ub, xr), self._ad(Ul, xt), xl

    @staticmethod
    def _wedge_sides(x, y):
        xb, xr, xt, xl = x
        yb, yr, yt, yl = y
        return 0.25 * ((xb + xt) @ (yl + yr) - (xl + xr) @ (yb + yt))

    # covariant calculus -----------------------------------------------------
    def cov_d0(self, st, f):
        ev = self.surface.edge_verts
        return self._ad(st.U, f[..., ev[:, 1], :, :]) - f[..., ev[:, 0], :, :]

    def cov_d1(self, st, psi):
        b, r, t, l = self._sides(st, psi)
        return b + r - t - l

    def curvature(self, st):
        return logm_unitary(st.P, st.eig)

    def phi_wedge(self, st):
        x = self._sides(st, st.Phi)
        return self._wedge_sides(x, x)

    def residual(self, st):
        return (self.curvature(st) - self.phi_wedge(st),
                self.cov_d1(st, st.Phi),
                self._divergence(st, st.Phi))

    def _divergence(self, st, phi):
        back = dagger(st.U) @ phi @ st.U
        return apply_cells(self.tail, phi) - apply_cells(self.head, back)

    def linearize(self, st, a, b):
        fe = self.surface.face_edges
        U = st.U
        Ub, Ul = U[fe[:, 0]], U[fe[:, 3]]
        ab, ar, at, al = (a[..., fe[:, k], :, :] for k in range(4))
        xi = ab + self._ad(Ub, ar) - self._ad(st.Q, at) - self._ad(st.P, al)
        dF = dlog_unitary(st.eig, xi @ st.P)

        X = self._sides(st, st.Phi)
        bb, br, bt, bl = (b[..., fe[:, k], :, :] for k in range(4))
        comm = lambda p, q: p @ q - q @ p
        dX = (bb,
              comm(ab, X[1]) + self._ad(Ub, br),
              comm(al, X[2]) + self._ad(Ul, bt),
              bl)
        dW = self._wedge_sides(dX, X) + self._wedge_sides(X, dX)
        s2 = dX[0] + dX[1] - dX[2] - dX[3]
        Phi = st.Phi
        back = dagger(U) @ (b - comm(a, Phi)) @ U
        s3 = apply_cells(self.tail, b) - apply_cells(self.head, back)
        return dF - dW, s2, s3

    def gauge_generator(self, st, f):
        ft = f[..., self.surface.edge_verts[:, 0], :, :]
        return self.cov_d0(st, f), st.Phi @ ft - ft @ st.Phi

    def gauge_transform(self, A, Phi, g):
        ev = self.surface.edge_verts
        gt, gh = g[ev[:, 0]], g[ev[:, 1]]
        U = dagger(gt) @ expm_skew(A) @ gh
        return logm_unitary(U), dagger(gt) @ Phi @ gt


class _State:
    def __init__(self, A, Phi):
        self.A, self.Phi = A, Phi


def model_for(surface, rank):
    if isinstance(surface, SpectralTorus):
        return SpectralModel(surface, rank)
    return LatticeModel(surface, rank)


def pair_state(pair: HitchinPair):
    model = model_for(pair.surface, pair.rank)
    return model, model.state(pair.A.values, pair.Phi.values)


# ---------------------------------------------------------------------------
# public operations


def _plain_product(surface, p, q, x, y):
    return surface.product(p, q, x, y)


def matrix_wedge(a: MatCochain, b: MatCochain) -> MatCochain:
    """Wedge product with matrix multiplication (no parallel transport)."""
    _check_pair(a, b)
    vals = a.surface.product(a.degree, b.degree, a.values, b.values)
    return MatCochain(a.surface, a.degree + b.degree, vals, skew=False)


def graded_bracket(a: MatCochain, b: MatCochain) -> MatCochain:
    """[a, b] = a^b - (-1)^{pq} b^a."""
    _check_pair(a, b)
    s, p, q = a.surface, a.degree, b.degree
    vals = s.product(p, q, a.values, b.values) - (-1) ** (p * q) * s.product(q, p, b.values, a.values)
    return MatCochain(s, p + q, vals, skew=a.skew and b.skew)


def _check_pair(a, b):
    if a.surface is not b.surface:
        raise ValueError("cochains live on different surfaces")
    if a.rank != b.rank:
        raise RankMismatch(f"ranks {a.rank} and {b.rank}")
    if a.degree + b.degree > 2:
        raise DegreeOutOfRange(f"degrees {a.degree}+{b.degree} exceed 2")
    if a.dual or b.dual:
        raise DegreeOutOfRange("products of dual cochains are not defined")


def star(c: MatCochain) -> MatCochain:
    if c.degree != 1:
        raise DegreeOutOfRange("star acts on 1-cochains here")
    return c.with_values(c.surface.star1(c.values))


def covariant_d(pair: HitchinPair, psi: MatCochain) -> MatCochain:
    if psi.rank != pair.rank:
        raise RankMismatch("psi and pair have different ranks")
    model, st = pair_state(pair)
    if psi.degree == 0:
        return MatCochain(pair.surface, 1, model.cov_d0(st, psi.values), psi.skew)
    if psi.degree == 1:
        return MatCochain(pair.surface, 2, model.cov_d1(st, psi.values), psi.skew)
    raise DegreeOutOfRange("covariant_d acts on degrees 0 and 1")


def curvature(pair: HitchinPair) -> MatCochain:
    model, st = pair_state(pair)
    return MatCochain(pair.surface, 2, model.curvature(st))


def gauge_transform(g, pair: HitchinPair) -> HitchinPair:
    """Act by a unitary 0-cochain ``g`` (array (n0, r, r) or MatCochain)."""
    g = np.asarray(g.values if isinstance(g, MatCochain) else g, dtype=complex)
    if g.shape != (pair.surface.n0, pair.rank, pair.rank):
        raise RankMismatch("gauge transformation has the wrong shape")
    eye = np.eye(pair.rank)
    if np.max(np.abs(dagger(g) @ g - eye)) > 1e-10:
        raise NotUnitary("g is not pointwise unitary")
    model = model_for(pair.surface, pair.rank)
    A, Phi = model.gauge_transform(pair.A.values, pair.Phi.values, g)
    return HitchinPair.from_arrays(pair.surface, _skew_clean(A), _skew_clean(Phi))


def _skew_clean(x):
    return 0.5 * (x - dagger(x))


def degree_from_curvature(surface, F) -> float:
    """(1/2 pi i) times the integral of tr F for a 2-cochain array F."""
    total = np.trace(surface.integrate2(np.asarray(F, complex)), axis1=-2, axis2=-1)
    return float((total / (2j * np.pi)).real)


def degree_of_bundle(pair: HitchinPair) -> float:
    return degree_from_curvature(pair.surface, curvature(pair).values)


def _complex_parts(surface, x):
    s = surface.star1(x)
    return 0.5 * (x + 1j * s), 0.5 * (x - 1j * s)


def to_higgs(pair: HitchinPair):
    """Return (A^{0,1}, theta) with theta the (1,0)-part of i Phi."""
    s = pair.surface
    _, a01 = _complex_parts(s, pair.A.values)
    theta, _ = _complex_parts(s, 1j * pair.Phi.values)
    return MatCochain(s, 1, a01, skew=False), MatCochain(s, 1, theta, skew=False)


def from_higgs(dbar: MatCochain, theta: MatCochain) -> HitchinPair:
    """Inverse of ``to_higgs``: A = A^{0,1} - (A^{0,1})^dagger, Phi = -i(theta + theta^dagger)."""
    s = theta.surface
    a = dbar.values - dagger(dbar.values)
    phi = -1j * (theta.values + dagger(theta.values))
    return HitchinPair.from_arrays(s, _skew_clean(a), _skew_clean(phi))


def dbar_theta(pair: HitchinPair) -> MatCochain:
    """The covariant derivative of theta, i.e. dbar_E theta in complex dimension one.

    On the grid this uses the primal staggered star, whereas the solver
    imposes the co-closed equation as a vertex divergence; the two agree only
    up to discretisation error, so this vanishes exactly on the spectral torus.
    """
    _, theta = to_higgs(pair)
    model, st = pair_state(pair)
    return MatCochain(pair.surface, 2, model.cov_d1(st, theta.values), skew=False)


def theta_wedge_theta(pair: HitchinPair) -> MatCochain:
    _, theta = to_higgs(pair)
    return matrix_wedge(theta, theta)


def flatness_check(pair: HitchinPair) -> float:
    """||F_D|| for D = nabla + i Phi, with F_D = F - Phi^Phi + i nabla Phi."""
    model, st = pair_state(pair)
    r1, r2, _ = model.residual(st)
    fd = r1 + 1j * r2
    return math.sqrt(max(float(pair.surface.inner_arr(fd, fd, 2)), 0.0))


def random_unitary_field(surface, rank, amplitude, rng, smooth_modes=None):
    """exp of a random skew 0-cochain; on the spectral torus optionally
    restricted to |k| <= smooth_modes so that the field is smooth."""
    from .lie import from_coords

    c = rng.normal(size=(surface.n0, rank * rank))
    f = from_coords(c, rank)
    if smooth_modes is not None and isinstance(surface, SpectralTorus):
        spec = surface.spectrum(f)
        keep = np.abs(surface.modes) <= smooth_modes
        spec = spec * (keep[:, None] & keep[None, :])[:, :, None, None]
        f = _skew_clean(surface.from_spectrum(spec))
        f = f / max(np.max(np.abs(f)), 1e-300)
    return expm_skew(amplitude * f)


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1


def _header(c: MatCochain, name):
    s = c.surface
    return {"name": name, "degree": c.degree, "rank": c.rank, "backend": s.backend,
            "resolution": s.resolution, "skew_flag": bool(c.skew), "dual": bool(c.dual),
            "cells": int(c.values.shape[0])}


def save_pair(pair: HitchinPair, path) -> None:
    """Write a pair as an ``.npz`` container: a JSON header, the geometry
    config text and the row-major per-cell matrices of A and Phi."""
    meta = {"version": CHECKPOINT_VERSION,
            "geometry": format_config(pair.surface.config),
            "cochains": [_header(pair.A, "A"), _header(pair.Phi, "Phi")]}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(meta, sort_keys=True)),
                 A=pair.A.values, Phi=pair.Phi.values)


def load_pair(path, surface=None) -> HitchinPair:
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["header"]))
            A, Phi = data["A"], data["Phi"]
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError("unsupported checkpoint version")
    if surface is None:
        surface = build_surface(parse_config(meta["geometry"]))
    for h, arr in zip(meta["cochains"], (A, Phi)):
        if h["backend"] != surface.backend or h["cells"] != arr.shape[0] or h["rank"] != arr.shape[-1]:
            raise CheckpointError("checkpoint does not match the surface")
    return HitchinPair.from_arrays(surface, A, Phi)
