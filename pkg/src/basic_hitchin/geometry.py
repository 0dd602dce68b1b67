"""Discretized quotient surfaces and the scalar cochain calculus on them.

Basic forms on a quasi-regular Sasakian three-fold are pulled back from the
quotient Riemann surface, so every computation in the package happens on a
discretized surface.  Two backends are provided:

``SpectralTorus``
    Band-limited trigonometric fields on a square flat torus, sampled at an odd
    number ``N = 2K + 1`` of collocation points per axis.  0-, 1- and 2-forms
    are stored as pointwise coefficients (1-forms as a ``dx`` block followed by
    a ``dy`` block), so ``d`` is exact Fourier differentiation and the star is
    an exact rotation of components.

``SquareTiledGrid``
    A translation surface glued from unit squares, each refined into an
    ``n x n`` mesh.  Cochain values are integrals over cells, ``d`` is the
    integer coboundary and the star on 1-cochains is a staggered rotation.

Every array handled here carries the cell index on axis ``-3`` and a pair of
matrix axes at the end, i.e. ``(..., n_cells, r, r)``.  Scalar cochains use
``r = 1``.  Leading axes are batch axes.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConfigError,
    DegreeMismatch,
    DegreeOutOfRange,
    GenusMismatch,
    InvalidGluing,
)

SIDES = ("left", "right", "bottom", "top")
_PARTNER = {"right": "left", "left": "right", "top": "bottom", "bottom": "top"}


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class GeometryConfig:
    """Plain description of a quotient surface.

    ``gluing`` is a tuple of ``((square, side), (square, side))`` pairs and is
    only meaningful for the grid backend.
    """

    backend: str
    genus: int
    resolution: int
    total_area: float = 1.0
    gluing: tuple = ()

    def canonical(self) -> "GeometryConfig":
        if self.backend == "grid":
            return replace(self, gluing=canonical_gluing(self.gluing))
        return self


def canonical_gluing(pairs) -> tuple:
    """Validate a gluing table and return it in canonical sorted order.

    A valid table glues every side of every square exactly once, always a
    ``right`` side to a ``left`` side or a ``top`` side to a ``bottom`` side,
    which is what makes the result a translation surface.
    """
    pairs = [tuple(map(tuple, p)) for p in pairs]
    if not pairs:
        raise InvalidGluing("empty gluing table")
    seen = {}
    oriented = []
    for (s1, e1), (s2, e2) in pairs:
        for s, e in ((s1, e1), (s2, e2)):
            if e not in SIDES:
                raise InvalidGluing(f"unknown side {e!r}")
            if int(s) < 0:
                raise InvalidGluing(f"negative square index {s}")
            if (s, e) in seen:
                raise InvalidGluing(f"side {s} {e} glued twice")
            seen[(s, e)] = True
        if _PARTNER[e1] != e2:
            raise InvalidGluing(f"cannot glue {s1} {e1} to {s2} {e2}: "
                                "right pairs with left and top with bottom")
        if e1 in ("left", "bottom"):
            (s1, e1), (s2, e2) = (s2, e2), (s1, e1)
        oriented.append(((int(s1), e1), (int(s2), e2)))
    n_sq = 1 + max(s for s, _ in seen)
    missing = [(s, e) for s in range(n_sq) for e in SIDES if (s, e) not in seen]
    if missing:
        raise InvalidGluing(f"sides left unglued: {missing}")
    order = {e: i for i, e in enumerate(SIDES)}
    oriented.sort(key=lambda p: (p[0][0], order[p[0][1]]))
    return tuple(oriented)


_LINE = re.compile(r"^\s*(\d+)\s+(\w+)\s*->\s*(\d+)\s+(\w+)\s*$")


def parse_config(text: str) -> GeometryConfig:
    """Parse the key/value geometry format (see ``format_config``)."""
    values, gluing, section = {}, [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            continue
        if section == "gluing":
            m = _LINE.match(line)
            if not m:
                raise ConfigError(f"line {lineno}: expected 'square side -> square side'")
            gluing.append(((int(m[1]), m[2].lower()), (int(m[3]), m[4].lower())))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key.lower()] = val
    try:
        backend = values["backend"].lower()
        genus = int(values["genus"])
        resolution = int(values["resolution"])
        area = float(values.get("total_area", 1.0))
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if backend not in ("spectral", "grid"):
        raise ConfigError(f"unknown backend {backend!r}")
    if resolution < 1 or area <= 0 or genus < 0:
        raise ConfigError("resolution and total_area must be positive, genus non-negative")
    cfg = GeometryConfig(backend, genus, resolution, area, tuple(gluing))
    if backend == "grid":
        cfg = cfg.canonical()
    return cfg


def load_config(path) -> GeometryConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"geometry file not found: {path}")
    return parse_config(path.read_text())


def format_config(cfg: GeometryConfig) -> str:
    """Canonical text form; ``parse_config(format_config(c)) == c``."""
    cfg = cfg.canonical()
    lines = [f"backend = {cfg.backend}", f"genus = {cfg.genus}",
             f"resolution = {cfg.resolution}", f"total_area = {cfg.total_area!r}"]
    if cfg.backend == "grid":
        lines += ["", "[gluing]"]
        lines += [f"{a} {ea} -> {b} {eb}" for (a, ea), (b, eb) in cfg.gluing]
    return "\n".join(lines) + "\n"


# Ready-made gluing tables.
TORUS_GLUING = (((0, "right"), (0, "left")), ((0, "top"), (0, "bottom")))
L_SHAPE_GLUING = (
    ((0, "right"), (1, "left")),
    ((1, "right"), (0, "left")),
    ((0, "top"), (2, "bottom")),
    ((2, "top"), (0, "bottom")),
    ((1, "top"), (1, "bottom")),
    ((2, "right"), (2, "left")),
)


# ---------------------------------------------------------------------------
# array helpers


def apply_cells(mat, x: np.ndarray) -> np.ndarray:
    """Apply a (sparse or dense) cell matrix along axis -3 of ``x``."""
    x = np.asarray(x)
    moved = np.moveaxis(x, -3, 0)
    flat = moved.reshape(moved.shape[0], -1)
    out = mat @ flat
    out = np.asarray(out).reshape((mat.shape[0],) + moved.shape[1:])
    return np.moveaxis(out, 0, -3)


def dagger(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def as_field(values: np.ndarray) -> np.ndarray:
    """View a scalar coefficient array ``(..., n)`` as ``(..., n, 1, 1)``."""
    return np.asarray(values)[..., None, None]


def integer_rank(mat, prime: int = 2_147_483_629) -> int:
    """Exact rank of an integer matrix by Gaussian elimination modulo a prime.

    Surface coboundaries have unit elementary divisors, so the rank modulo any
    prime equals the rational rank.  Dense, meant for small matrices.
    """
    a = np.array(mat.todense() if sp.issparse(mat) else mat, dtype=np.int64) % prime
    rows, cols = a.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        nz = np.nonzero(a[rank:, c])[0]
        if nz.size == 0:
            continue
        p = rank + nz[0]
        a[[rank, p]] = a[[p, rank]]
        inv = pow(int(a[rank, c]), prime - 2, prime)
        a[rank] = (a[rank] * inv) % prime
        others = np.nonzero(a[:, c])[0]
        others = others[others != rank]
        if others.size:
            a[others] = (a[others] - np.outer(a[others, c], a[rank]) % prime) % prime
        rank += 1
    return rank


# ---------------------------------------------------------------------------
# surfaces


class TransverseSurface:
    """Common interface of the two backends.

    Attributes ``n0``, ``n1``, ``n2`` are the cell counts of each degree.  A
    2-cochain may be *dual* (located on the dual cells around vertices, so it
    has ``n0`` entries); on the spectral backend primal and dual coincide.
    """

    backend: str
    genus: int
    resolution: int
    total_area: float
    config: GeometryConfig

    # -- sizes -------------------------------------------------------------
    def count(self, degree: int, dual: bool = False) -> int:
        if degree == 2 and dual:
            return self.n0
        return (self.n0, self.n1, self.n2)[_check_degree(degree)]

    def euler_characteristic(self) -> int:
        return self.n0 - self.n1 + self.n2

    # -- metric ------------------------------------------------------------
    def weight(self, degree: int, dual: bool = False) -> np.ndarray:
        raise NotImplementedError

    def inner_arr(self, x, y, degree: int, dual: bool = False) -> np.ndarray:
        """Re sum_c w_c tr(x_c y_c^dagger), batched over leading axes."""
        w = self.weight(degree, dual)
        prod = np.einsum("...nij,...nij->...n", x, np.conj(y)).real
        return prod @ w

    def area_form(self) -> np.ndarray:
        """Primal 2-cochain of d(eta) (pointwise 1 / integrated cell area)."""
        raise NotImplementedError

    def integrate2(self, x, dual: bool = False) -> np.ndarray:
        """Integral of a 2-cochain array ``(..., n, r, r)`` -> ``(..., r, r)``."""
        raise NotImplementedError

    def betti(self) -> tuple[int, int, int]:
        r0, r1 = self.coboundary_ranks()
        return self.n0 - r0, self.n1 - r0 - r1, self.n2 - r1

    def star_defect(self, x) -> float:
        """tau_star = ||star star x + x|| / ||x|| on 1-cochains."""
        y = self.star1(self.star1(x)) + x
        den = math.sqrt(self.inner_arr(x, x, 1))
        return math.sqrt(self.inner_arr(y, y, 1)) / den if den else 0.0


class SpectralTorus(TransverseSurface):
    """Square flat torus with band-limited fields (|k| <= K per axis)."""

    backend = "spectral"
    genus = 1

    def __init__(self, resolution: int, total_area: float = 1.0):
        self.resolution = int(resolution)
        self.total_area = float(total_area)
        self.K = max(1, self.resolution // 2)
        self.N = 2 * self.K + 1
        m = 3 * self.K + 1
        self.M = m if m % 2 else m + 1
        self.P = self.N * self.N
        self.n0, self.n1, self.n2 = self.P, 2 * self.P, self.P
        self.side = math.sqrt(self.total_area)
        self.modes = np.fft.fftfreq(self.N, 1.0 / self.N).round().astype(int)
        ik = 2j * np.pi * self.modes / self.side
        self._ikx = ik[:, None, None, None]
        self._iky = ik[None, :, None, None]
        self._pad = self.modes % self.M
        self.config = GeometryConfig("spectral", 1, self.resolution, self.total_area)
        xs = np.arange(self.N) * self.side / self.N
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        self.points = np.stack([gx.ravel(), gy.ravel()], axis=1)

    # -- grids and transforms ---------------------------------------------
    def _grid(self, x, n=None):
        n = n or self.N
        return x.reshape(x.shape[:-3] + (n, n) + x.shape[-2:])

    def _flat(self, x):
        return x.reshape(x.shape[:-4] + (-1,) + x.shape[-2:])

    def spectrum(self, x):
        """Fourier coefficients c_k with x = sum_k c_k e^{2 pi i k.x / L}."""
        return sfft.fft2(self._grid(x), axes=(-4, -3)) / self.P

    def from_spectrum(self, c):
        return self._flat(sfft.ifft2(c, axes=(-4, -3)) * self.P)

    def _up(self, x):
        c = self.spectrum(x)
        shape = c.shape[:-4] + (self.M, self.M) + c.shape[-2:]
        big = np.zeros(shape, dtype=complex)
        big[..., self._pad[:, None], self._pad[None, :], :, :] = c
        return sfft.ifft2(big, axes=(-4, -3)) * self.M**2

    def _down(self, z):
        c = sfft.fft2(z, axes=(-4, -3)) / self.M**2
        c = c[..., self._pad[:, None], self._pad[None, :], :, :]
        return self.from_spectrum(c)

    # -- exterior calculus -------------------------------------------------
    def d0(self, x):
        c = sfft.fft2(self._grid(x), axes=(-4, -3))
        dx = sfft.ifft2(self._ikx * c, axes=(-4, -3))
        dy = sfft.ifft2(self._iky * c, axes=(-4, -3))
        return np.concatenate([self._flat(dx), self._flat(dy)], axis=-3)

    def d1(self, x):
        P = self.P
        cx = sfft.fft2(self._grid(x[..., :P, :, :]), axes=(-4, -3))
        cy = sfft.fft2(self._grid(x[..., P:, :, :]), axes=(-4, -3))
        return self._flat(sfft.ifft2(self._ikx * cy - self._iky * cx, axes=(-4, -3)))

    def star1(self, x):
        P = self.P
        return np.concatenate([-x[..., P:, :, :], x[..., :P, :, :]], axis=-3)

    def star0_2(self, x):
        return np.array(x, dtype=complex)

    def star2_0(self, x, dual: bool = True):
        return np.array(x, dtype=complex)

    def weight(self, degree, dual=False):
        return np.full(self.count(degree, dual), self.total_area / self.P)

    def area_form(self):
        return np.ones(self.P)

    def integrate2(self, x, dual=False):
        return np.sum(x, axis=-3) * (self.total_area / self.P)

    def components(self, x):
        return x[..., : self.P, :, :], x[..., self.P :, :, :]

    def product(self, p: int, q: int, x, y):
        """Dealiased wedge product with matrix multiplication (x first)."""
        _check_sum(p, q)
        up, down = self._up, self._down
        if p == 1 and q == 1:
            xs, ys = self.components(x), self.components(y)
            ux, uy = [up(c) for c in xs], [up(c) for c in ys]
            return down(ux[0] @ uy[1] - ux[1] @ uy[0])
        if p == 1:
            yy = up(y)
            return np.concatenate([down(up(c) @ yy) for c in self.components(x)], axis=-3)
        if q == 1:
            xx = up(x)
            return np.concatenate([down(xx @ up(c)) for c in self.components(y)], axis=-3)
        return down(up(x) @ up(y))

    def coboundary_ranks(self):
        # Block-diagonal in Fourier space: every nonzero wavevector contributes
        # rank one to d0 and to d1, the zero mode contributes nothing.
        nonzero = self.P - 1
        return nonzero, nonzero

    def mode_field(self, kx: int, ky: int) -> np.ndarray:
        """Samples of e^{2 pi i (kx x + ky y)/L} at the collocation points."""
        x, y = self.points[:, 0], self.points[:, 1]
        return np.exp(2j * np.pi * (kx * x + ky * y) / self.side)


class SquareTiledGrid(TransverseSurface):
    """Square-tiled translation surface refined into n x n cells per square."""

    backend = "grid"

    def __init__(self, config: GeometryConfig):
        config = config.canonical()
        self.config = config
        self.resolution = n = int(config.resolution)
        self.total_area = float(config.total_area)
        self.gluing = config.gluing
        n_sq = 1 + max(max(a[0], b[0]) for a, b in self.gluing)
        self.n_squares = n_sq
        self.h = math.sqrt(self.total_area / n_sq) / n
        self._build(n_sq, n)
        chi = self.euler_characteristic()
        genus2 = 2 - chi
        if genus2 % 2 or genus2 < 0:
            raise InvalidGluing(f"Euler characteristic {chi} is not that of a closed orientable surface")
        self.genus = genus2 // 2
        if self.genus != config.genus:
            raise GenusMismatch(f"declared genus {config.genus}, gluing gives genus {self.genus}")

    # -- topology ----------------------------------------------------------
    def _build(self, n_sq, n):
        right = {a[0]: b[0] for a, b in self.gluing if a[1] == "right"}
        top = {a[0]: b[0] for a, b in self.gluing if a[1] == "top"}

        def find(par, i):
            root = i
            while par[root] != root:
                root = par[root]
            while par[i] != root:
                par[i], i = root, par[i]
            return root

        def union(par, i, j):
            ri, rj = find(par, i), find(par, j)
            if ri != rj:
                par[max(ri, rj)] = min(ri, rj)

        nv = n + 1
        vid = lambda s, i, j: (s * nv + i) * nv + j
        hid = lambda s, i, j: (s * n + i) * nv + j          # i < n, j <= n
        vtid = lambda s, i, j: (s * nv + i) * n + j         # i <= n, j < n
        vpar = list(range(n_sq * nv * nv))
        hpar = list(range(n_sq * n * nv))
        tpar = list(range(n_sq * nv * n))
        for s in range(n_sq):
            r, t = right[s], top[s]
            for k in range(nv):
                union(vpar, vid(s, n, k), vid(r, 0, k))
                union(vpar, vid(s, k, n), vid(t, k, 0))
            for k in range(n):
                union(tpar, vtid(s, n, k), vtid(r, 0, k))
                union(hpar, hid(s, k, n), hid(t, k, 0))

        def relabel(par):
            roots = np.array([find(par, i) for i in range(len(par))])
            uniq, inv = np.unique(roots, return_inverse=True)
            return inv, len(uniq)

        vmap, V = relabel(vpar)
        hmap, Eh = relabel(hpar)
        tmap, Ev = relabel(tpar)
        self.n0, self.n1, self.n2 = V, Eh + Ev, n_sq * n * n
        self.n_horizontal = Eh
        F = self.n2

        face_edges = np.zeros((F, 4), dtype=np.int64)   # bottom, right, top, left
        face_verts = np.zeros((F, 4), dtype=np.int64)   # bl, br, tr, tl
        edge_verts = np.zeros((self.n1, 2), dtype=np.int64)
        face_pos = np.zeros((F, 3))
        vert_pos = np.zeros((V, 3))
        f = 0
        for s in range(n_sq):
            for i in range(n):
                for j in range(n):
                    b, tp = hmap[hid(s, i, j)], hmap[hid(s, i, j + 1)]
                    lf, rt = Eh + tmap[vtid(s, i, j)], Eh + tmap[vtid(s, i + 1, j)]
                    corners = [vmap[vid(s, i, j)], vmap[vid(s, i + 1, j)],
                               vmap[vid(s, i + 1, j + 1)], vmap[vid(s, i, j + 1)]]
                    face_edges[f] = (b, rt, tp, lf)
                    face_verts[f] = corners
                    edge_verts[b] = corners[0], corners[1]
                    edge_verts[tp] = corners[3], corners[2]
                    edge_verts[lf] = corners[0], corners[3]
                    edge_verts[rt] = corners[1], corners[2]
                    face_pos[f] = (s, (i + 0.5) * self.h, (j + 0.5) * self.h)
                    vert_pos[corners[0]] = (s, i * self.h, j * self.h)
                    f += 1
        self.face_edges, self.face_verts, self.edge_verts = face_edges, face_verts, edge_verts
        self.face_pos, self.vertex_pos = face_pos, vert_pos
        self.horizontal = np.arange(self.n1) < Eh
        edge_pos = np.zeros((self.n1, 3))
        for f in range(F):
            s, x, y = face_pos[f]
            hh = self.h / 2
            edge_pos[face_edges[f, 0]] = (s, x, y - hh)
            edge_pos[face_edges[f, 3]] = (s, x - hh, y)
        self.edge_pos = edge_pos

        rows = np.repeat(np.arange(self.n1), 2)
        cols = edge_verts.ravel()
        vals = np.tile([-1, 1], self.n1)
        self.D0 = sp.csr_matrix((vals, (rows, cols)), shape=(self.n1, V), dtype=np.int64)
        rows = np.repeat(np.arange(F), 4)
        vals = np.tile([1, 1, -1, -1], F)
        self.D1 = sp.csr_matrix((vals, (rows, face_edges.ravel())), shape=(F, self.n1), dtype=np.int64)
        self.D0f, self.D1f = self.D0.astype(float), self.D1.astype(float)

        self.face_area = np.full(F, self.h**2)
        dual = np.zeros(V)
        np.add.at(dual, face_verts.ravel(), self.h**2 / 4)
        self.dual_area = dual

        # neighbouring faces of each edge, for the staggered star
        below = np.full(self.n1, -1)
        above = np.full(self.n1, -1)
        for f in range(F):
            above[face_edges[f, 0]] = f      # face above its bottom edge
            below[face_edges[f, 2]] = f      # face below its top edge
            above[face_edges[f, 3]] = f      # face right of its left edge
            below[face_edges[f, 1]] = f      # face left of its right edge
        rows, cols, vals = [], [], []
        for e in range(self.n1):
            fa, fb = above[e], below[e]
            if self.horizontal[e]:
                # star(dy) = -dx: new dx value is minus the local dy average
                for fc in (fa, fb):
                    for k in (1, 3):
                        rows.append(e), cols.append(face_edges[fc, k]), vals.append(-0.25)
            else:
                for fc in (fa, fb):
                    for k in (0, 2):
                        rows.append(e), cols.append(face_edges[fc, k]), vals.append(0.25)
        self.S1 = sp.csr_matrix((vals, (rows, cols)), shape=(self.n1, self.n1))
        avg_rows = face_verts.ravel()
        avg_cols = np.repeat(np.arange(F), 4)
        cnt = np.bincount(avg_rows, minlength=V).astype(float)
        self.face_to_vertex = sp.csr_matrix(
            (1.0 / cnt[avg_rows], (avg_rows, avg_cols)), shape=(V, F))

    # -- exterior calculus -------------------------------------------------
    def d0(self, x):
        return apply_cells(self.D0f, x)

    def d1(self, x):
        return apply_cells(self.D1f, x)

    def star1(self, x):
        return apply_cells(self.S1, x)

    def star0_2(self, x):
        return np.asarray(x, dtype=complex) * self.dual_area[:, None, None]

    def star2_0(self, x, dual: bool = True):
        """Inverse of ``star0_2`` on dual cochains; primal 2-cochains are
        divided by their face area and averaged onto vertices."""
        x = np.asarray(x, dtype=complex)
        if dual:
            return x / self.dual_area[:, None, None]
        return apply_cells(self.face_to_vertex, x / self.face_area[:, None, None])

    def weight(self, degree, dual=False):
        if degree == 0:
            return self.dual_area
        if degree == 1:
            return np.ones(self.n1)
        return 1.0 / (self.dual_area if dual else self.face_area)

    def area_form(self):
        return self.face_area.copy()

    def integrate2(self, x, dual=False):
        return np.sum(x, axis=-3)

    def edge_average(self, x):
        """Average of a 0-cochain over the two endpoints of each edge."""
        return 0.5 * (x[..., self.edge_verts[:, 0], :, :] + x[..., self.edge_verts[:, 1], :, :])

    def face_average(self, x):
        return 0.25 * sum(x[..., self.face_verts[:, k], :, :] for k in range(4))

    def face_sides(self, x):
        """Values of a 1-cochain on (bottom, right, top, left) of each face."""
        return tuple(x[..., self.face_edges[:, k], :, :] for k in range(4))

    def product(self, p: int, q: int, x, y):
        _check_sum(p, q)
        if p == 1 and q == 1:
            xb, xr, xt, xl = self.face_sides(x)
            yb, yr, yt, yl = self.face_sides(y)
            return 0.25 * ((xb + xt) @ (yl + yr) - (xl + xr) @ (yb + yt))
        if p == 0 and q == 0:
            return x @ y
        if p == 0:
            return (self.edge_average(x) if q == 1 else self.face_average(x)) @ y
        return x @ (self.edge_average(y) if p == 1 else self.face_average(y))

    def coboundary_ranks(self):
        # d0 is the signed incidence matrix of the 1-skeleton and the
        # transpose of d1 that of the dual graph; the rank of a signed
        # incidence matrix is (#nodes - #connected components).
        cols = self.D1.tocsc()
        cols.eliminate_zeros()
        for e in range(self.n1):
            data = cols.data[cols.indptr[e]:cols.indptr[e + 1]]
            if data.size and sorted(data.tolist()) != [-1, 1]:
                raise InvalidGluing("inconsistent face orientations")
        adj0 = abs(self.D0.T) @ abs(self.D0)
        adj2 = abs(self.D1) @ abs(self.D1.T)
        c0 = connected_components(adj0, directed=False)[0]
        c2 = connected_components(adj2, directed=False)[0]
        return self.n0 - c0, self.n2 - c2


# ---------------------------------------------------------------------------
# public scalar-cochain API


@dataclass(frozen=True)
class ScalarCochain:
    degree: int
    values: np.ndarray
    dual: bool = False

    def __post_init__(self):
        _check_degree(self.degree)
        object.__setattr__(self, "values", np.asarray(self.values))


def build_surface(config) -> TransverseSurface:
    """Construct a surface from a ``GeometryConfig`` (or a path to one)."""
    if not isinstance(config, GeometryConfig):
        config = load_config(config)
    if config.backend == "spectral":
        if config.genus != 1:
            raise GenusMismatch("the spectral backend only represents genus 1")
        return SpectralTorus(config.resolution, config.total_area)
    if not config.gluing:
        raise InvalidGluing("grid backend needs a gluing table")
    return SquareTiledGrid(config)


def grid_config(gluing, resolution, genus, total_area=1.0) -> GeometryConfig:
    return GeometryConfig("grid", genus, resolution, total_area, tuple(gluing)).canonical()


def _check_degree(k):
    if k not in (0, 1, 2):
        raise DegreeOutOfRange(f"degree {k} not in 0..2")
    return k


def _check_sum(p, q):
    _check_degree(p), _check_degree(q)
    if p + q > 2:
        raise DegreeOutOfRange(f"degrees {p}+{q} exceed 2")


def _check_len(surface, w: ScalarCochain):
    if w.values.shape[0] != surface.count(w.degree, w.dual):
        raise DegreeMismatch(f"{w.values.shape[0]} values for a degree-{w.degree} cochain")


def _lift(w: ScalarCochain):
    return as_field(np.asarray(w.values, dtype=complex))


def _drop(x):
    return x[..., 0, 0]


def d(surface: TransverseSurface, w: ScalarCochain) -> ScalarCochain:
    _check_len(surface, w)
    if w.degree == 0:
        return ScalarCochain(1, _drop(surface.d0(_lift(w))))
    if w.degree == 1:
        return ScalarCochain(2, _drop(surface.d1(_lift(w))))
    raise DegreeOutOfRange("d is defined on degrees 0 and 1")


def star1(surface, w: ScalarCochain) -> ScalarCochain:
    if w.degree != 1:
        raise DegreeOutOfRange("star1 acts on 1-cochains")
    _check_len(surface, w)
    return ScalarCochain(1, _drop(surface.star1(_lift(w))))


def star0_2(surface, f: ScalarCochain) -> ScalarCochain:
    if f.degree != 0:
        raise DegreeOutOfRange("star0_2 acts on 0-cochains")
    _check_len(surface, f)
    return ScalarCochain(2, _drop(surface.star0_2(_lift(f))), dual=surface.backend == "grid")


def star2_0(surface, w: ScalarCochain) -> ScalarCochain:
    if w.degree != 2:
        raise DegreeOutOfRange("star2_0 acts on 2-cochains")
    _check_len(surface, w)
    return ScalarCochain(0, _drop(surface.star2_0(_lift(w), dual=w.dual)))


def wedge(surface, w: ScalarCochain, t: ScalarCochain) -> ScalarCochain:
    _check_sum(w.degree, t.degree)
    if w.dual or t.dual:
        raise DegreeMismatch("wedge products of dual cochains are not defined")
    _check_len(surface, w), _check_len(surface, t)
    out = surface.product(w.degree, t.degree, _lift(w), _lift(t))
    return ScalarCochain(w.degree + t.degree, _drop(out))


def inner(surface, w: ScalarCochain, t: ScalarCochain) -> float:
    if w.degree != t.degree or w.dual != t.dual:
        raise DegreeMismatch("inner product needs equal degrees")
    _check_len(surface, w), _check_len(surface, t)
    return float(surface.inner_arr(_lift(w), _lift(t), w.degree, w.dual))


def complex_split(surface, w: ScalarCochain):
    """(1,0) and (0,1) parts: P10 = (1 + i star)/2, P01 = (1 - i star)/2."""
    if w.degree != 1:
        raise DegreeOutOfRange("complex_split acts on 1-cochains")
    s = star1(surface, w).values
    v = np.asarray(w.values, dtype=complex)
    return ScalarCochain(1, 0.5 * (v + 1j * s)), ScalarCochain(1, 0.5 * (v - 1j * s))


def area_form(surface) -> ScalarCochain:
    return ScalarCochain(2, surface.area_form())
