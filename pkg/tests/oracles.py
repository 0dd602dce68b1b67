"""Independent reference computations used by the tests.

Nothing here calls the assembled deformation operators: the adjoints are the
closed formulas nabla^* = -star nabla star and Phi^* = -star [Phi, star .],
written with the surface primitives only.
"""

from __future__ import annotations

import numpy as np

from basic_hitchin.geometry import dagger
from basic_hitchin.lie import from_coords


def random_skew(rng, n, r, scale=1.0):
    return scale * from_coords(rng.normal(size=(n, r * r)), r)


def bracket_10(s, x, f):
    """[x, f] for a 1-form x and a 0-form f."""
    return s.product(1, 0, x, f) - s.product(0, 1, f, x)


def bracket_11(s, x, y):
    return s.product(1, 1, x, y) + s.product(1, 1, y, x)


def nabla0(model, st, f):
    return model.cov_d0(st, f)


def nabla1(model, st, x):
    return model.cov_d1(st, x)


def star_2to0(s, u, dual=False):
    return s.star2_0(u, dual=dual) if s.backend == "grid" else s.star2_0(u)


def nabla_adj_2(model, st, u, dual=False):
    """nabla^* on 2-forms: -star nabla star u (a 1-form)."""
    s = model.surface
    return -s.star1(nabla0(model, st, star_2to0(s, u, dual)))


def nabla_adj_1(model, st, a):
    """nabla^* on 1-forms: -star nabla star a (a 0-form)."""
    s = model.surface
    return -star_2to0(s, nabla1(model, st, s.star1(a)))


def ad_adj_2(model, p, u, dual=False):
    """Adjoint of x -> [p, x] from 1-forms to 2-forms: -star [p, star u]."""
    s = model.surface
    return -s.star1(bracket_10(s, p, star_2to0(s, u, dual)))


def ad_adj_1(model, p, b):
    """Adjoint of f -> [p, f] from 0-forms to 1-forms: -star [p, star b]."""
    s = model.surface
    return -star_2to0(s, bracket_11(s, p, s.star1(b)))


def d1_adjoint(model, st, a, b):
    return nabla_adj_1(model, st, a) + ad_adj_1(model, st.Phi, b)


def d2_adjoint(model, st, u, v, w):
    """D2^*(u, v, w) = (nabla^* u + ad_Phi^* v + ad_{star Phi}^* w,
                        -ad_Phi^* u + nabla^* v - star nabla^* w)."""
    s = model.surface
    dual = s.backend == "grid"
    phi, sphi = st.Phi, s.star1(st.Phi)
    a = nabla_adj_2(model, st, u) + ad_adj_2(model, phi, v) + ad_adj_2(model, sphi, w, dual)
    b = -ad_adj_2(model, phi, u) + nabla_adj_2(model, st, v) - s.star1(nabla_adj_2(model, st, w, dual))
    return a, b


# ---------------------------------------------------------------------------
# smooth sampled fields on square-tiled grids


def _smooth_scalar(x, y, period, k, phase):
    t = 2 * np.pi / period
    return np.sin(t * (k[0] * x + k[1] * y) + phase)


def smooth_grid_fields(grid, rank, seed=0, n_modes=2):
    """Smooth u(r)-valued 1-, 2- and dual 2-cochains on a square-tiled grid.

    Each coordinate is a short sum of trigonometric modes periodic on the unit
    square, so fields are smooth on every translation surface built from it.
    Returns a function ``sample(kind, scale)`` producing fresh fields.
    """
    rng = np.random.default_rng(seed)
    period = grid.h * grid.resolution
    h = grid.h

    def coeffs():
        ks = rng.integers(-1, 2, size=(rank * rank, n_modes, 2))
        ph = rng.uniform(0, 2 * np.pi, size=(rank * rank, n_modes))
        amp = rng.normal(size=(rank * rank, n_modes))
        return ks, ph, amp

    def evaluate(pos):
        ks, ph, amp = coeffs()
        x, y = pos[:, 1], pos[:, 2]
        c = np.zeros((len(x), rank * rank))
        for a in range(rank * rank):
            for m in range(n_modes):
                c[:, a] += amp[a, m] * _smooth_scalar(x, y, period, ks[a, m], ph[a, m])
        return from_coords(c, rank)

    def sample(kind, scale=1.0):
        if kind == "one":
            return scale * h * evaluate(grid.edge_pos)
        if kind == "two":
            return scale * h * h * evaluate(grid.face_pos)
        if kind == "dual":
            return scale * grid.dual_area[:, None, None] * evaluate(grid.vertex_pos)
        raise ValueError(kind)

    return sample


def low_mode_field(torus, rank, degree, rng, modes=1, scale=1.0):
    """Band-limited skew field on the spectral torus with |k| <= modes."""
    n = torus.count(degree)
    f = random_skew(rng, n, rank)
    blocks = [f] if degree != 1 else [f[: torus.P], f[torus.P:]]
    out = []
    for blk in blocks:
        c = torus.spectrum(blk)
        keep = np.abs(torus.modes) <= modes
        c = c * (keep[:, None] & keep[None, :])[:, :, None, None]
        v = torus.from_spectrum(c)
        out.append(0.5 * (v - dagger(v)))
    v = np.concatenate(out, axis=0) if degree == 1 else out[0]
    return scale * v / max(np.max(np.abs(v)), 1e-300)


def symbolic_convolution(torus, x, y):
    """Pointwise product of two band-limited scalar fields computed by a
    direct double sum over Fourier modes (no FFT, no padding)."""
    cx, cy = torus.spectrum(x)[..., 0, 0], torus.spectrum(y)[..., 0, 0]
    K, ms = torus.K, torus.modes
    out = np.zeros_like(cx)
    idx = {int(k): i for i, k in enumerate(ms)}
    for i1, k1 in enumerate(ms):
        for j1, l1 in enumerate(ms):
            if cx[i1, j1] == 0:
                continue
            for i2, k2 in enumerate(ms):
                for j2, l2 in enumerate(ms):
                    k, l = int(k1 + k2), int(l1 + l2)
                    if abs(k) <= K and abs(l) <= K:
                        out[idx[k], idx[l]] += cx[i1, j1] * cy[i2, j2]
    return torus.from_spectrum(out[..., None, None])
