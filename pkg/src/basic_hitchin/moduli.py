"""Metric, quaternion triple and Kahler forms on the moduli tangent space H^1."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .deformation import (
    DeformationComplex,
    assemble_matrix,
    chart_jacobian,
    chart_tangent_field,
    kuranishi_inverse,
)


# ---------------------------------------------------------------------------
# quaternion triple on pairs of 1-forms


def quaternion_apply(q: str, a, b, surface):
    """I(a,b) = (*a, -*b), J(a,b) = (-b, a), K(a,b) = (-*b, -*a)."""
    star = surface.star1
    q = q.upper()
    if q == "I":
        return star(a), -star(b)
    if q == "J":
        return -b, a
    if q == "K":
        return -star(b), -star(a)
    raise ValueError(f"unknown quaternion unit {q!r}")


def quaternion_matrix(cx: DeformationComplex, q: str) -> np.ndarray:
    s = cx.surface
    return assemble_matrix(lambda xs: list(quaternion_apply(q, xs[0], xs[1], s)), cx.L1, cx.L1)


def metric_g(cx: DeformationComplex, alpha, beta) -> float:
    """-int tr(a1 ^ *b1 + a2 ^ *b2), the L2 product of weighted coordinates."""
    return float(np.asarray(alpha) @ np.asarray(beta))


def _integral_trace(surface, x) -> float:
    return float(np.trace(surface.integrate2(x), axis1=-2, axis2=-1).real)


def kahler_value(cx: DeformationComplex, q: str, alpha, beta) -> float:
    """omega_Q(alpha, beta) evaluated from its wedge-product definition."""
    s = cx.surface
    a1, a2 = cx.L1.unpack(alpha)
    b1, b2 = cx.L1.unpack(beta)
    w = lambda x, y: s.product(1, 1, x, y)
    st = s.star1
    q = q.upper()
    if q == "I":
        return _integral_trace(s, w(a1, b1) - w(a2, b2))
    if q == "J":
        return _integral_trace(s, w(a1, st(b2)) - w(a2, st(b1)))
    if q == "K":
        return -_integral_trace(s, w(a1, b2) + w(a2, b1))
    raise ValueError(f"unknown quaternion unit {q!r}")


# ---------------------------------------------------------------------------
# frame


@dataclass
class ModuliTangentFrame:
    basis: np.ndarray            # columns: orthonormal basis of H^1
    gram: np.ndarray
    quaternions: dict            # "I", "J", "K" -> matrices on H^1
    kahler: dict                 # "I", "J", "K" -> omega matrices
    leakage: dict                # ||(1 - P) Q b|| per unit, max over basis

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def build_frame(cx: DeformationComplex) -> ModuliTangentFrame:
    basis = cx.harmonic_basis(1)
    n = basis.shape[1]
    gram = basis.T @ basis
    quats, kahler, leak = {}, {}, {}
    for q in "IJK":
        qm = quaternion_matrix(cx, q)
        image = qm @ basis
        quats[q] = basis.T @ image
        leak[q] = float(np.max(np.linalg.norm(image - basis @ quats[q], axis=0))) if n else 0.0
        kahler[q] = np.array([[kahler_value(cx, q, basis[:, i], basis[:, j]) for j in range(n)]
                              for i in range(n)])
    return ModuliTangentFrame(basis, gram, quats, kahler, leak)


def kahler_forms(frame: ModuliTangentFrame):
    return frame.kahler["I"], frame.kahler["J"], frame.kahler["K"]


def quaternion_report(frame: ModuliTangentFrame) -> dict:
    """Deviations from the quaternion relations, compatibility and invariance."""
    n = frame.dim
    eye = np.eye(n)
    I, J, K = (frame.quaternions[q] for q in "IJK")
    dev = lambda m: float(np.max(np.abs(m))) if m.size else 0.0
    out = {
        "dim": n,
        "I2": dev(I @ I + eye), "J2": dev(J @ J + eye), "K2": dev(K @ K + eye),
        "K_minus_IJ": dev(K - I @ J),
        "leakage": dict(frame.leakage),
        "gram_deviation": dev(frame.gram - eye),
    }
    for q, m in frame.quaternions.items():
        out[f"isometry_{q}"] = dev(m.T @ frame.gram @ m - frame.gram)
        out[f"compat_{q}"] = dev(frame.kahler[q] - frame.gram @ m)
        out[f"skew_{q}"] = dev(frame.kahler[q] + frame.kahler[q].T)
    return out


# ---------------------------------------------------------------------------
# normal coordinates


def _loglog_slope(eps, vals):
    eps, vals = np.asarray(eps, float), np.asarray(vals, float)
    if np.any(vals <= 0):
        return math.nan
    return float(np.polyfit(np.log(eps), np.log(vals), 1)[0])


def _chart_values(cx, x, ys, eps):
    """g and omega_I on the extended fields at the chart point over eps*x."""
    res = kuranishi_inverse(cx, x, eps, tol=1e-13)
    jac, cxa, lmat = chart_jacobian(cx, res.beta)
    hb = cxa.harmonic_basis(1)
    vecs = []
    for y in ys:
        ybar = chart_tangent_field(cx, res.beta, y, jac=jac)
        moved = lmat @ ybar
        vecs.append(hb @ (hb.T @ moved))
    (u, v) = vecs
    return u @ v, kahler_value(cxa, "I", u, v), res


def normal_coordinate_check(cx: DeformationComplex, steps=(1e-2, 5e-3, 2.5e-3),
                            triples=None, n_triples: int = 3, seed: int = 0) -> dict:
    """Centred differences of g(Y_bar, Z_bar) and omega_I(Y_bar, Z_bar) along
    chart curves c(t) over t*X, for basis directions X, Y, Z of H^1.

    Reports |f(eps) - f(-eps)| / eps for every step and the log-log slope.
    """
    basis = cx.harmonic_basis(1)
    n = basis.shape[1]
    if triples is None:
        rng = np.random.default_rng(seed)
        triples = [tuple(rng.choice(n, size=3, replace=n < 3)) for _ in range(n_triples)]
    rows = []
    for (i, j, k) in triples:
        x, y, z = basis[:, i], basis[:, j], basis[:, k]
        dg, dw = [], []
        for eps in steps:
            gp, wp, rp = _chart_values(cx, x, (y, z), eps)
            gm, wm, rm = _chart_values(cx, x, (y, z), -eps)
            dg.append(abs(gp - gm) / eps)
            dw.append(abs(wp - wm) / eps)
        rows.append({"triple": [int(i), int(j), int(k)], "steps": list(steps),
                     "dg_over_eps": dg, "domega_over_eps": dw,
                     "slope_g": _loglog_slope(steps, dg), "slope_omega": _loglog_slope(steps, dw),
                     "max_abs_g": max(dg), "max_abs_omega": max(dw)})
    return {"dim_h1": n, "rows": rows,
            "min_slope_g": min((r["slope_g"] for r in rows), default=math.nan),
            "min_slope_omega": min((r["slope_omega"] for r in rows), default=math.nan),
            "max_abs_g": max((r["max_abs_g"] for r in rows), default=0.0),
            "max_abs_omega": max((r["max_abs_omega"] for r in rows), default=0.0)}
