"""Residual, energy and a certified solver for the basic Hitchin equations."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .deformation import Layout, assemble_matrix, count_kernel, level_layouts
from .errors import GapTooSmall, NaNDetected, NewtonStall, NonConvergence
from .forms import HitchinPair, MatCochain, degree_of_bundle, model_for
from .lie import expm_skew, from_coords


def _norms(surface, parts):
    grid = surface.backend == "grid"
    return tuple(math.sqrt(max(float(surface.inner_arr(x, x, 2, dual=(i == 2 and grid))), 0.0))
                 for i, x in enumerate(parts))


def residual(pair: HitchinPair):
    """(F - Phi^Phi, nabla Phi, nabla star Phi) and their L2 norms.

    On the grid the third entry is the covariant divergence of Phi, a dual
    2-cochain located at the vertices.
    """
    model = model_for(pair.surface, pair.rank)
    st = model.state(pair.A.values, pair.Phi.values)
    parts = model.residual(st)
    s = pair.surface
    cochains = (MatCochain(s, 2, parts[0]), MatCochain(s, 2, parts[1]),
                MatCochain(s, 2, parts[2], dual=s.backend == "grid"))
    return cochains, _norms(s, parts)


def energy(pair: HitchinPair) -> float:
    return float(sum(n * n for n in residual(pair)[1]))


def energy_gradient(pair: HitchinPair):
    """L2 gradient (G_A, G_Phi) of the energy: dE[a, b] = <G_A, a> + <G_Phi, b>."""
    model = model_for(pair.surface, pair.rank)
    st = model.state(pair.A.values, pair.Phi.values)
    _, l1, l2 = level_layouts(pair.surface, pair.rank)
    jac = assemble_matrix(lambda xs: list(model.linearize(st, xs[0], xs[1])), l1, l2)
    g = 2.0 * jac.T @ l2.pack(list(model.residual(st)))
    # unpacking divides by sqrt(w), which turns the coordinate gradient into
    # the L2 gradient since the packed coordinates are sqrt(w) times values
    ga, gb = l1.unpack(g)
    return MatCochain(pair.surface, 1, ga), MatCochain(pair.surface, 1, gb)


# ---------------------------------------------------------------------------
# configuration and report


@dataclass
class SolveConfig:
    rank: int = 1
    max_iterations: int = 200
    residual_tolerance: float = 1e-8
    policy: str = "gauss-newton"          # or "gradient"
    step_size: float = 1.0
    gauge_refix_period: int = 10
    seed: int = 0
    init_amplitude: float = 0.3
    retry_budget: int = 3

    def __post_init__(self):
        if self.residual_tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.policy not in ("gauss-newton", "gradient"):
            raise ValueError(f"unknown policy {self.policy!r}")


@dataclass
class SolveReport:
    residuals: tuple
    iterations: int
    energy_history: list
    verdict: str
    ker_d1_dim: int | None
    degree: float
    wall_time: float
    converged: bool
    refixes: int = 0
    seed: int | None = None
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {"residuals": list(self.residuals), "iterations": self.iterations,
                "energy_history": self.energy_history, "verdict": self.verdict,
                "ker_d1_dim": self.ker_d1_dim, "degree": self.degree,
                "wall_time": self.wall_time, "converged": self.converged,
                "gauge_refixes": self.refixes, "seed": self.seed, "notes": self.notes}


# ---------------------------------------------------------------------------
# irreducibility and gauge fixing


def irreducibility(pair: HitchinPair):
    """('irreducible' | 'reducible' | 'undetermined', dim ker D1)."""
    model = model_for(pair.surface, pair.rank)
    st = model.state(pair.A.values, pair.Phi.values)
    l0, l1, _ = level_layouts(pair.surface, pair.rank)
    d1 = assemble_matrix(lambda xs: list(model.gauge_generator(st, xs[0])), l0, l1)
    try:
        info = count_kernel(np.linalg.eigvalsh(d1.T @ d1))
    except GapTooSmall:
        return "undetermined", None
    return ("irreducible" if info.dim == 1 else "reducible"), info.dim


def _difference(model, st, ref):
    """Displacement (a, b) with st = displace(ref, a, b)."""
    if hasattr(st, "U"):
        from .lie import logm_unitary
        from .geometry import dagger
        a = logm_unitary(st.U @ dagger(ref.U))
    else:
        a = st.A - ref.A
    return a, st.Phi - ref.Phi


def coulomb_project(pair: HitchinPair, reference: HitchinPair, tol: float = 1e-9,
                    max_iter: int = 50):
    """Gauge-transform ``pair`` into the Coulomb slice through ``reference``.

    Newton iteration on the gauge parameter with the linearisation
    D1^* D1 at the reference.  Returns (pair, accumulated gauge field).
    """
    s, r = pair.surface, pair.rank
    model = model_for(s, r)
    ref = model.state(reference.A.values, reference.Phi.values)
    l0, l1, _ = level_layouts(s, r)
    d1 = assemble_matrix(lambda xs: list(model.gauge_generator(ref, xs[0])), l0, l1)
    lam, vec = np.linalg.eigh(d1.T @ d1)
    k = count_kernel(lam).dim
    lam, vec = lam[k:], vec[:, k:]
    A, Phi = pair.A.values, pair.Phi.values
    g_total = np.broadcast_to(np.eye(r, dtype=complex), (s.n0, r, r)).copy()
    last, floor = math.inf, None
    for _ in range(max_iter):
        alpha = l1.pack(list(_difference(model, model.state(A, Phi), ref)))
        slice_res = np.linalg.norm(d1.T @ alpha)
        if floor is None:
            # rounding floor of D1^* alpha once alpha is a pure gauge remnant
            d1_norm = math.sqrt(max(lam[-1], 0.0)) if lam.size else 0.0
            floor = 1e3 * np.finfo(float).eps * d1_norm * max(1.0, np.linalg.norm(alpha))
        if slice_res <= tol * max(np.linalg.norm(alpha), 1e-300) or slice_res <= floor:
            return HitchinPair.from_arrays(s, A, Phi), g_total
        if slice_res > 2 * last:
            raise NewtonStall(f"Coulomb projection diverging (slice residual {slice_res:.2e})")
        last = slice_res
        f = -(vec @ ((vec.T @ (d1.T @ alpha)) / lam))
        g = expm_skew(l0.unpack(f)[0])
        A, Phi = model.gauge_transform(A, Phi, g)
        A, Phi = 0.5 * (A - np.conj(np.swapaxes(A, -1, -2))), 0.5 * (Phi - np.conj(np.swapaxes(Phi, -1, -2)))
        g_total = g_total @ g
    raise NewtonStall("Coulomb projection did not reach the slice")


# ---------------------------------------------------------------------------
# solver


def random_pair(surface, rank, amplitude, rng) -> HitchinPair:
    c = rng.normal(size=(2, surface.n1, rank * rank))
    A, Phi = (amplitude * from_coords(x, rank) for x in c)
    if surface.backend == "grid":
        A = A * surface.h * 4     # link angles of order amplitude per unit length
        Phi = Phi * surface.h * 4
    return HitchinPair.from_arrays(surface, A, Phi)


def solve(initial: HitchinPair, config: SolveConfig | None = None, raise_on_failure=False):
    """Minimise the residual energy from ``initial``.

    Each iteration computes a descent direction (minimum-norm Gauss-Newton
    step, or the negative energy gradient) and backtracks until the Armijo
    condition holds, so accepted steps never increase the energy.  Every
    ``gauge_refix_period`` iterations the iterate is moved into the Coulomb
    slice through the previous refix point.
    """
    config = config or SolveConfig(rank=initial.rank)
    t0 = time.perf_counter()
    s, r = initial.surface, initial.rank
    model = model_for(s, r)
    _, l1, l2 = level_layouts(s, r)
    st = model.state(initial.A.values, initial.Phi.values)
    notes, history, refixes = [], [], 0
    anchor = initial

    def evaluate(state):
        res = l2.pack(list(model.residual(state)))
        if not np.all(np.isfinite(res)):
            raise NaNDetected("non-finite residual")
        return res, float(res @ res)

    res, en = evaluate(st)
    history.append(en)
    it = 0
    tol = config.residual_tolerance

    def converged(state):
        return max(_norms(s, model.residual(state))) <= tol

    while not converged(st) and it < config.max_iterations:
        it += 1
        jac = assemble_matrix(lambda xs: list(model.linearize(st, xs[0], xs[1])), l1, l2)
        grad = 2.0 * jac.T @ res
        if config.policy == "gauss-newton":
            step = -np.linalg.lstsq(jac, res, rcond=1e-12)[0]
        else:
            step = -config.step_size * grad
        slope = float(grad @ step)
        if slope >= 0:
            step, slope = -grad, -float(grad @ grad)
        t, accepted = 1.0, False
        for _ in range(40):
            a, b = l1.unpack(t * step)
            trial = model.displace(st, a, b)
            res_t, en_t = evaluate(trial)
            if en_t <= en + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            notes.append(f"line search failed at iteration {it}")
            break
        st, res, en = trial, res_t, en_t
        history.append(en)
        if config.gauge_refix_period and it % config.gauge_refix_period == 0:
            current = HitchinPair.from_arrays(s, st.A, st.Phi)
            try:
                projected, _ = coulomb_project(current, anchor)
                st = model.state(projected.A.values, projected.Phi.values)
                res, en = evaluate(st)
                anchor = projected
                refixes += 1
            except (NewtonStall, GapTooSmall) as exc:
                notes.append(f"gauge refix skipped at iteration {it}: {exc}")
                anchor = current

    out = HitchinPair.from_arrays(s, 0.5 * (st.A - np.conj(np.swapaxes(st.A, -1, -2))),
                                  0.5 * (st.Phi - np.conj(np.swapaxes(st.Phi, -1, -2))))
    norms = residual(out)[1]
    ok = max(norms) <= tol
    verdict, kdim = irreducibility(out)
    report = SolveReport(norms, it, history, verdict, kdim, degree_of_bundle(out),
                         time.perf_counter() - t0, ok, refixes, config.seed, notes)
    if not ok and raise_on_failure:
        raise NonConvergence(f"residual {max(norms):.2e} above tolerance", report)
    return out, report


def direct_sum(pairs) -> HitchinPair:
    """Block-diagonal pair built from pairs of lower rank on one surface."""
    s = pairs[0].surface
    r = sum(p.rank for p in pairs)
    A = np.zeros((s.n1, r, r), complex)
    Phi = np.zeros_like(A)
    o = 0
    for p in pairs:
        k = p.rank
        A[:, o:o + k, o:o + k] = p.A.values
        Phi[:, o:o + k, o:o + k] = p.Phi.values
        o += k
    return HitchinPair.from_arrays(s, A, Phi)


def find_irreducible(surface, config: SolveConfig, base: HitchinPair | None = None):
    """Perturb a direct-sum solution at random and re-solve until the verdict
    is irreducible or the retry budget is spent.  Returns (pair, report, attempts)."""
    r = config.rank
    if base is None:
        base = direct_sum([HitchinPair.zero(surface, 1)] * r) if r > 1 else HitchinPair.zero(surface, 1)
    attempts = []
    best = None
    for k in range(config.retry_budget):
        seed = config.seed + k
        rng = np.random.default_rng(seed)
        kick = random_pair(surface, r, config.init_amplitude, rng)
        init = HitchinPair.from_arrays(surface, base.A.values + kick.A.values,
                                       base.Phi.values + kick.Phi.values)
        cfg = SolveConfig(**{**config.__dict__, "seed": seed})
        pair, rep = solve(init, cfg)
        attempts.append({"seed": seed, "verdict": rep.verdict, "converged": rep.converged,
                         "residual": max(rep.residuals)})
        if rep.converged and rep.verdict == "irreducible":
            return pair, rep, attempts
        if best is None or (rep.converged and not best[1].converged):
            best = (pair, rep)
    return best[0], best[1], attempts
