"""Experiment orchestration and machine-readable verification reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .deformation import (
    assemble,
    basic_index,
    dimension_formula,
    expected_index,
    h2_alignment,
    harmonic_spaces,
    kuranishi_inverse,
)
from .errors import BasicHitchinError, ConfigError, GapTooSmall
from .forms import HitchinPair, degree_of_bundle, flatness_check, load_pair, save_pair
from .geometry import build_surface, format_config, load_config
from .hitchin import SolveConfig, find_irreducible, residual
from .moduli import build_frame, normal_coordinate_check, quaternion_report

SCHEMA_VERSION = "1.0"
ALL_CHECKS = ("residual", "flatness", "h0", "h1", "h2", "index", "complex",
              "quaternion", "compat", "kuranishi", "normal")
PRESETS = ("torus_spectral", "genus2_grid", "torus_grid")
THREADS_ENV = "BASIC_HITCHIN_THREADS"


def resolve_geometry(name_or_path):
    """A path to a geometry file, or the name of a bundled preset."""
    path = Path(name_or_path)
    if path.is_file():
        return load_config(path)
    if str(name_or_path) in PRESETS:
        text = resources.files(__package__).joinpath("presets", f"{name_or_path}.cfg").read_text()
        from .geometry import parse_config
        return parse_config(text)
    raise ConfigError(f"geometry file not found: {name_or_path}")


def thread_limit():
    """Context manager limiting BLAS threads to $BASIC_HITCHIN_THREADS (if set)."""
    from threadpoolctl import threadpool_limits

    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return threadpool_limits(limits=None)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive")
    return threadpool_limits(limits=n)


def environment_stamp() -> dict:
    return {"package": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "platform": platform.platform(), "threads": os.environ.get(THREADS_ENV)}


# ---------------------------------------------------------------------------
# report types


@dataclass
class ExperimentConfig:
    geometry: str
    rank: int = 1
    seeds: tuple = (0,)
    tolerance: float = 1e-8
    retry_budget: int = 3
    out_dir: str | None = None
    checks: tuple = ALL_CHECKS
    normal_triples: int = 2
    kuranishi_eps: tuple = (1e-1, 1e-2, 1e-3)

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be positive")
        if self.rank < 1:
            raise ConfigError("rank must be at least 1")
        unknown = set(self.checks) - set(ALL_CHECKS)
        if unknown:
            raise ConfigError(f"unknown checks: {sorted(unknown)}")
        self.seeds = tuple(self.seeds)
        self.checks = tuple(self.checks)


@dataclass
class CheckResult:
    name: str
    status: str                      # pass | fail | undetermined
    measured: dict
    expected: dict                   # value -> {"value": ..., "provenance": ...}
    diagnostics: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    checks: list
    config: dict
    environment: dict
    artifacts: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(c.status == "pass" for c in self.checks)

    def check(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {"schema_version": self.schema_version, "passed": self.passed,
                "config": self.config, "environment": self.environment,
                "artifacts": self.artifacts,
                "checks": [asdict(c) for c in self.checks], "tables": self.tables}

    def to_json(self) -> str:
        return json.dumps(_plain(self.as_dict()), indent=2, sort_keys=True)

    def write(self, path):
        Path(path).write_text(self.to_json() + "\n")


def _plain(x):
    """Convert numpy scalars and arrays (recursively) into JSON-ready values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _exp(value, provenance):
    return {"value": value, "provenance": provenance}


def _status(ok):
    return "pass" if ok else "fail"


# ---------------------------------------------------------------------------
# individual checks


def check_solution(pair, tol):
    norms = residual(pair)[1]
    fd, deg = flatness_check(pair), degree_of_bundle(pair)
    out = [CheckResult("residual", _status(max(norms) <= tol),
                       {"residuals": list(norms)}, {"max_residual": _exp(tol, "configured tolerance")}),
           CheckResult("flatness", _status(fd <= 2 * tol and abs(deg) <= 1e-8),
                       {"flat_curvature": fd, "degree": deg},
                       {"flat_curvature": _exp(2 * tol, "twice the residual tolerance"),
                        "degree": _exp(0.0, "theory: a flat bundle has degree zero, tol 1e-8")})]
    return out


def check_cohomology(cx, genus, irreducible):
    rank = cx.rank
    out = []
    try:
        dims, _, gaps = harmonic_spaces(cx)
    except GapTooSmall as exc:
        bad = CheckResult("h0", "undetermined", {}, {}, {"error": str(exc)})
        return [bad, CheckResult("h1", "undetermined", {}, {}, {"error": str(exc)}),
                CheckResult("h2", "undetermined", {}, {}, {"error": str(exc)})]
    diag = {f"gap_ratio_{k}": g.gap_ratio for k, g in enumerate(gaps)}
    out.append(CheckResult("h0", _status(dims[0] == 1), {"dim": dims[0]},
                           {"dim": _exp(1, "theory: irreducible pairs have H0 = i R Id")}, diag))
    formula = dimension_formula(rank, genus)
    if irreducible:
        status = _status(dims[1] == formula)
    else:
        status = "undetermined"
    out.append(CheckResult("h1", status, {"dim": dims[1], "irreducible": irreducible},
                           {"dim": _exp(formula, "theory: 4 rk^2 (g - 1) + 4 at irreducible pairs")}, diag))
    align = h2_alignment(cx) if dims[2] else []
    ok = dims[2] == 3 and min(align, default=0.0) >= 1 - 1e-6
    out.append(CheckResult("h2", _status(ok), {"dim": dims[2], "alignment": align},
                           {"dim": _exp(3, "theory: H2 spanned by i d(eta) Id in each slot"),
                            "alignment": _exp(1 - 1e-6, "lower bound")}, diag))
    return out


def check_index(cx, genus):
    info = basic_index(cx)
    exp_idx = expected_index(cx.rank, genus)
    return CheckResult("index", _status(info["index"] == exp_idx), info,
                       {"index": _exp(exp_idx, "theory: -2 rk^2 (2 - 2g)")})


def check_complex(cx, n_samples=100, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(cx.L0.size, n_samples))
    ratio = np.linalg.norm(cx.D2 @ (cx.D1 @ x), axis=0) / np.linalg.norm(x, axis=0)
    worst = float(ratio.max()) if ratio.size else 0.0
    return CheckResult("complex", _status(worst <= 1e-7),
                       {"max_ratio": worst, "operator_norm": cx.complex_defect()},
                       {"max_ratio": _exp(1e-7, "tolerance at solved pairs")})


def check_moduli(cx, frame, which):
    rep = quaternion_report(frame)
    out = []
    if "quaternion" in which:
        rel = max(rep["I2"], rep["J2"], rep["K2"], rep["K_minus_IJ"])
        leak = max(rep["leakage"].values(), default=0.0)
        iso = max(rep[f"isometry_{q}"] for q in "IJK")
        ok = rel <= 1e-8 and leak <= 1e-8 and iso <= 1e-8 and rep["dim"] % 4 == 0
        out.append(CheckResult("quaternion", _status(ok),
                               {"relations": rel, "leakage": leak, "isometry": iso, "dim": rep["dim"]},
                               {"relations": _exp(1e-8, "tolerance"), "leakage": _exp(1e-8, "tolerance"),
                                "isometry": _exp(1e-8, "tolerance"),
                                "dim_mod_4": _exp(0, "theory: quaternionic dimension")},
                               {"report": rep}))
    if "compat" in which:
        comp = max(rep[f"compat_{q}"] for q in "IJK")
        skew = max(rep[f"skew_{q}"] for q in "IJK")
        out.append(CheckResult("compat", _status(comp <= 1e-9 and skew <= 1e-9),
                               {"compatibility": comp, "skew": skew},
                               {"compatibility": _exp(1e-9, "tolerance on omega_Q - g(., Q .)"),
                                "skew": _exp(1e-9, "tolerance")}))
    return out


def check_kuranishi(cx, eps_list):
    basis = cx.harmonic_basis(1)
    rows, eps0 = [], None
    for j in range(min(basis.shape[1], 2)):
        for eps in eps_list:
            try:
                res = kuranishi_inverse(cx, basis[:, j], eps)
                d = res.as_dict()
                ok = max(d["slice_residual"], d["deformed_residual"]) <= 1e-8 and d["harmonic_error"] <= 1e-9 * max(eps, 1)
            except BasicHitchinError as exc:
                d, ok = {"error": str(exc)}, False
            rows.append({"direction": j, "eps": eps, "ok": ok, **d})
    by_eps = {eps: all(r["ok"] for r in rows if r["eps"] == eps) for eps in eps_list}
    passing = [e for e, ok in by_eps.items() if ok]
    eps0 = max(passing) if passing else None
    smallest_ok = by_eps.get(min(eps_list), False) if eps_list else False
    return CheckResult("kuranishi", _status(bool(rows) and smallest_ok),
                       {"eps0": eps0, "rows": rows},
                       {"residuals": _exp(1e-8, "tolerance"), "harmonic_error": _exp(1e-9, "tolerance")})


def check_normal(cx, n_triples, seed=0):
    rep = normal_coordinate_check(cx, n_triples=n_triples, seed=seed)
    if cx.rank == 1:
        worst = max(rep["max_abs_g"], rep["max_abs_omega"])
        ok = worst <= 1e-12
        expected = {"max_abs": _exp(1e-12, "theory: flat abelian moduli")}
    else:
        ok = rep["min_slope_g"] >= 1.8 and rep["min_slope_omega"] >= 1.8
        expected = {"slope": _exp(1.8, "finite-difference order, lower bound")}
    measured = {k: v for k, v in rep.items() if k != "rows"}
    return CheckResult("normal", _status(ok), measured, expected, {"rows": rep["rows"]})


# ---------------------------------------------------------------------------
# pipeline


def evaluate_pair(pair: HitchinPair, tol: float, checks=ALL_CHECKS, verdict=None,
                  normal_triples=2, kuranishi_eps=(1e-1, 1e-2, 1e-3)) -> list:
    """Run the selected checks at an already solved pair."""
    s = pair.surface
    results = []
    if {"residual", "flatness"} & set(checks):
        results += [c for c in check_solution(pair, tol) if c.name in checks]
    need_cx = set(checks) - {"residual", "flatness"}
    if not need_cx:
        return results
    cx = assemble(pair)
    if verdict is None:
        try:
            verdict = "irreducible" if cx.kernel(0).dim == 1 else "reducible"
        except GapTooSmall:
            verdict = "undetermined"
    irreducible = verdict == "irreducible"
    if {"h0", "h1", "h2"} & set(checks):
        results += [c for c in check_cohomology(cx, s.genus, irreducible) if c.name in checks]
    if "index" in checks:
        results.append(check_index(cx, s.genus))
    if "complex" in checks:
        results.append(check_complex(cx))
    if {"quaternion", "compat"} & set(checks):
        results += check_moduli(cx, build_frame(cx), checks)
    if "kuranishi" in checks:
        results.append(check_kuranishi(cx, kuranishi_eps))
    if "normal" in checks:
        if irreducible:
            results.append(check_normal(cx, normal_triples))
        else:
            results.append(CheckResult("normal", "undetermined", {"irreducible": False}, {}))
    order = {n: i for i, n in enumerate(ALL_CHECKS)}
    return sorted(results, key=lambda c: order[c.name])


def run_pipeline(config: ExperimentConfig) -> VerificationReport:
    """solve -> assemble -> harmonic spaces -> index -> moduli checks.

    Writes the solved pair and the report into ``config.out_dir`` when set.
    """
    geometry = resolve_geometry(config.geometry)
    surface = build_surface(geometry)
    checks, artifacts = [], {}
    out = Path(config.out_dir) if config.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    solve_info = []
    with thread_limit():
        for seed in config.seeds:
            t0 = time.perf_counter()
            scfg = SolveConfig(rank=config.rank, residual_tolerance=config.tolerance,
                               seed=seed, retry_budget=config.retry_budget)
            pair, rep, attempts = find_irreducible(surface, scfg)
            solve_info.append({"seed": seed, "attempts": attempts, "iterations": rep.iterations,
                               "verdict": rep.verdict, "converged": rep.converged})
            results = evaluate_pair(pair, config.tolerance, config.checks, rep.verdict,
                                    config.normal_triples, config.kuranishi_eps)
            for c in results:
                c.diagnostics.setdefault("seed", seed)
                c.diagnostics.setdefault("solver_iterations", rep.iterations)
                c.diagnostics.setdefault("wall_time", time.perf_counter() - t0)
                if surface.backend == "grid":
                    c.diagnostics.setdefault("tau_star", _tau_star(surface))
            checks += results
            if out:
                path = out / f"pair_seed{seed}.npz"
                save_pair(pair, path)
                artifacts[f"pair_seed{seed}"] = str(path)
    cfg = {k: v for k, v in asdict(config).items()}
    cfg["geometry_text"] = format_config(geometry)
    report = VerificationReport(checks, _plain(cfg), environment_stamp(), artifacts,
                                {"solve": solve_info})
    if out:
        report.write(out / "report.json")
        emit_table(report, out)
    return report


def _tau_star(surface, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(surface.n1, 1, 1)).astype(complex)
    return surface.star_defect(x)


# ---------------------------------------------------------------------------
# tables


CHECK_COLUMNS = ("seed", "check", "status", "measured")
NORMAL_COLUMNS = ("seed", "triple", "eps", "abs_dg_over_eps", "abs_domega_over_eps",
                  "slope_g", "slope_omega")
DIM_COLUMNS = ("rank", "genus", "backend", "verdict", "dim_h1", "formula_h1", "index",
               "expected_index", "dim_h0", "dim_h2")


def _tsv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(_plain(v), sort_keys=True)
    return v


def _compact(measured) -> str:
    """Scalar measurements as ``key=value`` pairs; numeric lists by their maximum."""
    parts = []
    for k, v in sorted(measured.items()):
        if isinstance(v, (list, tuple)):
            nums = [x for x in v if isinstance(x, (int, float, np.number))]
            if not nums or len(nums) != len(v):
                continue
            k, v = f"max_{k}", max(nums)
        elif isinstance(v, dict):
            continue
        parts.append(f"{k}={_cell(_plain(v))}")
    return ";".join(parts)


def emit_table(report: VerificationReport, out_dir=None) -> tuple[str, dict]:
    """Text summary plus tab-separated data files (checks, normal-coordinate
    sweep, dimension sweep).  Returns (text, {name: path})."""
    check_rows = [{"seed": c.diagnostics.get("seed", ""), "check": c.name, "status": c.status,
                   "measured": _compact(c.measured)} for c in report.checks]
    files = {"checks": _tsv(CHECK_COLUMNS, check_rows)}
    normal_rows = []
    for c in report.checks:
        if c.name != "normal":
            continue
        for row in c.diagnostics.get("rows", []):
            for eps, dg, dw in zip(row["steps"], row["dg_over_eps"], row["domega_over_eps"]):
                normal_rows.append({"seed": c.diagnostics.get("seed", ""), "triple": row["triple"],
                                    "eps": eps, "abs_dg_over_eps": float(dg),
                                    "abs_domega_over_eps": float(dw),
                                    "slope_g": row["slope_g"], "slope_omega": row["slope_omega"]})
    if normal_rows:
        files["normal_coordinates"] = _tsv(NORMAL_COLUMNS, normal_rows)
    if "dimensions" in report.tables:
        files["dimensions"] = _tsv(DIM_COLUMNS, report.tables["dimensions"])
    text = files["dimensions"] if "dimensions" in report.tables and not report.checks else files["checks"]
    paths = {}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, body in files.items():
            p = out / f"{name}.tsv"
            p.write_text(body)
            paths[name] = str(p)
    return text, paths


def dimension_sweep(ranks=(1, 2), genera=(1, 2), seed=0, tol=1e-10, retry_budget=3,
                    spectral_resolution=6, grid_resolution=4) -> VerificationReport:
    """Measured dim H1 and basic index for each (rank, genus): genus 1 on the
    spectral torus, genus 2 on the L-shaped square-tiled surface."""
    from .geometry import GeometryConfig, L_SHAPE_GLUING, grid_config

    rows = []
    with thread_limit():
        for rank in ranks:
            for genus in genera:
                if genus == 1:
                    cfg = GeometryConfig("spectral", 1, spectral_resolution, 1.0)
                elif genus == 2:
                    cfg = grid_config(L_SHAPE_GLUING, grid_resolution, 2)
                else:
                    raise ConfigError(f"no built-in surface of genus {genus}")
                surface = build_surface(cfg)
                pair, rep, _ = find_irreducible(
                    surface, SolveConfig(rank=rank, seed=seed, residual_tolerance=tol,
                                         retry_budget=retry_budget))
                cx = assemble(pair)
                idx = basic_index(cx)
                try:
                    dims = harmonic_spaces(cx)[0]
                except GapTooSmall:
                    dims = (None, None, None)
                irreducible = rep.verdict == "irreducible" and rep.converged
                rows.append({"rank": rank, "genus": genus, "backend": cfg.backend,
                             "verdict": rep.verdict if rep.converged else "unsolved",
                             "dim_h1": dims[1] if irreducible else "undetermined",
                             "formula_h1": dimension_formula(rank, genus),
                             "index": idx["index"], "expected_index": expected_index(rank, genus),
                             "dim_h0": dims[0], "dim_h2": dims[2]})
    return VerificationReport([], {"ranks": list(ranks), "genera": list(genera), "seed": seed},
                              environment_stamp(), tables={"dimensions": rows})
