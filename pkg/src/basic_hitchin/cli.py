"""Command-line front end: ``basic-hitchin <command> ...``.

Every command exits with status 0 when all of its checks pass, 1 when some
check fails or is undetermined, and 2 on input errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import BasicHitchinError
from .forms import load_pair, save_pair
from .geometry import build_surface
from .hitchin import SolveConfig, find_irreducible
from .reporting import (
    ALL_CHECKS,
    ExperimentConfig,
    VerificationReport,
    dimension_sweep,
    emit_table,
    environment_stamp,
    evaluate_pair,
    resolve_geometry,
    run_pipeline,
    thread_limit,
)


def _fail(exc: BasicHitchinError):
    click.echo(f"error [{exc.module}]: {exc}", err=True)
    sys.exit(2)


def _checks(text):
    names = tuple(n.strip() for n in text.split(",") if n.strip())
    bad = [n for n in names if n not in ALL_CHECKS]
    if bad:
        raise click.BadParameter(f"unknown checks {bad}; choose from {', '.join(ALL_CHECKS)}")
    return names


def _finish(report: VerificationReport, path, out_dir=None):
    if path:
        report.write(path)
    text, _ = emit_table(report, out_dir)
    click.echo(text, nl=False)
    sys.exit(0 if report.passed else 1)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Solve, deform and inspect basic Hitchin pairs."""


@main.command()
@click.option("--geometry", required=True, help="Geometry file or preset name.")
@click.option("--rank", default=1, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--tol", default=1e-8, show_default=True, type=float)
@click.option("--retries", default=3, show_default=True, type=int)
@click.option("--policy", default="gauss-newton", show_default=True,
              type=click.Choice(["gauss-newton", "gradient"]))
@click.option("--max-iter", default=200, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Checkpoint path (.npz).")
@click.option("--report", type=click.Path(dir_okay=False), help="JSON solve report.")
def solve(geometry, rank, seed, tol, retries, policy, max_iter, out, report):
    """Find a solved pair (irreducible if the retry budget allows)."""
    try:
        surface = build_surface(resolve_geometry(geometry))
        cfg = SolveConfig(rank=rank, seed=seed, residual_tolerance=tol, retry_budget=retries,
                          policy=policy, max_iterations=max_iter)
        with thread_limit():
            pair, rep, attempts = find_irreducible(surface, cfg)
    except BasicHitchinError as exc:
        _fail(exc)
    save_pair(pair, out)
    body = {"schema_version": "1.0", "environment": environment_stamp(),
            "solve": rep.as_dict(), "attempts": attempts, "checkpoint": str(out)}
    if report:
        Path(report).write_text(json.dumps(body, indent=2, sort_keys=True, default=float) + "\n")
    click.echo(f"verdict={rep.verdict} converged={rep.converged} "
               f"residual={max(rep.residuals):.3e} iterations={rep.iterations}")
    sys.exit(0 if rep.converged else 1)


def _pair_command(pair_path, tol, checks, report, out_dir):
    try:
        pair = load_pair(pair_path)
        with thread_limit():
            results = evaluate_pair(pair, tol, checks)
    except BasicHitchinError as exc:
        _fail(exc)
    rep = VerificationReport(results, {"pair": str(pair_path), "tolerance": tol,
                                       "checks": list(checks)}, environment_stamp())
    _finish(rep, report, out_dir)


@main.command()
@click.option("--pair", "pair_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--tol", default=1e-8, show_default=True, type=float)
@click.option("--report", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Directory for data tables.")
def deform(pair_path, tol, report, out_dir):
    """Deformation complex: harmonic dimensions, index, gaps, H2 alignment."""
    _pair_command(pair_path, tol, ("h0", "h1", "h2", "index", "complex"), report, out_dir)


@main.command()
@click.option("--pair", "pair_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--check", "check", default="quaternion,compat,normal", show_default=True)
@click.option("--tol", default=1e-8, show_default=True, type=float)
@click.option("--report", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
def moduli(pair_path, check, tol, report, out_dir):
    """Quaternion relations, Kahler compatibility and normal-coordinate decay."""
    _pair_command(pair_path, tol, _checks(check), report, out_dir)


@main.command("verify-all")
@click.option("--geometry", required=True, help="Geometry file or preset name.")
@click.option("--rank", default=1, show_default=True, type=int)
@click.option("--seed", "seeds", default=(0,), multiple=True, type=int, show_default=True)
@click.option("--tol", default=1e-8, show_default=True, type=float)
@click.option("--retries", default=3, show_default=True, type=int)
@click.option("--checks", default=",".join(ALL_CHECKS), show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def verify_all(geometry, rank, seeds, tol, retries, checks, out_dir):
    """Full pipeline; writes checkpoints, report.json and TSV tables to --out."""
    try:
        cfg = ExperimentConfig(geometry=geometry, rank=rank, seeds=seeds, tolerance=tol,
                               retry_budget=retries, out_dir=out_dir, checks=_checks(checks))
        report = run_pipeline(cfg)
    except BasicHitchinError as exc:
        _fail(exc)
    _finish(report, None)


@main.command("dim-table")
@click.option("--ranks", default="1,2", show_default=True)
@click.option("--genera", default="1,2", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--tol", default=1e-10, show_default=True, type=float)
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
def dim_table(ranks, genera, seed, tol, out_dir):
    """Measured dim H1 and index against the dimension formula."""
    parse = lambda s: tuple(int(v) for v in s.split(",") if v.strip())
    try:
        report = dimension_sweep(parse(ranks), parse(genera), seed=seed, tol=tol)
    except BasicHitchinError as exc:
        _fail(exc)
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        report.write(Path(out_dir) / "dimensions.json")
    text, _ = emit_table(report, out_dir)
    click.echo(text, nl=False)
    ok = all(r["index"] == r["expected_index"] and r["dim_h1"] in (r["formula_h1"], "undetermined")
             for r in report.tables["dimensions"])
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
