"""Configuration parsing, subcommand pipelines, and artifact emission.

    ringnls SUBCOMMAND [--config PATH] [--out DIR] [--threads T] [--seed S]

Subcommands: ground-state (radial profiles and their moments), bounds
(tail-envelope and cross-term decay reports), expansion (ansatz energy
against the three-constant model over k), corrector (fixed point at one
radius), reduce (radius scan and maximization), solve (full pipeline to
an assembled field pair).

Configs are flat ``key = value`` text with # comments; every key has a
documented default.  Each run writes a summary.json plus plot-ready CSVs
to the output directory, all atomically (write-then-rename).  The exit
status is 0 exactly when every invariant the subcommand asserts held;
otherwise a failure.json names the first violated invariant.

Scan and sampling stages are independent of each other and could run
concurrently, but they are executed serially on purpose: together with
the single seeded generator this makes identical config + seed produce
bit-identical artifacts at any --threads value (the flag is validated
and otherwise ignored, and neither it nor the output path is echoed
into the artifacts).
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .corrector import build_inputs, fixed_point_iterate
from .energy import check_ksum_bound, draw_sector_samples, expansion_compare
from .geometry import bump_centers, bump_sum_field, radial_field
from .grid import dump_field, grid_for_radius, quad_product
from .model import (ModelParams, bump_radius_interval, default_sample_radii,
                    derive_exponents, make_potential, mid_radius,
                    validate_potential)
from .radial import dump_profile_csv, ground_state
from .reduction import assemble_solution, maximize_over_Sk

SUBCOMMANDS = ("ground-state", "bounds", "expansion", "corrector",
               "reduce", "solve")


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration: model constants plus pipeline options."""

    lam: float = 1.0
    alpha0: float = 1.0
    alpha1: float = 1.0
    beta: float | None = None     # default: f0/2, resolved at run time
    a: float = 1.0
    m: float = 1.0
    theta: float = 2.0
    dim: int = 2
    k: int = 16
    potential: str = "inverse_sqrt"
    R: float | None = None        # default: mid-window radius for k
    L: float | None = None        # grid half-width override
    h: float | None = None        # grid spacing override
    tol: float = 1e-8
    tol_R: float = 2e-4
    max_iter: int = 50
    n_coarse: int = 9
    n_samples: int = 1000
    ks: str = "12,16,24"
    etas: str = "0.5,1,2"
    out: str = "out"
    seed: int = 0
    threads: int = 1


_FLOAT_KEYS = {"lam", "alpha0", "alpha1", "beta", "a", "m", "theta",
               "R", "L", "h", "tol", "tol_R"}
_INT_KEYS = {"dim", "k", "max_iter", "n_coarse", "n_samples", "seed",
             "threads"}
_STR_KEYS = {"potential", "ks", "etas", "out"}


def _parse_list(text: str, cast, label: str) -> list:
    try:
        items = [cast(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"config key {label!r} expects comma-separated "
                         f"{cast.__name__} values, got {text!r}") from None
    if not items:
        raise ValueError(f"config key {label!r} is empty")
    return items


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines (# comments) into a validated config.

    Absent keys take the documented defaults; beta defaults to half the
    measured coupling bound f0 and is resolved when the run builds its
    fields.  dim = 1 is accepted solely for the one-dimensional
    ground-state oracle table; every other subcommand needs dim 2 or 3.
    """
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, "
                             f"got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in _FLOAT_KEYS:
            cast: type = float
        elif key in _INT_KEYS:
            cast = int
        elif key in _STR_KEYS:
            cast = str
        else:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        try:
            values[key] = cast(val)
        except ValueError:
            raise ValueError(
                f"line {lineno}: key {key!r} expects {cast.__name__}, "
                f"got {val!r}") from None

    config = RunConfig(**values)
    if config.dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {config.dim}")
    # parameter-level validation through the model record (dim = 1 runs
    # only touch the radial solver, so a planar probe stands in)
    params = ModelParams(
        lam=config.lam, alpha0=config.alpha0, alpha1=config.alpha1,
        beta=0.0, a=config.a, m=config.m, theta=config.theta,
        dim=config.dim if config.dim in (2, 3) else 2,
        potential=config.potential)
    delta0 = derive_exponents(config.m, config.theta).delta0
    report = validate_potential(
        make_potential(params), config.a, config.m, config.theta,
        default_sample_radii(max(config.k, 2), config.m, delta0))
    if not report.passed:
        raise ValueError(f"potential fails assumption (A): {report.message}")
    for key in ("tol", "tol_R"):
        if getattr(config, key) <= 0:
            raise ValueError(f"{key} must be positive, "
                             f"got {getattr(config, key)}")
    if config.k < 1:
        raise ValueError(f"k must be at least 1, got {config.k}")
    if config.max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {config.max_iter}")
    if config.n_samples < 1:
        raise ValueError(f"n_samples must be at least 1, "
                         f"got {config.n_samples}")
    if config.threads < 1:
        raise ValueError(f"threads must be at least 1, got {config.threads}")
    if config.h is not None and config.h <= 0:
        raise ValueError(f"h must be positive, got {config.h}")
    _parse_list(config.ks, int, "ks")
    _parse_list(config.etas, float, "etas")
    return config


# ---------------------------------------------------------------------------
# artifact plumbing


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _cell(x) -> str:
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(x) for x in row) + "\n")
    return buf.getvalue()


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _config_echo(config: RunConfig) -> dict:
    echo = asdict(config)
    # excluded so artifacts stay bit-identical across hosts and flags
    echo.pop("out")
    echo.pop("threads")
    return echo


def _base_params(config: RunConfig) -> ModelParams:
    """Model record with a placeholder beta = 0 (fields ignore beta)."""
    return ModelParams(
        lam=config.lam, alpha0=config.alpha0, alpha1=config.alpha1,
        beta=0.0, a=config.a, m=config.m, theta=config.theta,
        dim=config.dim, potential=config.potential)


def _resolve_beta(config: RunConfig, budget) -> float:
    return 0.5 * budget.f0 if config.beta is None else config.beta


def _radius_for(config: RunConfig, k: int) -> float:
    if config.R is not None:
        return config.R
    return mid_radius(k, config.m, config.theta)


# ---------------------------------------------------------------------------
# subcommands, each returning (summary_extras, checks)


def _run_ground_state(config: RunConfig, out: Path):
    checks = []
    rows = []
    summary: dict = {"dim": config.dim}
    species = (("u0", config.lam, config.alpha0),
               ("v0", 1.0, config.alpha1))
    for label, c, alpha in species:
        prof = ground_state(c, alpha, config.dim)
        fine = ground_state(c, alpha, config.dim,
                            n_nodes=2 * len(prof.r) - 1)
        _atomic_write(out / f"{label}_profile.csv", dump_profile_csv(prof))
        for tag, p in ((label, prof), (f"{label}_fine", fine)):
            rows.append((tag, len(p.r), float(p.peak), float(p.moment2),
                         float(p.moment4), float(p.max_residual)))
        rel = abs(prof.moment2 - fine.moment2) / abs(fine.moment2)
        checks.append((f"{label}_ode_residual",
                       prof.max_residual < 1e-8 * prof.peak,
                       f"max residual {prof.max_residual:.3e}, "
                       f"peak {prof.peak:.6f}"))
        checks.append((f"{label}_moment2_refinement", rel < 1e-3,
                       f"relative change under step halving {rel:.3e}"))
        summary[f"peak_{label}"] = float(prof.peak)
        summary[f"moment2_{label}"] = float(prof.moment2)
        summary[f"moment4_{label}"] = float(prof.moment4)
        summary[f"moment2_refinement_{label}"] = float(rel)
    _atomic_write(out / "moments.csv", _csv_text(
        ("species", "n_nodes", "peak", "moment2", "moment4",
         "max_residual"), rows))

    if config.dim == 1:
        # closed-form reference for the line: w(r) = sqrt(2c/a) sech(√c r)
        prof = ground_state(config.lam, config.alpha0, 1)
        amp = math.sqrt(2.0 * config.lam / config.alpha0)
        rate = math.sqrt(config.lam)
        ref = amp / np.cosh(rate * prof.r)
        err = np.abs(prof.values - ref)
        sech_rows = [(float(r), float(w), float(s), float(e))
                     for r, w, s, e in zip(prof.r, prof.values, ref, err)]
        _atomic_write(out / "sech_comparison.csv", _csv_text(
            ("r", "profile", "sech_reference", "abs_error"), sech_rows))
        max_err = float(np.max(err))
        summary["max_sech_error"] = max_err
        checks.append(("sech_oracle", max_err < 1e-6,
                       f"max abs deviation {max_err:.3e}"))
    return summary, checks


def _run_bounds(config: RunConfig, out: Path):
    if config.dim == 1:
        raise ValueError("bounds needs dim 2 or 3")
    params = _base_params(config)
    u0 = ground_state(config.lam, config.alpha0, config.dim)
    v0 = ground_state(1.0, config.alpha1, config.dim)
    rng = np.random.default_rng(config.seed)
    ks = _parse_list(config.ks, int, "ks")
    etas = _parse_list(config.etas, float, "etas")

    rows = []
    worst = 0.0
    all_pass = True
    for k in ks:
        R = mid_radius(k, config.m, config.theta)
        cfg_k = bump_centers(k, R, config.dim)
        pts = draw_sector_samples(cfg_k, config.n_samples, rng)
        for eta in etas:
            rep = check_ksum_bound(v0, cfg_k, eta, pts)
            rows.append((k, float(R), float(eta), rep.n_samples,
                         float(rep.max_ratio_tail),
                         float(rep.max_ratio_all), rep.passed))
            worst = max(worst, rep.max_ratio_tail, rep.max_ratio_all)
            all_pass = all_pass and rep.passed
    _atomic_write(out / "ksum.csv", _csv_text(
        ("k", "R", "eta", "n_samples", "max_ratio_tail", "max_ratio_all",
         "passed"), rows))

    # cross-term decay: quad(U0^2 W^2) against R for an 8-bump ring
    radii = (2.5, 3.5, 4.5)
    cross_rows = []
    for R in radii:
        g = grid_for_radius(R, config.lam, config.dim, h=config.h)
        U = radial_field(g, u0)
        W = bump_sum_field(g, v0, bump_centers(8, R, config.dim))
        cross_rows.append((float(R), float(quad_product(U, U, W, W))))
    gamma = float(-0.5 * np.polyfit(
        [r for r, _ in cross_rows],
        np.log([v for _, v in cross_rows]), 1)[0])
    _atomic_write(out / "crossprod.csv",
                  _csv_text(("R", "quad_U0sq_Wsq"), cross_rows))

    checks = [
        ("ksum_envelopes", all_pass,
         f"max envelope ratio {worst:.6f} over {len(rows)} reports"),
        ("crossprod_decay", gamma > 0.0,
         f"fitted decay rate {gamma:.4f} over R in {radii}"),
    ]
    summary = {"ksum_max_ratio": worst, "ksum_reports": len(rows),
               "crossprod_gamma": gamma, "mu_name": params.potential}
    return summary, checks


def _run_expansion(config: RunConfig, out: Path):
    if config.dim == 1:
        raise ValueError("expansion needs dim 2 or 3")
    params0 = _base_params(config)
    u0 = ground_state(config.lam, config.alpha0, config.dim)
    v0 = ground_state(1.0, config.alpha1, config.dim)
    ks = _parse_list(config.ks, int, "ks")

    rows = []
    rhos = []
    j_exacts = []
    for k in ks:
        R = _radius_for(config, k)
        inputs = build_inputs(k, R, params0, h=config.h, L=config.L)
        beta = _resolve_beta(config, inputs.budget)
        rep = expansion_compare(u0, v0, inputs.config,
                                replace(params0, beta=beta), g=inputs.g)
        rows.append((k, float(rep.R), float(beta), float(rep.direct),
                     float(rep.model), float(rep.rho), float(rep.A0),
                     float(rep.A1), float(rep.A2),
                     float(rep.interaction_sum), float(rep.J_surrogate),
                     float(rep.J_exact)))
        rhos.append(float(rep.rho))
        j_exacts.append(float(rep.J_exact))
    _atomic_write(out / "expansion.csv", _csv_text(
        ("k", "R", "beta", "direct", "model", "rho", "A0", "A1", "A2",
         "interaction_sum", "J_surrogate", "J_exact"), rows))

    decreasing = all(b < a for a, b in zip(rhos, rhos[1:]))
    checks = [("rho_decreasing", decreasing or len(rhos) < 2,
               f"per-bump remainders {rhos}")]
    summary = {"ks": ks, "rhos": rhos, "J_exacts": j_exacts}
    return summary, checks


def _run_corrector(config: RunConfig, out: Path):
    params0 = _base_params(config)
    k = config.k
    R = _radius_for(config, k)
    inputs = build_inputs(k, R, params0, h=config.h, L=config.L)
    beta = _resolve_beta(config, inputs.budget)
    params = replace(params0, beta=beta)
    res = fixed_point_iterate(k, R, params, tol=config.tol,
                              max_iter=config.max_iter, inputs=inputs)
    _atomic_write(out / "u.field", dump_field(res.u))
    _atomic_write(out / "v.field", dump_field(res.v))
    _atomic_write(out / "steps.csv", _csv_text(
        ("iteration", "step"),
        [(i + 1, float(s)) for i, s in enumerate(res.steps)]))

    vnorm = math.sqrt(quad_product(res.v, res.v))
    znorm = math.sqrt(quad_product(inputs.Z, inputs.Z))
    zrel = (abs(quad_product(inputs.Z, res.v)) / (znorm * vnorm)
            if vnorm > 0 else 0.0)
    checks = [
        ("corrector_converged", res.converged,
         f"{res.iterations} iterations, final step {res.steps[-1]:.3e}"),
        ("contraction_below_one", res.contraction_factor < 1.0,
         f"measured contraction factor {res.contraction_factor:.4f}"),
        ("radius_mode_orthogonality", zrel <= 1e-10,
         f"relative Z overlap {zrel:.3e}"),
    ]
    summary = dict(res.as_dict())
    summary.update({"k": k, "R": float(R), "beta": float(beta),
                    "f0": float(inputs.budget.f0)})
    return summary, checks


def _scan_artifacts(out: Path, report) -> None:
    rows = [(float(r), float(f)) for r, f in report.samples]
    _atomic_write(out / "scan.csv", _csv_text(("R", "F"), rows))
    if report.records:
        rec_rows = [(float(s.R), float(s.F), float(s.breakdown.main),
                     float(s.breakdown.l_val), float(s.breakdown.q_val),
                     float(s.breakdown.h_val),
                     s.corrector["iterations"],
                     float(s.corrector["contraction_factor"]))
                    for s in report.records]
        _atomic_write(out / "scan_terms.csv", _csv_text(
            ("R", "F", "main", "l", "q", "h", "iterations",
             "contraction_factor"), rec_rows))


def _maximize(config: RunConfig):
    params0 = _base_params(config)
    k = config.k
    probe = build_inputs(k, mid_radius(k, config.m, config.theta),
                         params0, h=config.h, L=config.L)
    beta = _resolve_beta(config, probe.budget)
    params = replace(params0, beta=beta)
    R0, report = maximize_over_Sk(k, params, n_coarse=config.n_coarse,
                                  tol_R=config.tol_R, tol=config.tol,
                                  h=config.h, L=config.L)
    return params, beta, probe.budget.f0, R0, report


def _run_reduce(config: RunConfig, out: Path):
    params, beta, f0, R0, report = _maximize(config)
    _scan_artifacts(out, report)
    lo, hi = bump_radius_interval(
        config.k, config.m,
        derive_exponents(config.m, config.theta).delta0)
    checks = [("interior_maximizer", report.interior,
               f"R0 = {R0!r} in window [{lo!r}, {hi!r}]")]
    summary = {"k": config.k, "beta": float(beta), "f0": float(f0),
               "R0": float(R0),
               "F_R0": float(max(f for _, f in report.samples)),
               "interior": report.interior,
               "evaluations": report.evaluations}
    return summary, checks


def _run_solve(config: RunConfig, out: Path):
    params, beta, f0, R0, report = _maximize(config)
    _scan_artifacts(out, report)
    inputs = build_inputs(config.k, R0, params, h=config.h, L=config.L)
    sol = assemble_solution(config.k, R0, params, tol=config.tol,
                            inputs=inputs)
    _atomic_write(out / "U.field", dump_field(sol.U))
    _atomic_write(out / "V.field", dump_field(sol.V))
    res_U, res_V = sol.residuals
    h_eff = inputs.g.h
    budget = 50.0 * h_eff * h_eff
    checks = [
        ("interior_maximizer", report.interior, f"R0 = {R0!r}"),
        ("residual_budget", max(res_U, res_V) < budget,
         f"residuals ({res_U:.3e}, {res_V:.3e}) vs budget {budget:.3e} "
         f"at h = {h_eff:g}"),
    ]
    summary = {"k": config.k, "beta": float(beta), "f0": float(f0),
               "F_R0": float(max(f for _, f in report.samples)),
               "interior": report.interior,
               "evaluations": report.evaluations}
    summary.update(sol.as_dict())
    return summary, checks


_HANDLERS = {
    "ground-state": _run_ground_state,
    "bounds": _run_bounds,
    "expansion": _run_expansion,
    "corrector": _run_corrector,
    "reduce": _run_reduce,
    "solve": _run_solve,
}


def _failure_name(exc: Exception) -> str:
    msg = str(exc)
    if isinstance(exc, RuntimeError):
        if "diverging" in msg or "stalled" in msg:
            return "corrector_convergence"
        return "pipeline_error"
    return "parameter_bounds"


def run(subcommand: str, config: RunConfig) -> int:
    """Execute one subcommand; returns the process exit status."""
    if subcommand not in _HANDLERS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        summary, checks = _HANDLERS[subcommand](config, out)
    except (RuntimeError, ValueError) as exc:
        record = {"subcommand": subcommand,
                  "invariant": _failure_name(exc),
                  "detail": str(exc)}
        _atomic_write(out / "failure.json", _json_text(record))
        print(f"{subcommand}: FAIL ({record['invariant']}): {exc}",
              file=sys.stderr)
        return 1

    payload = {"subcommand": subcommand, "config": _config_echo(config)}
    payload.update(summary)
    payload["checks"] = [
        {"invariant": name, "passed": passed, "detail": detail}
        for name, passed, detail in checks]
    _atomic_write(out / "summary.json", _json_text(payload))

    failed = [(name, detail) for name, passed, detail in checks
              if not passed]
    if failed:
        name, detail = failed[0]
        _atomic_write(out / "failure.json", _json_text(
            {"subcommand": subcommand, "invariant": name,
             "detail": detail}))
        print(f"{subcommand}: FAIL ({name}): {detail}", file=sys.stderr)
        return 1
    stale = out / "failure.json"
    if stale.exists():
        stale.unlink()
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ringnls",
        description="ring-of-bumps pipelines for the coupled cubic system")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", metavar="PATH",
                   help="key = value config file (defaults when omitted)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--threads", type=int, metavar="T",
                   help="worker budget; validated, execution is serial")
    p.add_argument("--seed", type=int, metavar="S",
                   help="seed for sample-based checks")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        text = Path(args.config).read_text() if args.config else ""
        config = parse_config(text)
        overrides = {}
        if args.out is not None:
            overrides["out"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ValueError(
                    f"threads must be at least 1, got {args.threads}")
            overrides["threads"] = args.threads
        if overrides:
            config = replace(config, **overrides)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(args.subcommand, config)


if __name__ == "__main__":
    sys.exit(main())
