"""Command-line front end: estimate constants, run flows, verify traces, sweep.

Subcommands
-----------
constants   estimate C_HLS / C_GNS / alpha_0 for one dimension, emit JSON
run         integrate one configuration, emit trace CSV + summary JSON
verify      re-audit a trace CSV against a constants JSON, emit verdict JSON
sweep       run a list of couplings concurrently, aggregate a summary table

Exit codes: 0 ok, 2 usage or incompatible inputs, 3 numerical abort,
4 verification failure.  The default output directory is taken from
$RADIALFLOW_OUTDIR (falling back to the working directory); re-running a
command with identical configuration and seed reproduces the trace CSV
byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .constants import compute_constants, k_coefficient
from .diagnostics import decay_fit, lq_decay_check, verify_trace
from .solver import EnergyTrace, SolverConfig, resolve_c_hls, run

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4


class UsageError(Exception):
    pass


def _outdir(args) -> Path:
    base = args.outdir or os.environ.get("RADIALFLOW_OUTDIR") or "."
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(config: SolverConfig, outputs: dict) -> dict:
    return {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "outputs": outputs,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "tool_version": __version__,
    }


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def cmd_constants(args) -> int:
    if args.d < 3:
        raise UsageError(f"constants require d >= 3, got d={args.d}")
    outdir = _outdir(args)
    try:
        report = compute_constants(args.d, tol=args.tol, seed=args.seed,
                                   n_cells=args.gns_cells, r_max=args.gns_rmax)
    except Exception as exc:  # estimation failure surfaces with diagnostics
        print(f"constants estimation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    payload = report.to_dict()
    path = outdir / f"constants_d{args.d}.json"
    _write_json(path, payload)
    flag = "" if report.alpha0_in_unit_interval else \
        "  [flag: outside (0,1); tested couplings clamp to (0, min(alpha0, 1))]"
    print(f"d={args.d}: alpha0={report.alpha0:.6g}{flag}")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _config_from_args(args) -> SolverConfig:
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    overrides = {
        "d": args.d, "alpha": args.alpha, "n_cells": args.n_cells,
        "r_max": args.r_max, "profile": args.profile, "t_final": args.T,
        "output_interval": args.output_interval, "seed": args.seed,
        "c_hls": args.c_hls, "drift_factor": args.drift_factor,
        "cfl_safety": args.cfl_safety,
    }
    merged = dict(base)
    for key, val in overrides.items():
        if val is not None:
            merged[key] = val
    if args.profile_param:
        params = dict(merged.get("profile_params", {}))
        for item in args.profile_param:
            key, _, val = item.partition("=")
            if not _:
                raise UsageError(f"profile parameter must be key=value, got '{item}'")
            try:
                params[key] = float(val)
            except ValueError:
                params[key] = val
        merged["profile_params"] = params
    try:
        return SolverConfig.from_dict(merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _run_one(config: SolverConfig, outdir: Path, stem: str) -> dict:
    trace = run(config)
    trace_path = outdir / f"{stem}.csv"
    trace.to_csv(trace_path)
    summary = trace.summary()
    summary_path = outdir / f"{stem}.summary.json"
    _write_json(summary_path, summary)
    manifest_path = outdir / f"{stem}.manifest.json"
    _write_json(manifest_path, _manifest(trace.config, {
        "trace": str(trace_path), "summary": str(summary_path)}))
    return {"trace": trace, "paths": {"trace": trace_path, "summary": summary_path,
                                      "manifest": manifest_path}}


def cmd_run(args) -> int:
    config = _config_from_args(args)
    outdir = _outdir(args)
    stem = args.name or f"run_{config.config_hash()}"
    result = _run_one(config, outdir, stem)
    trace = result["trace"]
    drift = abs(trace.column("mass") - trace.column("mass")[0]).max() / trace.column("mass")[0]
    print(f"t reached {trace.column('t')[-1]:.6g} in {trace.n_steps} steps "
          f"({trace.wall_time:.1f}s), mass drift {drift:.2e}")
    print(f"wrote {result['paths']['trace']}")
    if trace.aborted:
        print(f"aborted: {trace.abort_reason}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    trace_path = Path(args.trace)
    constants_path = Path(args.constants)
    if not trace_path.exists() or not constants_path.exists():
        raise UsageError("trace CSV and constants JSON must both exist")
    with open(constants_path) as fh:
        constants = json.load(fh)
    summary_path = Path(args.summary) if args.summary else \
        trace_path.with_suffix("").with_suffix(".summary.json") if trace_path.suffix == ".csv" \
        else trace_path.with_suffix(".summary.json")
    if not summary_path.exists():
        raise UsageError(f"run summary not found at {summary_path}; pass --summary")
    with open(summary_path) as fh:
        summary = json.load(fh)
    d = summary["d"]
    if d != constants["d"]:
        raise UsageError(f"dimension mismatch: trace d={d}, constants d={constants['d']}")
    alpha = summary["alpha"]
    cfg = summary.get("config") or {}
    drift_factor = cfg.get("drift_factor", 1.0)
    c_hls = summary.get("c_hls_used") or constants["c_hls_coulomb"]
    trace = EnergyTrace.from_csv(trace_path, d=d, alpha=alpha)
    k_val = k_coefficient(d, alpha, c_hls, constants["c_gns"], drift_factor)
    checks = verify_trace(trace, k_val, alpha,
                          clamp_count=summary.get("clamp_count"))
    verdict = {
        "trace": str(trace_path), "constants": str(constants_path),
        "d": d, "alpha": alpha, "k_coefficient": k_val,
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks.values()),
    }
    outdir = _outdir(args)
    out_path = outdir / (args.name or f"{trace_path.stem}.verify.json")
    _write_json(out_path, verdict)
    for name, chk in checks.items():
        print(f"{'PASS' if chk['passed'] else 'FAIL'}  {name}  worst={chk['worst']:.3e}")
    print(f"wrote {out_path}")
    return EXIT_OK if verdict["all_passed"] else EXIT_VERIFICATION


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_task(payload):
    config_dict, outdir, stem = payload
    config = SolverConfig.from_dict(config_dict)
    trace = run(config)
    trace.to_csv(Path(outdir) / f"{stem}.csv")
    k_val = None
    lemma_min = None
    fit_exp = None
    ripple = None
    err = ""
    try:
        fit = decay_fit(trace)
        fit_exp, ripple = fit.exponent, fit.ripple
    except ValueError as exc:
        err = str(exc)
    return {
        "alpha": config.alpha, "hash": config.config_hash(),
        "aborted": trace.aborted, "abort_reason": trace.abort_reason,
        "n_steps": trace.n_steps, "final_E": float(trace.column("E_alpha")[-1]),
        "fitted_exponent": fit_exp, "ripple": ripple,
        "c_hls_used": trace.c_hls_used, "error": err, "stem": stem,
    }


def cmd_sweep(args) -> int:
    if not args.alphas and not args.alpha_fracs:
        raise UsageError("sweep needs --alphas or --alpha-fracs")
    outdir = _outdir(args)
    report = compute_constants(args.d, seed=args.seed)
    alpha0_eff = report.clamped_alpha0()
    alphas = list(args.alphas or [])
    alphas += [frac * alpha0_eff for frac in (args.alpha_fracs or [])]
    seen, unique = set(), []
    for a in alphas:
        key = round(a, 12)
        if key in seen:
            print(f"warning: duplicate alpha {a:.6g} dropped", file=sys.stderr)
            continue
        seen.add(key)
        unique.append(a)
    tasks = []
    for a in unique:
        cfg = SolverConfig(d=args.d, alpha=a, n_cells=args.n_cells, r_max=args.r_max,
                           profile="gaussian",
                           profile_params={"mass": 1.0, "width": args.width},
                           t_final=args.T, output_interval=args.output_interval,
                           c_hls=report.c_hls_coulomb, seed=args.seed)
        tasks.append((cfg.to_dict(), str(outdir), f"sweep_d{args.d}_{cfg.config_hash()}"))
    rows = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for res in pool.map(_sweep_task, tasks):
                rows.append(res)
    else:
        rows = [_sweep_task(task) for task in tasks]
    rows.sort(key=lambda r: r["hash"])
    # lemma slack minima per run need K(alpha); compute from the sweep constants
    for row in rows:
        k_val = k_coefficient(args.d, row["alpha"], report.c_hls_coulomb, report.c_gns)
        row["k"] = k_val
        if not row["aborted"] and k_val > 0:
            trace = EnergyTrace.from_csv(Path(outdir) / f"{row['stem']}.csv",
                                         d=args.d, alpha=row["alpha"])
            row["lemma_min_slack"] = lq_decay_check(trace, k_val).min_slack
        else:
            row["lemma_min_slack"] = None
    table = outdir / f"sweep_d{args.d}.csv"
    fields = ("alpha", "k", "aborted", "n_steps", "final_E",
              "fitted_exponent", "ripple", "lemma_min_slack", "hash")
    with open(table, "w") as fh:
        fh.write(",".join(fields) + "\n")
        for row in sorted(rows, key=lambda r: r["alpha"]):
            fh.write(",".join("" if row[k] is None else str(row[k]) for k in fields) + "\n")
    print(f"swept {len(rows)} couplings (alpha0={report.alpha0:.4g}, "
          f"clamped {alpha0_eff:.4g}); wrote {table}")
    n_fail = sum(1 for r in rows if r["aborted"])
    if n_fail:
        print(f"{n_fail} run(s) aborted; see summary table", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="radialflow",
        description="Radial aggregation-diffusion gradient flow: simulate and verify.")
    ap.add_argument("--outdir", help="output directory (default $RADIALFLOW_OUTDIR or .)")
    sub = ap.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("constants", help="estimate C_HLS, C_GNS and alpha_0")
    pc.add_argument("--d", type=int, required=True)
    pc.add_argument("--tol", type=float, default=1e-10, help="quadrature tolerance")
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--gns-cells", type=int, default=1200)
    pc.add_argument("--gns-rmax", type=float, default=24.0)
    pc.set_defaults(func=cmd_constants)

    pr = sub.add_parser("run", help="integrate one configuration")
    pr.add_argument("--config", help="JSON config file (flags override)")
    pr.add_argument("--d", type=int)
    pr.add_argument("--alpha", type=float)
    pr.add_argument("--n-cells", type=int)
    pr.add_argument("--r-max", type=float)
    pr.add_argument("--profile", choices=["gaussian", "extremizer_h", "uniform_ball",
                                          "custom_table"])
    pr.add_argument("--profile-param", action="append", metavar="KEY=VALUE")
    pr.add_argument("--T", type=float)
    pr.add_argument("--output-interval", type=float)
    pr.add_argument("--c-hls", type=float, help="Coulomb-form HLS constant")
    pr.add_argument("--drift-factor", type=float, choices=[1.0, 2.0])
    pr.add_argument("--cfl-safety", type=float)
    pr.add_argument("--seed", type=int)
    pr.add_argument("--name", help="output file stem")
    pr.set_defaults(func=cmd_run)

    pv = sub.add_parser("verify", help="audit a trace against estimated constants")
    pv.add_argument("--trace", required=True)
    pv.add_argument("--constants", required=True)
    pv.add_argument("--summary", help="run summary JSON (default <trace>.summary.json)")
    pv.add_argument("--name")
    pv.set_defaults(func=cmd_verify)

    ps = sub.add_parser("sweep", help="run several couplings and aggregate")
    ps.add_argument("--d", type=int, required=True)
    ps.add_argument("--alphas", type=float, nargs="*", help="absolute couplings")
    ps.add_argument("--alpha-fracs", type=float, nargs="*",
                    help="couplings as fractions of min(alpha0, 1)")
    ps.add_argument("--T", type=float, default=200.0)
    ps.add_argument("--n-cells", type=int, default=512)
    ps.add_argument("--r-max", type=float, default=30.0)
    ps.add_argument("--width", type=float, default=0.5)
    ps.add_argument("--output-interval", type=float, default=0.5)
    ps.add_argument("--jobs", type=int, default=min(4, os.cpu_count() or 1))
    ps.add_argument("--seed", type=int, default=0)
    ps.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
