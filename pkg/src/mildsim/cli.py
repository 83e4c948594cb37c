"""Command line front end.

    mildsim EXPERIMENT --config run.json [options]

Experiments: simulate, hjm, coeff-check, operator-tests, lambda-study,
ito-check.  Every run writes a manifest.json plus experiment-specific
CSV files into the output directory; file contents are byte-identical
across reruns of the same configuration on the same backend.

Exit codes: 0 success, 2 invalid configuration, 3 an --assert condition
failed, 4 a simulated path aborted (blow-up or non-finite state).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .coefficients import estimate_positivity_constant
from .config import (
    EXPERIMENTS,
    ConfigError,
    apply_override,
    build_grid,
    build_initial,
    build_model,
    load_config,
)
from .hjm import HJMModelSpec, build_hjm, simulate_forward_rates
from .noise import NoiseConfig
from .operators import OperatorSuite, run_contraction_battery, run_submarkov_battery
from .smoothing import ito_residual, run_jensen_battery, run_pairing_battery
from .solver import (
    SolverConfig,
    ensemble_stats,
    lambda_convergence_study,
    run_ensemble,
)

_THRESHOLDS = (-1e-6, -1e-3, -1e-2)


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _write_manifest(outdir: Path, payload: dict) -> None:
    (outdir / "manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _run_config(cfg: dict) -> SolverConfig:
    r = cfg["run"]
    return SolverConfig(
        dt=float(r["dt"]),
        t_final=float(r["t_final"]),
        scheme=r.get("scheme", "shift-then-react"),
        lam=float(r.get("lam", 0.0)),
        snapshot_stride=int(r.get("snapshot_stride", 0)),
        blow_threshold=float(r.get("blow_threshold", 1e12)),
    )


def _stats_rows(stats):
    cols = [stats.times, stats.neg_energy_mean, stats.neg_energy_p95,
            stats.min_value_min, stats.supermartingale_mean]
    cols += [stats.frac_below[float(t)] for t in _THRESHOLDS]
    return np.column_stack(cols)


_STATS_HEADER = [
    "t",
    "neg_energy_mean",
    "neg_energy_p95",
    "min_value_min",
    "supermartingale_mean",
] + [f"frac_below_{abs(t):.0e}" for t in _THRESHOLDS]


def _curve_rows(ens):
    if (ens.aborted >= 0).any():
        ok = ens.aborted < 0
        vals = ens.final_values[ok]
    else:
        vals = ens.final_values
    mean = vals.mean(axis=0)
    p5 = np.percentile(vals, 5, axis=0)
    p95 = np.percentile(vals, 95, axis=0)
    return np.column_stack([ens.grid.nodes, mean, p5, p95])


_CURVE_HEADER = ["x", "u_mean", "u_p5", "u_p95"]


def _exp_simulate(cfg: dict, outdir: Path) -> tuple[dict, bool, bool]:
    grid = build_grid(cfg)
    model = build_model(cfg, grid)
    u0 = build_initial(cfg["model"], grid)
    suite = OperatorSuite(grid, shifted=True)
    r = cfg["run"]
    scfg = _run_config(cfg)
    ens = run_ensemble(
        u0, suite, model, scfg,
        n_paths=int(r.get("n_paths", 100)),
        seed=int(r.get("seed", 1234)),
        stream_base=int(r.get("stream_base", 0)),
        chunk_size=int(r.get("chunk_size", 2048)),
    )
    if "c_const" in r:
        c_const = float(r["c_const"])
    elif "check" in cfg:
        ck = cfg["check"]
        rep = estimate_positivity_constant(
            model, n_samples=int(ck.get("n_samples", 200)), seed=int(ck.get("seed", 1))
        )
        c_const = rep.estimated_c if np.isfinite(rep.estimated_c) else 0.0
    else:
        c_const = 0.0
    stats = ensemble_stats(ens, c_const=c_const, thresholds=_THRESHOLDS)
    _write_csv(outdir / "ensemble.csv", _STATS_HEADER, _stats_rows(stats))
    results = {
        "n_paths": ens.n_paths,
        "n_aborted": ens.n_aborted,
        "c_const": c_const,
        "final_neg_energy_mean": float(stats.neg_energy_mean[-1]),
        "final_min_value": float(stats.min_value_min[-1]),
    }
    aborted = ens.n_aborted > 0
    return {"results": results, "outputs": ["ensemble.csv"]}, not aborted, aborted


def _exp_hjm(cfg: dict, outdir: Path) -> tuple[dict, bool, bool]:
    g = cfg["grid"]
    m = cfg["model"]
    grid = build_grid(cfg)
    modes = build_model(cfg, grid).modes
    spec = HJMModelSpec(
        x_max=float(g["x_max"]),
        n_nodes=int(g["n_nodes"]),
        alpha=float(g["alpha"]),
        modes=modes,
        initial_curve=build_initial(m, grid),
        alpha_in_drift=bool(m.get("alpha_in_drift", True)),
    )
    ck = cfg.get("check", {})
    built = build_hjm(
        spec, check_samples=int(ck.get("n_samples", 200)), check_seed=int(ck.get("seed", 1))
    )
    r = cfg["run"]
    run = simulate_forward_rates(
        built,
        dt=float(r["dt"]),
        t_final=float(r["t_final"]),
        n_paths=int(r.get("n_paths", 100)),
        seed=int(r.get("seed", 1234)),
        scheme=r.get("scheme", "shift-then-react"),
        snapshot_stride=int(r.get("snapshot_stride", 0)),
        thresholds=_THRESHOLDS,
        chunk_size=int(r.get("chunk_size", 2048)),
    )
    _write_csv(outdir / "ensemble.csv", _STATS_HEADER, _stats_rows(run.stats))
    _write_csv(outdir / "curve.csv", _CURVE_HEADER, _curve_rows(run.ensemble))
    rep = built.report
    results = {
        "verdict": run.verdict,
        "check": {
            "samples": rep.samples,
            "worst_ratio": rep.worst_ratio,
            "estimated_c": rep.estimated_c if np.isfinite(rep.estimated_c) else "inf",
            "violations": rep.violations,
        },
        "c_const": built.c_const,
        "n_paths": run.ensemble.n_paths,
        "n_aborted": run.ensemble.n_aborted,
        "final_neg_energy_mean": float(run.stats.neg_energy_mean[-1]),
        "final_frac_below_1e-03": float(run.stats.frac_below[-1e-3][-1]),
    }
    aborted = run.ensemble.n_aborted > 0
    passed = not aborted
    expect = cfg.get("expect_verdict")
    if expect is not None:
        passed = passed and (run.verdict == expect)
    return {"results": results, "outputs": ["ensemble.csv", "curve.csv"]}, passed, aborted


def _exp_coeff_check(cfg: dict, outdir: Path) -> tuple[dict, bool, bool]:
    grid = build_grid(cfg)
    model = build_model(cfg, grid)
    ck = cfg.get("check", {})
    rep = estimate_positivity_constant(
        model, n_samples=int(ck.get("n_samples", 200)), seed=int(ck.get("seed", 1))
    )
    results = {
        "samples": rep.samples,
        "worst_ratio": rep.worst_ratio,
        "estimated_c": rep.estimated_c if np.isfinite(rep.estimated_c) else "inf",
        "violations": rep.violations,
        "admissible": rep.admissible,
    }
    expect = bool(ck.get("expect_admissible", True))
    return {"results": results, "outputs": []}, rep.admissible == expect, False


def _exp_operator_tests(cfg: dict, outdir: Path) -> tuple[dict, bool, bool]:
    grid = build_grid(cfg)
    suite = OperatorSuite(grid, shifted=True)
    ck = cfg.get("check", {})
    n = int(ck.get("n_samples", 100))
    seed = int(ck.get("seed", 1))
    tol = float(ck.get("tol", 1e-8))
    reports = [
        run_submarkov_battery(suite, n, seed, tol=tol),
        run_contraction_battery(suite, n, seed + 1, tol=tol),
        run_pairing_battery(suite, n, seed + 2, tol=tol),
        run_jensen_battery(suite, n, seed + 3, tol=tol),
    ]
    results = {
        rep.label: {
            "n_checks": rep.n_checks,
            "worst_excess": rep.worst_excess,
            "n_violations": rep.n_violations,
            "tol": rep.tol,
        }
        for rep in reports
    }
    _write_csv(
        outdir / "operator_tests.csv",
        ["worst_excess", "n_violations", "n_checks"],
        [[rep.worst_excess, rep.n_violations, rep.n_checks] for rep in reports],
    )
    passed = all(rep.passed for rep in reports)
    return {"results": results, "outputs": ["operator_tests.csv"]}, passed, False


def _exp_lambda_study(cfg: dict, outdir: Path) -> tuple[dict, bool, bool]:
    grid = build_grid(cfg)
    model = build_model(cfg, grid)
    u0 = build_initial(cfg["model"], grid)
    suite = OperatorSuite(grid, shifted=True)
    scfg = _run_config(cfg)
    ls = cfg["lambda_study"]
    lams = tuple(float(x) for x in ls.get("lams", (0.2, 0.1, 0.05, 0.025)))
    n_seeds = int(ls.get("n_seeds", 10))
    seed0 = int(cfg["run"].get("seed", 1234))
    rows = []
    all_monotone = True
    sums = np.zeros(len(lams))
    for i in range(n_seeds):
        ncfg = NoiseConfig(model.n_modes, seed0 + i)
        entries = lambda_convergence_study(u0, suite, model, scfg, ncfg, lams)
        ds = [e.sup_distance for e in entries]
        sums += np.asarray(ds)
        if any(b >= a for a, b in zip(ds, ds[1:])):
            all_monotone = False
        for e in entries:
            rows.append([seed0 + i, e.lam, e.sup_distance])
    _write_csv(outdir / "lambda_study.csv", ["seed", "lam", "sup_distance"], rows)
    results = {
        "lams": list(lams),
        "mean_sup_distance": [float(s) / n_seeds for s in sums],
        "n_seeds": n_seeds,
        "all_seeds_monotone": all_monotone,
    }
    return {"results": results, "outputs": ["lambda_study.csv"]}, all_monotone, False


def _exp_ito_check(cfg: dict, outdir: Path) -> tuple[dict, bool, bool]:
    grid = build_grid(cfg)
    model = build_model(cfg, grid)
    u0 = build_initial(cfg["model"], grid)
    it = cfg["ito"]
    n = float(it.get("n", 50.0))
    dts = [float(x) for x in it.get("dt_values", (1e-2, 5e-3, 2.5e-3))]
    t_final = float(it.get("t_final", 1.0))
    n_paths = int(it.get("n_paths", 200))
    seed = int(it.get("seed", 1234))
    drift = model.drift_eval(u0)
    modes = [model.diffusion_mode(k, u0) for k in range(model.n_modes)]
    det_tot = []
    sto_mean = []
    for dt in dts:
        n_steps = int(round(t_final / dt))
        rep = ito_residual(n, u0, drift, (), dt=dt, n_steps=n_steps)
        det_tot.append(abs(rep.total_residual))
        if modes:
            acc = 0.0
            for p in range(n_paths):
                ncfg = NoiseConfig(len(modes), seed, stream_id=p)
                racc = ito_residual(n, u0, drift, modes, dt=dt, n_steps=n_steps, noise_cfg=ncfg)
                acc += abs(racc.total_residual)
            sto_mean.append(acc / n_paths)
        else:
            sto_mean.append(0.0)
    orders = [
        float(np.log(det_tot[i] / det_tot[i + 1]) / np.log(dts[i] / dts[i + 1]))
        for i in range(len(dts) - 1)
        if det_tot[i + 1] > 0
    ]
    det_order = min(orders) if orders else float("inf")
    sto_decreasing = all(b < a for a, b in zip(sto_mean, sto_mean[1:])) if modes else True
    rows = [[dt, d, s] for dt, d, s in zip(dts, det_tot, sto_mean)]
    _write_csv(outdir / "ito_check.csv", ["dt", "det_total_abs", "sto_mean_abs"], rows)
    results = {
        "penalty_n": n,
        "dt_values": dts,
        "det_total_abs": [float(x) for x in det_tot],
        "det_order": det_order,
        "sto_mean_abs": [float(x) for x in sto_mean],
        "sto_decreasing": sto_decreasing,
    }
    passed = det_order >= 0.9 and sto_decreasing
    return {"results": results, "outputs": ["ito_check.csv"]}, passed, False


_RUNNERS = {
    "simulate": _exp_simulate,
    "hjm": _exp_hjm,
    "coeff-check": _exp_coeff_check,
    "operator-tests": _exp_operator_tests,
    "lambda-study": _exp_lambda_study,
    "ito-check": _exp_ito_check,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mildsim",
        description="Simulate mild solutions of stochastic transport equations "
        "and run their positivity diagnostics.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY.PATH=VALUE",
                        help="override one config value (JSON-parsed)")
    parser.add_argument("--seed", type=int, help="shorthand for --set run.seed=...")
    parser.add_argument("--paths", type=int, help="shorthand for --set run.n_paths=...")
    parser.add_argument("--dt", type=float, help="shorthand for --set run.dt=...")
    parser.add_argument("--out", help="output directory (default: config, then $MILDSIM_OUT)")
    parser.add_argument("--assert", dest="do_assert", action="store_true",
                        help="exit 3 unless the experiment's pass condition holds")
    parser.add_argument("--validate-only", action="store_true",
                        help="check the configuration and exit")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.experiment)
        for item in args.set:
            apply_override(cfg, item)
        if args.seed is not None:
            apply_override(cfg, f"run.seed={args.seed}")
        if args.paths is not None:
            apply_override(cfg, f"run.n_paths={args.paths}")
        if args.dt is not None:
            apply_override(cfg, f"run.dt={args.dt}")
        if args.set or args.seed is not None or args.paths is not None or args.dt is not None:
            from .config import parse_config

            cfg = parse_config(cfg, args.experiment)
    except ConfigError as e:
        for line in e.problems:
            print(f"config error: {line}", file=sys.stderr)
        return 2

    if args.validate_only:
        print("config valid")
        return 0

    outdir = Path(
        args.out
        or cfg.get("output", {}).get("dir")
        or os.environ.get("MILDSIM_OUT")
        or "mildsim-out"
    )
    outdir.mkdir(parents=True, exist_ok=True)

    try:
        payload, passed, aborted = _RUNNERS[cfg["experiment"]](cfg, outdir)
    except ConfigError as e:
        for line in e.problems:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    manifest = {
        "tool": "mildsim",
        "version": __version__,
        "backend": kernels.BACKEND,
        "experiment": cfg["experiment"],
        "config": cfg,
        "passed": passed,
        **payload,
    }
    _write_manifest(outdir, manifest)
    print(f"experiment {cfg['experiment']}: {'pass' if passed else 'FAIL'} "
          f"(outputs in {outdir})")
    if aborted:
        print("at least one path aborted", file=sys.stderr)
        return 4
    if args.do_assert and not passed:
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
