"""Command-line surface: bound computation, weight optimization, single
recoveries, Monte-Carlo sweeps, and the bound-comparison table.

Angle vectors are passed as comma-separated degrees inline, or through a JSON
config file.  When both are given, the config file wins and a warning names
every overridden flag.  Every run writes a manifest JSON recording the
command, the full effective config, the master seed, the artifact version,
timestamps and output paths.

Exit codes: 0 success, 1 solver non-convergence (recover), 2 malformed input.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .basis import WeightSpec
from .bounds import AnglePair, bound_report, optimize_weights, single_weight_report
from .experiments import (
    METHODS,
    default_table1_rows,
    make_instance,
    method_weights,
    nre,
    sweep,
    table1,
    weighting_operators,
    write_sweep_csv,
    write_table1_csv,
)
from .measure import add_noise, apply, gaussian_operator, spawn_seeds
from .solver import SolverConfig, solve


def _parse_floats(text: str, name: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ValueError(f"{name}: expected comma-separated numbers, got {text!r}")
    if not values:
        raise ValueError(f"{name}: empty list")
    return values


def _angles_from(theta_u, theta_v) -> AnglePair:
    tu = np.asarray(theta_u, dtype=float)
    tv = np.asarray(theta_v, dtype=float)
    if np.any(tu < 0) or np.any(tv < 0) or np.any(tu > 90) or np.any(tv > 90):
        raise ValueError("theta_u/theta_v: angles must lie in [0, 90] degrees")
    return AnglePair.from_degrees(tu, tv)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"config: cannot read {path}: {exc}")
    if not isinstance(cfg, dict):
        raise ValueError("config: top level must be a JSON object")
    return cfg


def _merge(cfg: dict, key: str, flag_value, default):
    """Config value wins over an explicitly set flag, with a warning."""
    if key in cfg:
        if flag_value is not None and flag_value != cfg[key]:
            print(
                f"warning: config overrides --{key.replace('_', '-')}"
                f" ({flag_value!r} -> {cfg[key]!r})",
                file=sys.stderr,
            )
        return cfg[key]
    return flag_value if flag_value is not None else default


def _write_manifest(
    out_dir: Path, command: str, config: dict, seed, outputs: list[str],
    started: float,
) -> None:
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "master_seed": seed,
        "version": __version__,
        "started": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "wall_time_s": round(time.time() - started, 3),
        "outputs": outputs,
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def _out_dir(args) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _cmd_bounds(args) -> int:
    started = time.time()
    angles = _angles_from(
        _parse_floats(args.theta_u, "theta-u"), _parse_floats(args.theta_v, "theta-v")
    )
    r = angles.r
    r_prime = args.r_prime if args.r_prime is not None else r
    given = [args.lambda1, args.lambda2, args.gamma1, args.gamma2]
    if any(v is not None for v in given):
        if args.lambda1 is None or args.gamma1 is None:
            raise ValueError("weights: lambda1 and gamma1 are required when any weight is given")
        spec = WeightSpec(
            np.sort(_parse_floats(args.lambda1, "lambda1"))[::-1],
            _parse_floats(args.lambda2, "lambda2") if args.lambda2 else np.ones(r_prime - r),
            np.sort(_parse_floats(args.gamma1, "gamma1"))[::-1],
            _parse_floats(args.gamma2, "gamma2") if args.gamma2 else np.ones(r_prime - r),
        )
    else:
        spec = WeightSpec.ones(r, r_prime)
    report = bound_report(angles, spec, eval_delta=args.delta, d1_variant=args.d1_variant)
    single = single_weight_report(
        float(angles.theta_u[0]), float(angles.theta_v[0]),
        float(spec.lambda1[0]), float(spec.gamma1[0]),
    )
    print(f"alpha3 = {report.alpha3:.6f}")
    print(f"alpha4 = {report.alpha4:.6f}")
    print(f"delta_multi  = {report.delta_multi:.6f}")
    print(f"alpha1 = {single.alpha1:.6f}  alpha2 = {single.alpha2:.6f}")
    print(f"delta_single = {single.delta_single:.6f}")
    if report.feasible:
        print(f"C0 = {report.C0:.6f}  C1 = {report.C1:.6f}  (at delta = {report.eval_delta})")
    else:
        print(f"error constants infeasible at delta = {report.eval_delta}")
    out = _out_dir(args)
    payload = report.to_dict()
    payload.update({
        "alpha1": single.alpha1, "alpha2": single.alpha2,
        "delta_single": single.delta_single,
        "theta_u_deg": list(map(float, np.rad2deg(angles.theta_u))),
        "theta_v_deg": list(map(float, np.rad2deg(angles.theta_v))),
    })
    with open(out / "bounds.json", "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    _write_manifest(out, "bounds", payload, None, ["bounds.json"], started)
    return 0


def _cmd_optimize_weights(args) -> int:
    started = time.time()
    angles = _angles_from(
        _parse_floats(args.theta_u, "theta-u"), _parse_floats(args.theta_v, "theta-v")
    )
    r = angles.r
    r_prime = args.r_prime if args.r_prime is not None else r
    spec, report = optimize_weights(
        angles, r, r_prime, budget=args.budget, seed=args.seed,
        mode=args.mode, d1_variant=args.d1_variant,
    )
    print(f"lambda1 = {np.round(spec.lambda1, 6).tolist()}")
    print(f"lambda2 = {np.round(spec.lambda2, 6).tolist()}")
    print(f"gamma1  = {np.round(spec.gamma1, 6).tolist()}")
    print(f"gamma2  = {np.round(spec.gamma2, 6).tolist()}")
    print(f"alpha3 = {report.alpha3:.6f}  alpha4 = {report.alpha4:.6f}")
    print(f"delta_multi = {report.delta_multi:.6f}")
    out = _out_dir(args)
    payload = {
        "mode": args.mode,
        "budget": args.budget,
        "lambda1": spec.lambda1.tolist(),
        "lambda2": spec.lambda2.tolist(),
        "gamma1": spec.gamma1.tolist(),
        "gamma2": spec.gamma2.tolist(),
        **report.to_dict(),
    }
    with open(out / "weights.json", "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    _write_manifest(out, "optimize-weights", payload, args.seed, ["weights.json"], started)
    return 0


def _recover_config(args) -> dict:
    cfg = _load_config(args.config)
    merged = {
        "n": _merge(cfg, "n", args.n, 20),
        "r": _merge(cfg, "r", args.r, 3),
        "r_prime": _merge(cfg, "r_prime", args.r_prime, None),
        "theta_u": _merge(
            cfg, "theta_u",
            _parse_floats(args.theta_u, "theta-u") if args.theta_u else None, None,
        ),
        "theta_v": _merge(
            cfg, "theta_v",
            _parse_floats(args.theta_v, "theta-v") if args.theta_v else None, None,
        ),
        "p": _merge(cfg, "p", args.p, None),
        "e": _merge(cfg, "e", args.e, 0.0),
        "e_mode": _merge(cfg, "e_mode", None, "absolute"),
        "method": _merge(cfg, "method", args.method, "multi"),
        "seed": _merge(cfg, "seed", args.seed, 0),
        "budget": _merge(cfg, "budget", args.budget, 10_000),
        "max_iters": _merge(cfg, "max_iters", None, 2000),
        "abs_tol": _merge(cfg, "abs_tol", None, 1e-7),
        "rel_tol": _merge(cfg, "rel_tol", None, 1e-6),
        "d1_variant": _merge(cfg, "d1_variant", args.d1_variant, "assembled"),
    }
    for key in ("theta_u", "theta_v", "p"):
        if merged[key] is None:
            raise ValueError(f"config: missing required field {key!r}")
    if merged["r_prime"] is None:
        merged["r_prime"] = len(merged["theta_u"])
    if merged["method"] not in METHODS:
        raise ValueError(f"method: expected one of {METHODS}")
    if merged["e"] < 0:
        raise ValueError("e: noise radius must be >= 0")
    if int(merged["p"]) < 1:
        raise ValueError("p: must be >= 1")
    if merged["e_mode"] not in ("absolute", "relative"):
        raise ValueError("e_mode: expected 'absolute' or 'relative'")
    return merged


def _cmd_recover(args) -> int:
    started = time.time()
    cfg = _recover_config(args)
    angles = _angles_from(cfg["theta_u"], cfg["theta_v"])
    if angles.r != cfg["r"]:
        raise ValueError(
            f"theta_u: length {angles.r} does not match r={cfg['r']}"
        )
    inst = make_instance(cfg["n"], cfg["r"], cfg["r_prime"], angles, cfg["seed"])
    spec = method_weights(inst, cfg["method"], budget=cfg["budget"],
                          seed=cfg["seed"], d1_variant=cfg["d1_variant"])
    Q_U, Q_V = weighting_operators(inst, spec)
    op_seed, noise_seed = spawn_seeds(cfg["seed"], int(cfg["p"]), 0)
    op = gaussian_operator(cfg["n"], int(cfg["p"]), op_seed)
    y0 = apply(op, inst.X)
    radius = cfg["e"] if cfg["e_mode"] == "absolute" else cfg["e"] * float(np.linalg.norm(y0))
    y, _ = add_noise(y0, radius, noise_seed)
    solver_cfg = SolverConfig(
        max_iters=int(cfg["max_iters"]), abs_tol=cfg["abs_tol"], rel_tol=cfg["rel_tol"]
    )
    res = solve(op, y, Q_U, Q_V, e=radius, config=solver_cfg)
    err = nre(res.estimate, inst.X)
    print(f"method = {cfg['method']}  p = {cfg['p']}  e = {radius:.6g}")
    print(f"NRE = {err:.6e}  converged = {res.converged}  iterations = {res.iterations}")
    print(f"objective = {res.objective:.9g}  feasibility_gap = {res.feasibility_gap:.3e}")
    out = _out_dir(args)
    payload = {
        "config": cfg,
        "nre": err,
        "success": bool(res.converged and err <= 1e-4),
        "converged": res.converged,
        "iterations": res.iterations,
        "objective": res.objective,
        "feasibility_gap": res.feasibility_gap,
        "noise_radius": radius,
    }
    with open(out / "recovery.json", "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    _write_manifest(out, "recover", cfg, cfg["seed"], ["recovery.json"], started)
    return 0 if res.converged else 1


def _sweep_config(args) -> dict:
    cfg = _load_config(args.config)
    merged = {
        "n": _merge(cfg, "n", args.n, 20),
        "r": _merge(cfg, "r", args.r, 3),
        "r_prime": _merge(cfg, "r_prime", args.r_prime, None),
        "theta_u": _merge(
            cfg, "theta_u",
            _parse_floats(args.theta_u, "theta-u") if args.theta_u else None, None,
        ),
        "theta_v": _merge(
            cfg, "theta_v",
            _parse_floats(args.theta_v, "theta-v") if args.theta_v else None, None,
        ),
        "p_grid": _merge(cfg, "p_grid", None, None),
        "trials": _merge(cfg, "trials", args.trials, 50),
        "e": _merge(cfg, "e", args.e, 0.0),
        "e_mode": _merge(cfg, "e_mode", None, "absolute"),
        "methods": _merge(cfg, "methods", None, list(METHODS)),
        "seed": _merge(cfg, "seed", args.seed, 0),
        "budget": _merge(cfg, "budget", args.budget, 10_000),
        "threads": _merge(cfg, "threads", args.threads, None),
        "max_iters": _merge(cfg, "max_iters", None, 2000),
        "abs_tol": _merge(cfg, "abs_tol", None, 1e-7),
        "rel_tol": _merge(cfg, "rel_tol", None, 1e-6),
        "d1_variant": _merge(cfg, "d1_variant", args.d1_variant, "assembled"),
    }
    for key in ("theta_u", "theta_v", "p_grid"):
        if merged[key] is None:
            raise ValueError(f"config: missing required field {key!r}")
    if merged["r_prime"] is None:
        merged["r_prime"] = len(merged["theta_u"])
    if not isinstance(merged["p_grid"], (list, tuple)) or not merged["p_grid"]:
        raise ValueError("p_grid: must be a non-empty list of integers")
    if any(int(p) < 1 for p in merged["p_grid"]):
        raise ValueError("p_grid: all entries must be >= 1")
    if int(merged["trials"]) < 1:
        raise ValueError("trials: must be >= 1")
    unknown = set(merged["methods"]) - set(METHODS)
    if unknown:
        raise ValueError(f"methods: unknown {sorted(unknown)}")
    if merged["e"] < 0:
        raise ValueError("e: noise radius must be >= 0")
    if merged["e_mode"] not in ("absolute", "relative"):
        raise ValueError("e_mode: expected 'absolute' or 'relative'")
    return merged


def _cmd_sweep(args) -> int:
    started = time.time()
    cfg = _sweep_config(args)
    angles = _angles_from(cfg["theta_u"], cfg["theta_v"])
    if angles.r != cfg["r"]:
        raise ValueError(f"theta_u: length {angles.r} does not match r={cfg['r']}")
    inst = make_instance(cfg["n"], cfg["r"], cfg["r_prime"], angles, cfg["seed"])
    solver_cfg = SolverConfig(
        max_iters=int(cfg["max_iters"]), abs_tol=cfg["abs_tol"], rel_tol=cfg["rel_tol"]
    )
    results = sweep(
        inst,
        methods=cfg["methods"],
        p_grid=[int(p) for p in cfg["p_grid"]],
        trials=int(cfg["trials"]),
        e=cfg["e"],
        e_mode=cfg["e_mode"],
        seed=cfg["seed"],
        solver_config=solver_cfg,
        budget=int(cfg["budget"]),
        threads=cfg["threads"],
        d1_variant=cfg["d1_variant"],
    )
    out = _out_dir(args)
    write_sweep_csv(results, out / "sweep.csv")
    for res in results:
        rates = "  ".join(f"p={pt.p}:{pt.success_rate:.2f}" for pt in res.points)
        print(f"{res.method:9s} {rates}")
    _write_manifest(out, "sweep", cfg, cfg["seed"], ["sweep.csv"], started)
    return 0


def _cmd_table1(args) -> int:
    started = time.time()
    cfg = _load_config(args.config)
    r = _merge(cfg, "r", None, 3)
    r_prime = _merge(cfg, "r_prime", args.r_prime, 7)
    n = _merge(cfg, "n", args.n, 30)
    budget = _merge(cfg, "budget", args.budget, 10_000)
    seed = _merge(cfg, "seed", args.seed, 0)
    d1_variant = _merge(cfg, "d1_variant", args.d1_variant, "assembled")
    if "rows" in cfg:
        rows = [
            _angles_from(row["theta_u"], row["theta_v"]) for row in cfg["rows"]
        ]
    else:
        rows = default_table1_rows()
    table = table1(rows, r=r, r_prime=r_prime, n=n, budget=int(budget),
                   seed=int(seed), d1_variant=d1_variant)
    print("theta_u (deg) | delta_std | delta_unif | delta_multi | delta_single_unif")
    for row in table:
        tu = ",".join(f"{v:g}" for v in row["theta_u_deg"])
        print(
            f"[{tu}]  {row['delta_standard']:.4f}  {row['delta_uniform']:.4f}"
            f"  {row['delta_multi']:.4f}  {row['delta_single_uniform']:.4f}"
        )
    out = _out_dir(args)
    write_table1_csv(table, out / "table1.csv")
    effective = {"r": r, "r_prime": r_prime, "n": n, "budget": budget, "seed": seed,
                 "d1_variant": d1_variant,
                 "rows": [
                     {"theta_u": row["theta_u_deg"], "theta_v": row["theta_v_deg"]}
                     for row in table
                 ]}
    _write_manifest(out, "table1", effective, seed, ["table1.csv"], started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mwnnm",
        description="Low-rank matrix recovery with per-direction subspace-prior weighting",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeded=True):
        p.add_argument("--out-dir", default=".", help="directory for outputs and the manifest")
        p.add_argument("--d1-variant", default="assembled", choices=["assembled", "alt"],
                       dest="d1_variant")
        if seeded:
            p.add_argument("--seed", type=int, default=None)

    b = sub.add_parser("bounds", help="recovery-condition constants for given angles/weights")
    b.add_argument("--theta-u", required=True, help="comma-separated degrees")
    b.add_argument("--theta-v", required=True)
    b.add_argument("--r-prime", type=int, default=None)
    b.add_argument("--lambda1", default=None)
    b.add_argument("--lambda2", default=None)
    b.add_argument("--gamma1", default=None)
    b.add_argument("--gamma2", default=None)
    b.add_argument("--delta", type=float, default=0.0,
                   help="operator isometry constant at which C0/C1 are evaluated")
    common(b, seeded=False)
    b.set_defaults(func=_cmd_bounds)

    o = sub.add_parser("optimize-weights", help="weights maximizing the multi-weight bound")
    o.add_argument("--theta-u", required=True)
    o.add_argument("--theta-v", required=True)
    o.add_argument("--r-prime", type=int, default=None)
    o.add_argument("--budget", type=int, default=10_000)
    o.add_argument("--mode", default="multi", choices=["multi", "uniform"])
    common(o)
    o.set_defaults(func=_cmd_optimize_weights)

    rec = sub.add_parser("recover", help="single synthetic recovery")
    rec.add_argument("--config", default=None)
    rec.add_argument("--n", type=int, default=None)
    rec.add_argument("--r", type=int, default=None)
    rec.add_argument("--r-prime", type=int, default=None)
    rec.add_argument("--theta-u", default=None)
    rec.add_argument("--theta-v", default=None)
    rec.add_argument("--p", type=int, default=None)
    rec.add_argument("--e", type=float, default=None)
    rec.add_argument("--method", default=None, choices=list(METHODS))
    rec.add_argument("--budget", type=int, default=None)
    common(rec)
    rec.set_defaults(func=_cmd_recover)

    sw = sub.add_parser("sweep", help="Monte-Carlo success-rate sweep over p")
    sw.add_argument("--config", default=None)
    sw.add_argument("--n", type=int, default=None)
    sw.add_argument("--r", type=int, default=None)
    sw.add_argument("--r-prime", type=int, default=None)
    sw.add_argument("--theta-u", default=None)
    sw.add_argument("--theta-v", default=None)
    sw.add_argument("--trials", type=int, default=None)
    sw.add_argument("--e", type=float, default=None)
    sw.add_argument("--budget", type=int, default=None)
    sw.add_argument("--threads", type=int, default=None)
    common(sw)
    sw.set_defaults(func=_cmd_sweep)

    t = sub.add_parser("table1", help="bound-comparison table over angle rows")
    t.add_argument("--config", default=None)
    t.add_argument("--r-prime", type=int, default=None)
    t.add_argument("--n", type=int, default=None)
    t.add_argument("--budget", type=int, default=None)
    common(t)
    t.set_defaults(func=_cmd_table1)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
