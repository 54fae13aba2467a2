"""Command-line entry point: ``robustlab {estimate,experiment,separation-demo,theorycheck}``.

Exit codes: 0 on success, 2 on usage errors, 1 on numeric failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core import NumericError, RngStream, UsageError


def _load_config(path):
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise UsageError("config must be a JSON object")
    return obj


def load_dataset_csv(path: str) -> np.ndarray:
    """One point per row, comma separated, no header."""
    try:
        data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except OSError as exc:
        raise UsageError(f"cannot read dataset {path}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"malformed dataset {path}: {exc}") from None
    if data.size == 0:
        raise UsageError(f"dataset {path} is empty")
    return data


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        try:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def cmd_estimate(args, cfg):
    from .spread_estimator import subg_estimate

    if not args.data:
        raise UsageError("estimate needs --data PATH")
    X = load_dataset_csv(args.data)
    delta = float(args.delta if args.delta is not None else cfg.get("delta", 0.05))
    s = int(args.s if args.s is not None else cfg.get("s", 1))
    est = subg_estimate(X, delta, s, RngStream(args.seed))
    _emit(
        {
            "mu_hat": est.mu_hat.tolist(),
            "mu_tilde": est.mu_tilde.tolist(),
            "v": est.v.tolist(),
            "sigma_v": est.sigma_v,
            "eps": est.eps,
            "s": est.s,
            "delta": delta,
            "objective": est.objective,
            "seed": args.seed,
        },
        args.out,
    )


def cmd_experiment(args, cfg):
    from .harness import ExperimentConfig, run_experiment

    cfg = dict(cfg)
    cfg["seed"] = args.seed if args.seed is not None else cfg.get("seed", 0)
    if args.out:
        cfg["output"] = args.out
    if not cfg.get("output"):
        raise UsageError("experiment needs --out PATH or an 'output' config key")
    records = run_experiment(ExperimentConfig.from_json(cfg), threads=args.threads)
    sys.stderr.write(f"wrote {len(records)} records to {cfg['output']}\n")


def cmd_separation(args, cfg):
    from .harness import SeparationConfig, separation_demo

    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if "R_grid" in cfg:
        cfg["R_grid"] = tuple(cfg["R_grid"])
    try:
        sc = SeparationConfig(**cfg)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    rep = separation_demo(sc)
    _emit(
        {
            "config": {**sc.__dict__, "R_grid": list(sc.R_grid), "delta_used": sc.delta_used},
            "rows": [
                {
                    "R": row.R,
                    "median_subg_error": float(np.median(row.subg_error_max)),
                    "median_center_error": float(np.median(row.center_error)),
                    "success_fraction": row.success_fraction,
                }
                for row in rep.rows
            ],
            "clean_successes": rep.clean_successes,
            "stable_fraction_min": float(rep.stable_fractions.min()) if rep.stable_fractions.size else None,
            "stable_bound": rep.stable_bound,
            "stable_constant_max": float(rep.stable_constants.max()) if rep.stable_constants.size else None,
        },
        args.out,
    )


def cmd_theorycheck(args, cfg):
    from .theorycheck import CubeSet, binomial_sweep, hamming_blowup_exact

    n_max = int(cfg.get("binomial_n_max", 50))
    reports = binomial_sweep(n_max)
    bad = [r for r in reports if not r.holds]
    cube_n = int(cfg.get("cube_n", 12))
    sets = int(cfg.get("cube_sets", 20))
    rng = RngStream(args.seed or 0)
    cube_bad = 0
    for i in range(sets):
        S = CubeSet.random_with_mass(cube_n, rng.child(i))
        for j in range(1, 5):
            cube_bad += not hamming_blowup_exact(S, j / cube_n).holds
    _emit(
        {
            "binomial_cases": len(reports),
            "binomial_violations": len(bad),
            "binomial_violations_integral_threshold": sum(r.integral_threshold for r in bad),
            "cube_sets": sets,
            "cube_violations": cube_bad,
        },
        args.out,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustlab", description="Robust mean estimation laboratory.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, default=None, help="64-bit seed")
    common.add_argument("--out", help="output path (stdout when omitted for JSON reports)")
    common.add_argument("--threads", type=int, default=1, help="worker processes (ROBUSTLAB_THREADS overrides)")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("estimate", parents=[common], help="estimate the mean of a CSV dataset")
    p.add_argument("--data", help="CSV dataset, one point per row, no header")
    p.add_argument("--delta", type=float, default=None, help="failure probability in (0, 1/4], default 0.05")
    p.add_argument("--s", type=int, default=None, choices=(1, -1), help="sign of the perturbation, default 1")
    p.set_defaults(func=cmd_estimate)
    sub.add_parser("experiment", parents=[common], help="run an experiment config to CSV").set_defaults(func=cmd_experiment)
    sub.add_parser("separation-demo", parents=[common], help="symmetric-spread separation demo").set_defaults(
        func=cmd_separation
    )
    sub.add_parser("theorycheck", parents=[common], help="exact binomial and cube sweeps").set_defaults(
        func=cmd_theorycheck
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = _load_config(args.config)
        if args.command == "estimate" and args.seed is None:
            args.seed = int(cfg.get("seed", 0))
        args.func(args, cfg)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 2
    except NumericError as exc:
        sys.stderr.write(f"numeric error: {exc} (residual {exc.residual})\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
