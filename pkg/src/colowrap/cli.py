"""Command line entry point: ``colowrap {run,sweep,stability,validate,reduction-check}``.

Exit codes: 0 success, 1 invariant violation, 2 configuration error.
The output directory defaults to ``$COLOWRAP_OUTPUT_DIR`` when set.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .core import LossTensor
from .environments import make_reduction, random_linear_losses
from .errors import InvariantViolation, ParameterError, TensorValidationError
from .harness import (
    LOSS_STREAMS,
    ExperimentConfig,
    measure_stability,
    run_experiment,
    sweep,
    write_experiment,
)
from .policies import default_tunings
from .reference import check_reduction
from .wrapper import run_episode

OUTPUT_ENV = "COLOWRAP_OUTPUT_DIR"


def _ints(text):
    return [int(x) for x in text.split(",") if x]


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _output_dir(args):
    return args.output or os.environ.get(OUTPUT_ENV)


def cmd_run(args):
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    overrides = {"algo": args.algo, "K": args.K, "T": args.T, "d": args.d, "env": args.env,
                 "n_seeds": args.seeds, "master_seed": args.master_seed,
                 "beta": args.beta, "eta": args.eta}
    base.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig.from_dict(base)
    result = run_experiment(cfg, workers=args.workers)
    outdir = _output_dir(args)
    if outdir:
        write_experiment(result, outdir)
    _emit(result.summary())
    return 0


def cmd_sweep(args):
    result = sweep(_ints(args.d), _ints(args.K), _ints(args.T), env=args.env,
                   n_seeds=args.seeds, master_seed=args.master_seed, algo=args.algo,
                   workers=args.workers)
    outdir = _output_dir(args)
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        result.to_csv(os.path.join(outdir, "sweep.csv"))
    _emit({"cells": result.cell_summary()})
    return 0


def cmd_stability(args):
    report = measure_stability({"algo": args.algo, "eta": args.eta, "K": args.K},
                               losses=args.losses, n_rounds=args.rounds, n_seeds=args.seeds,
                               master_seed=args.master_seed, exact_every=args.exact_every)
    _emit(report.to_json())
    return 0


def cmd_validate(args):
    try:
        L = LossTensor.load(args.path)
    except TensorValidationError as exc:
        _emit({"valid": False, "t": exc.t, "i": exc.arm, "error": str(exc)})
        return 1
    _emit({"valid": True, "T": L.T, "d": L.d, "K": L.K})
    return 0


def cmd_reduction_check(args):
    d, K = args.d, args.K
    T = (args.T // (d + 1)) * (d + 1)
    if T == 0:
        raise ParameterError("T must cover at least one block of d+1 rounds")
    lin = random_linear_losses(T // (d + 1), K, args.seed, gap=args.gap)
    L = make_reduction(T, d, K, lin)
    eta = args.eta if args.eta is not None else default_tunings(args.algo, K, T, d)[0]
    beta = args.beta if args.beta is not None else 1.0 / (2 * d + 1)
    record = run_episode(L, {"algo": args.algo, "eta": eta}, beta, args.seed)
    failures = check_reduction(L, lin, record.actions)
    _emit({"T": T, "d": d, "K": K, "ok": not failures, "failures": failures[:20],
           "regret": record.regret})
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colowrap", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run seeded episodes of one configuration")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    p.add_argument("--algo", choices=["exp3", "ftrl"])
    p.add_argument("--K", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--env", help="gap[:g] | random[:sparsity] | delayed | spread | reduction[:g] | file:<path>")
    p.add_argument("--seeds", type=int)
    p.add_argument("--master-seed", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--output", help="directory for summary.json and per-seed traces")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="grid over d, K, T with default tunings")
    p.add_argument("--algo", choices=["exp3", "ftrl"], default="ftrl")
    p.add_argument("--d", default="0,2,8")
    p.add_argument("--K", default="2,4")
    p.add_argument("--T", default="10000")
    p.add_argument("--env", default="gap:0.2")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--output")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stability", help="measure policy movement between updates")
    p.add_argument("--algo", choices=["exp3", "ftrl"], required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--rounds", type=int, default=10_000)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--losses", choices=LOSS_STREAMS, default="spike")
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--exact-every", type=int, default=0,
                   help="also compute the exact conditional movement every N rounds")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("validate", help="load a tensor file (.csv or .json) and check invariants")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("reduction-check", help="replay the linear-bandit embedding on one run")
    p.add_argument("--algo", choices=["exp3", "ftrl"], default="ftrl")
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--T", type=int, default=300)
    p.add_argument("--gap", type=float, default=0.2)
    p.add_argument("--eta", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_reduction_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
