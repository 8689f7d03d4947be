"""Command-line driver: ``longsub {fit,simulate,metrics,bench}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .backfit import make_bases, run
from .bench import report_text, run_bench, summarize
from .config import RunConfig
from .errors import ConfigError, LongsubError, MissingColumn
from .io import fmt, read_long_csv, read_memberships, write_panel, write_results
from .simgen import ScenarioSpec, generate

CASE_COVARIANCE = {1: ("ar1", 0.3), 2: ("exchangeable", 0.3), 3: ("exchangeable", 0.5)}


class UsageError(Exception):
    pass


def _apply_overrides(config: RunConfig, pairs):
    for pair in pairs or ():
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        try:
            config.set(key, value)
        except ConfigError as exc:
            raise UsageError(str(exc)) from None


def cmd_fit(args) -> int:
    if args.config:
        try:
            config = RunConfig.load(args.config)
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
        base = Path(args.config).resolve().parent
    else:
        config, base = RunConfig(), Path.cwd()
    _apply_overrides(config, args.set)
    if args.data:
        data_path = Path(args.data)
    elif config.data.path:
        data_path = Path(config.data.path)
        if not data_path.is_absolute():
            data_path = base / data_path
    else:
        raise UsageError("no input data: pass --data or set data.path in the config")
    if not data_path.exists():
        raise UsageError(f"data file {data_path} not found")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config.to_text())
    dataset = read_long_csv(data_path, config.data)
    bases = make_bases(dataset, config)
    model = run(dataset, config, bases=bases)
    write_results(model, bases, out, config.output.grid_size)
    print(f"subjects={dataset.n} groups={','.join(str(m) for m in model.m)} "
          f"sweeps={model.iterations} converged={str(model.converged).lower()}")
    return 0


def cmd_simulate(args) -> int:
    spec = ScenarioSpec(case=args.case, n=args.n, seed=args.seed)
    panel = generate(spec)
    out = Path(args.out)
    write_panel(panel, out)
    structure, rho = CASE_COVARIANCE[args.case]
    template = RunConfig()
    template.data.path = "data.csv"
    template.covariance.structure = args.corr or structure
    template.covariance.rho = rho if args.rho is None else args.rho
    (out / "fit.cfg").write_text(template.to_text())
    print(f"wrote {panel.dataset.n} subjects, {panel.dataset.n_obs} rows to {out}")
    return 0


def _aligned(est: dict, truth: dict):
    if sorted(est) != sorted(truth):
        raise LongsubError("estimated and true memberships cover different covariates")
    ids = list(truth[min(truth)])
    out_e, out_t = [], []
    for j in sorted(truth):
        missing = [s for s in ids if s not in est[j]]
        if missing or len(est[j]) != len(truth[j]):
            raise LongsubError(f"covariate {j}: subject sets differ")
        out_e.append(np.array([est[j][s] for s in ids]))
        out_t.append(np.array([truth[j][s] for s in ids]))
    return out_e, out_t


def cmd_metrics(args) -> int:
    est, tru = _aligned(read_memberships(args.est), read_memberships(args.truth))
    rows = [("covariate", "accuracy", "nmi", "rand_index")]
    for j, (e, t) in enumerate(zip(est, tru)):
        rows.append((str(j + 1), fmt(metrics.accuracy(e, t)), fmt(metrics.nmi(e, t)),
                     fmt(metrics.rand_index(e, t))))
    je, jt = metrics.joint_labels(est), metrics.joint_labels(tru)
    rows.append(("all", fmt(metrics.total_accuracy(est, tru)), fmt(metrics.nmi(je, jt)),
                 fmt(metrics.rand_index(je, jt))))
    print("\n".join(",".join(r) for r in rows))
    return 0


def cmd_bench(args) -> int:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    structure, rho = CASE_COVARIANCE[args.case]
    config.covariance.structure = args.corr or structure
    config.covariance.rho = rho if args.rho is None else args.rho
    _apply_overrides(config, args.set)
    spec = ScenarioSpec(case=args.case, n=args.n, seed=args.seed)
    results = run_bench(spec, config, args.reps, args.threads)
    text = report_text(results)
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)
    summary = summarize(results)
    print(" ".join(f"{k}={v:.4f}" for k, v in summary.items()), file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="longsub", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the subgroup model to a long-format CSV")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--data", help="input CSV (overrides data.path)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="write a simulated panel, its truth and a fit config")
    p.add_argument("--case", type=int, choices=sorted(CASE_COVARIANCE), required=True)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corr", help="working correlation for the config template")
    p.add_argument("--rho", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="score estimated memberships against the truth")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="Monte Carlo replicates of a simulation case")
    p.add_argument("--case", type=int, choices=sorted(CASE_COVARIANCE), required=True)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corr")
    p.add_argument("--rho", type=float)
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--threads", type=int, help="worker processes (default from LONGSUB_THREADS)")
    p.add_argument("--out", help="report CSV path (default stdout)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, MissingColumn) as exc:
        print(f"longsub {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (LongsubError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"longsub {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
