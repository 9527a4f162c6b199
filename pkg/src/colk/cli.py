"""Command-line entry point.

Exit codes: 0 success, 1 validation error (bad flags, config or data),
2 runtime failure (divergence, failed diagnostics, unexpected errors).
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config
from .data import OutlierNoiseSpec, gen_regression_outliers, write_csv
from .errors import ConfigError, DivergenceError, InputError

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="config file of 'section.key = value' lines")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key (repeatable)")
    p.add_argument("--out", help="output directory (or file for gen-data)")
    p.add_argument("--seed", type=int, help="run seed (gen-data: data seed)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="colk", description="Compositional online learning with kernels: experiments and checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("run", help="single experiment; writes metrics.csv")
    _common(p)
    p.add_argument("--method", help="learner (colk, colk-scgd-tracker, polk, bsgd, rbf)")
    p = sub.add_parser("replicate", help="replicate study over training subsamples")
    _common(p)
    p.add_argument("--replicates", type=int, help="number of replicate training sets")
    p = sub.add_parser("gen-data", help="write a synthetic outlier regression CSV")
    _common(p)
    p.add_argument("--n", type=int, help="number of samples")
    p = sub.add_parser("diagnose", help="run the verification suite")
    _common(p)
    return parser


def _config(args, extra=()):
    overrides = list(args.set) + list(extra)
    if args.seed is not None and args.command != "gen-data":
        overrides.append(f"run.seed={args.seed}")
    return load_config(args.config, overrides)


def _cmd_run(args) -> int:
    from .harness import run_single

    cfg = _config(args, [f"run.method={args.method}"] if args.method else [])
    out = Path(args.out or cfg.out)
    res = run_single(cfg, out_path=out / "metrics.csv")
    print(f"method={res.method} iters={res.records[-1][0]} final_test_mse={res.final_test_mse:.6g} "
          f"final_model_order={res.final_model_order} max_projection_gap={max(r[4] for r in res.records):.6g} "
          f"wall_time={res.wall_time:.2f}s -> {out / 'metrics.csv'}")
    return EXIT_OK


def _cmd_replicate(args) -> int:
    from .harness import run_replicates

    cfg = _config(args)
    out = Path(args.out or cfg.out)
    summary = run_replicates(cfg, args.replicates, out_dir=out)
    sys.stdout.write(summary.summary_csv())
    return EXIT_OK


def _cmd_gen_data(args) -> int:
    extra = []
    if args.n is not None:
        extra.append(f"data.n={args.n}")
    if args.seed is not None:
        extra.append(f"data.seed={args.seed}")
    cfg = load_config(args.config, list(args.set) + extra)
    d = cfg.data
    ds = gen_regression_outliers(d.n, OutlierNoiseSpec(d.sigma, d.contam_prob, d.contam_scale), (d.x_min, d.x_max), d.seed)
    out = Path(args.out or "data.csv")
    if out.is_dir():
        out = out / "data.csv"
    write_csv(ds, out)
    print(f"wrote {len(ds)} rows to {out}")
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    from .diagnostics import run_diagnostics

    cfg = _config(args)
    reports = run_diagnostics(cfg, Path(args.out or cfg.out) / "diagnostics", seed=cfg.seed)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_RUNTIME


COMMANDS = {"run": _cmd_run, "replicate": _cmd_replicate, "gen-data": _cmd_gen_data, "diagnose": _cmd_diagnose}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InputError) as exc:
        print(f"colk: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DivergenceError as exc:
        print(f"colk: run diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort exit code contract
        print(f"colk: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
