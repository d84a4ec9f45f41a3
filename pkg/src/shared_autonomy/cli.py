"""Command line entry point.

    shared-autonomy simulate --config exp.cfg --seed 7 --out runs/exp
    shared-autonomy eval --checkpoint runs/exp/model.ckpt --config exp.cfg
    shared-autonomy analyze-ft --log ft.csv --runs 5 --out ft_stats.csv
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields, replace

from .config import load_config
from .errors import SharedAutonomyError
from .harness import FtStatRow, OutputError, analyze_ft, eval_recovery, run_experiment, write_csv
from .learner import load_checkpoint

log = logging.getLogger("shared_autonomy")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shared-autonomy")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a seeded learning experiment")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=_u64, default=None, help="overrides experiment.seed")
    sim.add_argument("--out", required=True, help="output directory")

    ev = sub.add_parser("eval", help="score a checkpoint against the config's profiles")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--config", required=True)

    ft = sub.add_parser("analyze-ft", help="per-channel mean/std across logged runs")
    ft.add_argument("--log", required=True)
    ft.add_argument("--runs", type=int, required=True)
    ft.add_argument("--out", required=True)
    return parser


def _simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    results = run_experiment(cfg, args.out)
    for name, (rows, model) in results.items():
        last = rows[-1]
        print(f"{name}: episodes={len(rows)} samples_seen={model.samples_seen} "
              f"boundary_est={last.boundary_est:.4f} accuracy={last.accuracy:.4f}")
    return 0


def _eval(args) -> int:
    cfg = load_config(args.config)
    try:
        model, _ = load_checkpoint(args.checkpoint)
    except OSError as exc:
        raise OutputError(f"cannot read {args.checkpoint}: {exc}") from None
    for name, profile in cfg.profiles.items():
        accuracy, error = eval_recovery(model, profile, cfg)
        print(f"{name}: accuracy={accuracy:.6f} boundary_error={error:.6f}")
    return 0


def _analyze_ft(args) -> int:
    rows = analyze_ft(args.log, args.runs)
    write_csv(rows, args.out, [f.name for f in fields(FtStatRow)])
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    handler = {"simulate": _simulate, "eval": _eval, "analyze-ft": _analyze_ft}[args.command]
    try:
        return handler(args)
    except SharedAutonomyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
