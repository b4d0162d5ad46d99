#!/usr/bin/env python3
"""Command-line interface for nbm-solver."""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from .config import (
    APPROACH_CHOICES,
    BIAS_CHOICES,
    RunConfig,
    read_config,
    to_train_config,
    validate_config,
    write_config,
)
from .errors import FileFormatError, InvalidConfigError, NbmError, TrainingDivergedError
from .metrics import HistoryWriter, convergence_table, evaluate_errors, write_convergence, write_report
from .network import load_checkpoint, save_checkpoint
from .sampling import sample_collocation
from .trainer import SWITCHING_MODES, train
from .utils import build_pair, configure_logging, load_problem, sampling_mode

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

# argparse destination -> RunConfig field
OVERRIDES = {
    "problem": "problem",
    "resolution": "resolution",
    "levels": "levels",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "approach": "approach",
    "bias": "bias",
    "switching": "switching",
    "tau": "tau",
    "multires_levels": "multires_levels",
    "levelset_file": "levelset_file",
    "seed": "seed",
    "out": "out",
    "eval_resolution": "eval_resolution",
    "workers": "workers",
}


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def config_from_args(args):
    """Config file (if any) with command-line flags applied on top."""
    if args.config:
        cfg = read_config(args.config)
    elif getattr(args, "problem", None) is None:
        raise InvalidConfigError("no problem given; pass --problem or --config")
    else:
        cfg = RunConfig()
    overrides = {
        field: getattr(args, dest)
        for dest, field in OVERRIDES.items()
        if getattr(args, dest, None) is not None
    }
    return validate_config(replace(cfg, **overrides))


def run_training(cfg, out_dir, resolution=None, tag=""):
    """
    Train one configuration into ``out_dir``.

    Writes ``metrics{tag}.csv`` while training, periodic and final
    checkpoints, and ``report{tag}.json`` when the problem has an exact
    solution. Returns ``(state, report)``; ``report`` is None without an
    exact solution.
    """
    torch.manual_seed(cfg.seed)
    spec = load_problem(cfg)
    points = sample_collocation(spec, sampling_mode(cfg, resolution), seed=cfg.seed)
    spec.check_coefficients(points.positions)
    pair = build_pair(cfg)
    train_cfg = to_train_config(cfg)
    checkpoint = out_dir / f"checkpoint{tag}.bin"

    with HistoryWriter(out_dir / f"metrics{tag}.csv") as history:
        def on_epoch(state):
            history.write(state.history[-1])
            epoch = state.epoch + 1
            if cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
                save_checkpoint(out_dir / f"checkpoint{tag}_epoch{epoch:06d}.bin", pair)

        try:
            state = train(spec, pair, train_cfg, points, on_epoch=on_epoch)
        except TrainingDivergedError as e:
            diagnostics = {"epoch": e.epoch, "step": e.step, "last_finite_loss": e.last_finite_loss}
            with open(out_dir / f"diverged{tag}.json", "w", encoding="utf-8") as f:
                json.dump(diagnostics, f, indent=2)
            if e.state_dump is not None:
                torch.save(e.state_dump, out_dir / f"diverged{tag}_state.pt")
            raise

    save_checkpoint(checkpoint, pair)
    report = None
    if spec.has_exact:
        report = evaluate_errors(spec, pair, cfg.eval_resolution)
        final_loss = state.history[-1].loss if state.history else float("nan")
        write_report(
            out_dir / f"report{tag}.json", report,
            problem=spec.name, n_points=len(points), final_loss=final_loss,
            solution_scale=spec.solution_scale,
        )
    return state, report


def solve_command(args):
    """Handle the solve command."""
    cfg = config_from_args(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config(out_dir / "config.txt", cfg)

    state, report = run_training(cfg, out_dir)

    final_loss = state.history[-1].loss if state.history else float("nan")
    print(f"Trained {cfg.problem} for {cfg.epochs} epochs, final loss {final_loss:.6e}")
    if report is not None:
        print(f"  RMSE {report.rmse:.6e}  Linf {report.linf:.6e}  rel L2 {report.rel_l2:.6e}")
    print(f"Results written to {out_dir}")
    return EXIT_OK


def convergence_command(args):
    """Handle the convergence command."""
    cfg = config_from_args(args)
    if len(cfg.levels) < 2:
        raise InvalidConfigError(f"a convergence study needs at least 2 levels; got {cfg.levels}")
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config(out_dir / "config.txt", replace(cfg, sampling="uniform"))

    reports = []
    for n in cfg.levels:
        logger.info("convergence level %d", n)
        _, report = run_training(replace(cfg, sampling="uniform"), out_dir, resolution=n, tag=f"_{n}")
        if report is None:
            raise InvalidConfigError(f"problem {cfg.problem!r} has no exact solution to converge to")
        reports.append(report)

    table = convergence_table(cfg.levels, reports)
    write_convergence(out_dir / "convergence.csv", table)
    print("resolution      rmse      order      linf      order    rel_l2      order")
    for row in table:
        orders = [row[f"{name}_order"] for name in ("rmse", "linf", "rel_l2")]
        orders = [f"{o:9.3f}" if o != "" else " " * 9 for o in orders]
        print(
            f"{row['resolution']:>10d} {row['rmse']:.3e} {orders[0]} "
            f"{row['linf']:.3e} {orders[1]} {row['rel_l2']:.3e} {orders[2]}"
        )
    print(f"Convergence table written to {out_dir / 'convergence.csv'}")
    return EXIT_OK


def eval_command(args):
    """Handle the eval command."""
    pair = load_checkpoint(args.checkpoint)
    cfg = validate_config(RunConfig(
        problem=args.problem,
        levelset_file=args.levelset_file or "",
        eval_resolution=args.resolution,
    ))
    spec = load_problem(cfg)
    report = evaluate_errors(spec, pair, cfg.eval_resolution)
    print(report.to_json())
    return EXIT_OK


def _add_run_arguments(parser):
    parser.add_argument('--config', help='Run configuration file (key = value lines)')
    parser.add_argument('--problem', help='Built-in problem: bulk, sphere, star or lpbe')
    parser.add_argument('--resolution', type=int, help='Grid nodes per axis for uniform sampling')
    parser.add_argument('--epochs', type=int, help='Number of training epochs')
    parser.add_argument('--batch-size', type=int, help='Points per batch (0 for full batch)')
    parser.add_argument('--approach', choices=APPROACH_CHOICES, help='Residual approach')
    parser.add_argument('--bias', choices=BIAS_CHOICES, help='Extrapolation bias')
    parser.add_argument('--switching', choices=SWITCHING_MODES, help='Domain switching schedule')
    parser.add_argument('--tau', type=int, help='Domain switching period in epochs')
    parser.add_argument('--multires-levels', type=int, help='Resolution levels per point')
    parser.add_argument('--levelset-file', help='Raw level-set grid replacing the star interface')
    parser.add_argument('--seed', type=int, help='Seed for initialisation, sampling and shuffling')
    parser.add_argument('--out', help='Output directory')
    parser.add_argument('--eval-resolution', type=int, help='Evaluation grid nodes per axis')
    parser.add_argument('--workers', type=int, help='Threads for residual assembly')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='nbm-solver',
        description='Train neural surrogates of 3D elliptic interface problems.'
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='Log training progress')
    parser.add_argument('-q', '--quiet', action='store_true', help='Only log warnings and errors')

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    # solve command
    solve_parser = subparsers.add_parser('solve', help='Train on one problem and report errors')
    _add_run_arguments(solve_parser)
    solve_parser.set_defaults(levels=None)

    # convergence command
    convergence_parser = subparsers.add_parser(
        'convergence',
        help='Train at several resolutions and tabulate convergence orders'
    )
    _add_run_arguments(convergence_parser)
    convergence_parser.add_argument(
        '--levels',
        type=_int_list,
        help='Comma-separated grid resolutions, e.g. 8,16,32'
    )

    # eval command
    eval_parser = subparsers.add_parser('eval', help='Evaluate a saved checkpoint')
    eval_parser.add_argument('checkpoint', help='Checkpoint written by solve')
    eval_parser.add_argument('--problem', required=True, help='Built-in problem the checkpoint solves')
    eval_parser.add_argument('--resolution', type=int, default=128, help='Evaluation grid nodes per axis')
    eval_parser.add_argument('--levelset-file', help='Raw level-set grid replacing the star interface')
    return parser


def main():
    """Main entry point for the CLI."""
    parser = build_parser()
    args = parser.parse_args()

    if not args.command:
        parser.print_help()
        return 1

    configure_logging(args.verbose, args.quiet)

    commands = {
        'solve': solve_command,
        'convergence': convergence_command,
        'eval': eval_command,
    }
    try:
        return commands[args.command](args)
    except InvalidConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileFormatError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_IO
    except (NbmError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
