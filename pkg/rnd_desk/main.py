#!/usr/bin/env python3
"""
Main entry point for the rnd-desk command line
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import __version__
from .baselines import BONUS_KINDS
from .config import ExperimentConfig, config_hash, load_config
from .display import Display
from .errors import CheckFailedError, InvalidArgumentError, RndDeskError
from .runner import check_report, resume_training, run_noisytv_contrast, run_novelty, run_training
from .utils import Colors as C, setup_logging, use_color

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='rnd-desk',
        description='rnd-desk: random network distillation exploration at desk scale',
        epilog='Every output directory gets a config.resolved with its config hash.',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')

    verbosity = argparse.ArgumentParser(add_help=False)
    verbosity.add_argument('-v', '--verbose', action='count', default=0, help='more logging (-vv for debug)')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='warnings and errors only')

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument('--out', type=Path, help='output directory (overrides the config)')

    common = argparse.ArgumentParser(add_help=False, parents=[verbosity, output])
    common.add_argument('--config', type=Path, help='YAML experiment config (defaults apply to missing keys)')
    common.add_argument('--seed', type=int, help='64-bit run seed (overrides the config)')

    sub = parser.add_subparsers(dest='command', required=True)

    train = sub.add_parser('train', parents=[common], help='run the PPO + exploration-bonus training loop')
    train.add_argument('--frames', type=int, help='frame budget; sets the number of updates')
    train.add_argument('--bonus', choices=BONUS_KINDS, help='exploration bonus (default: rnd)')

    sub.add_parser('novelty', parents=[common], help='held-out MSE vs target-class count, writes curve.csv')

    noisytv = sub.add_parser('noisytv', parents=[common], help='noisy-TV contrast of rnd vs dynamics bonuses')
    noisytv.add_argument('--no-agents', action='store_true', help='skip the occupancy runs with full agents')

    check = sub.add_parser('check', parents=[verbosity], help='acceptance verdict for curve.csv or noisytv_report.yaml')
    check.add_argument('path', type=Path, help='report file or output directory')
    check.add_argument('--required', type=int, default=4, help='seeds that must show a negative trend (default: 4)')

    replay = sub.add_parser('replay-snapshot', parents=[verbosity, output], help='resume a run from snapshot.bin',
                            epilog='Config and seed come from the snapshot; --out defaults to its directory.')
    replay.add_argument('snapshot', type=Path, help='snapshot file written by train')
    replay.add_argument('--updates', type=int, help='updates to run (default: up to the configured total)')
    return parser


def _load(args: argparse.Namespace, **extra: Any) -> ExperimentConfig:
    overrides: Dict[str, Any] = {'seed': args.seed, 'out': str(args.out) if args.out else None}
    overrides.update(extra)
    return load_config(args.config, overrides)


def cmd_train(args: argparse.Namespace, display: Display) -> int:
    cfg = _load(args, frames=args.frames, **{'bonus.kind': args.bonus})
    if not args.quiet:
        display.show_banner(f"train │ bonus {cfg.bonus.kind} │ seed {cfg.seed} │ config {config_hash(cfg)}")
        display.show_update_header()
    result = run_training(cfg, cfg.out, on_update=None if args.quiet else display.show_update_row)
    display.show_training_summary(result.rows, result.out_dir)
    return 0


def cmd_novelty(args: argparse.Namespace, display: Display) -> int:
    cfg = _load(args)
    print(f"\n{C.C}[NOVELTY]{C.X} target class {cfg.novelty.target_class}, n = {cfg.novelty.n_values}")
    curves = run_novelty(cfg, cfg.out)
    display.show_curves(curves)
    print(f"{C.D}Curve written to {Path(cfg.out) / 'curve.csv'}{C.X}")
    return 0


def cmd_noisytv(args: argparse.Namespace, display: Display) -> int:
    cfg = _load(args)
    print(f"\n{C.C}[NOISY-TV]{C.X} noisy room {cfg.env.noisy_tile} vs room {cfg.noisytv.deterministic_tile}")
    report = run_noisytv_contrast(cfg, cfg.out, with_agents=not args.no_agents)
    display.show_noisytv(report)
    print(f"{C.D}Report written to {Path(cfg.out) / 'noisytv_report.yaml'}{C.X}")
    return 0


def cmd_check(args: argparse.Namespace, display: Display) -> int:
    report = check_report(args.path, args.required)
    display.show_check(report)
    if not report.passed:
        raise CheckFailedError(f"{report.source} does not meet its acceptance threshold")
    return 0


def cmd_replay(args: argparse.Namespace, display: Display) -> int:
    if not args.snapshot.is_file():
        raise InvalidArgumentError(f"snapshot not found: {args.snapshot}")
    if not args.quiet:
        display.show_update_header()
    result = resume_training(args.snapshot, args.out, num_updates=args.updates,
                             on_update=None if args.quiet else display.show_update_row)
    display.show_training_summary(result.rows, result.out_dir)
    return 0


COMMANDS = {
    'train': cmd_train,
    'novelty': cmd_novelty,
    'noisytv': cmd_noisytv,
    'check': cmd_check,
    'replay-snapshot': cmd_replay,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    setup_logging(-1 if args.quiet else args.verbose)
    if not use_color(sys.stdout):
        C.disable()
    display = Display()

    try:
        return COMMANDS[args.command](args, display)
    except RndDeskError as exc:
        display.show_error(exc.category, str(exc))
        return exc.exit_code
    except OSError as exc:
        display.show_error('io', str(exc))
        return InvalidArgumentError.exit_code
    except KeyboardInterrupt:
        display.show_interrupted()
        return 130


if __name__ == "__main__":
    sys.exit(main())
