# main.py

import argparse
import logging
import sys

log_formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
console_handler = logging.StreamHandler(sys.stdout)
console_handler.setFormatter(log_formatter)
early_logger = logging.getLogger()
early_logger.addHandler(console_handler)
early_logger.setLevel(logging.INFO)

from app_config import ExperimentConfig, load_config, overrides_from_args
from data_model import SimulationError
from logger_setup import setup_logging
from services import BASELINE_KINDS, BaselineService, EvaluationService, SweepService, TrainingService
from settings import LOGGING_ENABLED

DEFAULT_EPSILONS = "1,0.5,0.1,0.05,0.02,0.01"
DEFAULT_AGENT_COUNTS = "2,3,4,5,6,7,8"
DEFAULT_TASK_COUNTS = "5,10,15,20,25"


def _number_list(text: str, kind=float):
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="properties file with key = value lines")
    common.add_argument("--seed", type=int, help="master seed (run.seed)")
    common.add_argument("--workers", type=int, help="rollout worker processes (run.workers)")
    common.add_argument("--out", help="output directory (run.output_dir)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key; repeatable")
    common.add_argument("--dump-trajectories", action="store_true", help="write trajectories.jsonl")
    common.add_argument("--verbose", action="store_true", help="log per-slot detail")

    parser = argparse.ArgumentParser(prog="hmappo", description="Covert multi-AUV task simulator and HMAPPO trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", parents=[common], help="train the hierarchical policy")
    train.add_argument("--episodes", type=int, help="training episodes (train.episodes)")

    evaluate = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint greedily")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--episodes", type=int, help="evaluation episodes (eval.episodes)")

    baseline = sub.add_parser("baseline", parents=[common], help="run a random baseline")
    baseline.add_argument("--kind", required=True, choices=BASELINE_KINDS)
    baseline.add_argument("--checkpoint", help="policy used for the non-random level")
    baseline.add_argument("--episodes", type=int)

    for name, default, kind, help_text in (
            ("sweep-epsilon", DEFAULT_EPSILONS, float, "covertness tolerance values"),
            ("sweep-agents", DEFAULT_AGENT_COUNTS, int, "team sizes"),
            ("sweep-tasks", DEFAULT_TASK_COUNTS, int, "tasks per episode")):
        sweep = sub.add_parser(name, parents=[common], help=f"train and evaluate over {help_text}")
        sweep.add_argument("--values", "--epsilons", dest="values", default=default,
                           type=lambda text, k=kind: _number_list(text, k), help=help_text)
        sweep.add_argument("--checkpoints", type=lambda text: [p for p in text.split(",") if p],
                           help="one checkpoint per value instead of training in place")
        sweep.add_argument("--episodes", type=int, help="evaluation episodes per value")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = overrides_from_args(args.set)
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if args.workers is not None:
        overrides["run.workers"] = args.workers
    if args.out is not None:
        overrides["run.output_dir"] = args.out
    if args.dump_trajectories:
        overrides["run.dump_trajectories"] = True
    if args.command == "train" and args.episodes is not None:
        overrides["train.episodes"] = args.episodes
    return load_config(args.config, overrides)


def run_command(args: argparse.Namespace, config: ExperimentConfig) -> int:
    logger = logging.getLogger(__name__)
    out = config["run.output_dir"]
    if args.command == "train":
        result = TrainingService(config).run(out)
        logger.info(f"Final checkpoint: {result['checkpoint']}")
    elif args.command == "eval":
        EvaluationService(config).run(args.checkpoint, args.episodes, out)
    elif args.command == "baseline":
        BaselineService(config).run(args.kind, args.checkpoint, args.episodes, out)
    else:
        kind = args.command.split("-", 1)[1]
        SweepService(config).run(kind, args.values, out, args.checkpoints, args.episodes)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logger = logging.getLogger(__name__)
    try:
        config = resolve_config(args)
    except SimulationError as e:
        logger.error(f"Configuration error: {e}")
        return 2

    if LOGGING_ENABLED:
        log_setup_error = setup_logging(config["run.output_dir"], debug=args.verbose)
        if log_setup_error:
            logger.warning(log_setup_error)
    else:
        logging.getLogger().setLevel(logging.WARNING)

    logger.info(f"hmappo {args.command} starting (config hash {config.config_hash()[:12]})")
    try:
        return run_command(args, config)
    except SimulationError as e:
        logger.error(f"{args.command} failed: {e}")
        return 2
    except Exception as e:
        logger.error(f"Unexpected error during {args.command}: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
