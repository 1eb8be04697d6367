# services.py

import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from app_config import ExperimentConfig
from data_model import ExperimentError
from env import HierarchicalAuvEnv
from rl.agents import MacroAgent, MicroAgent
from rl.checkpoint import load_checkpoint, save_checkpoint
from rl.trainer import (INIT_STREAM, LOSS_COLUMNS, METRIC_COLUMNS, EpisodeRecord, HmappoTrainer, episode_metrics,
                        run_episode)
from utils import derive_seed, sample_in_ball

METRICS_FILENAME = "metrics.csv"
LOSSES_FILENAME = "losses.csv"
TRAJECTORY_FILENAME = "trajectories.jsonl"
SUMMARY_FILENAME = "summary.csv"
SUMMARY_METRICS = ("macro_reward", "micro_reward", "zeta", "eta", "t_task", "mean_kl", "covert_rate",
                   "mean_energy", "team_size")
BASELINE_KINDS = ("random_G", "random_V")
RANDOM_VELOCITY_ATTEMPTS = 64
EVAL_SEED_OFFSET = 1_000_003


class MetricsWriter:
    """Appends one CSV row per episode and flushes after each, so rows are always complete lines.

    `preamble` lines are written first as `# key=value` comments.
    """

    def __init__(self, path: str, columns: Sequence[str] = METRIC_COLUMNS, preamble: Optional[Dict[str, Any]] = None):
        self.logger = logging.getLogger(__name__)
        self.path = path
        self.columns = list(columns)
        try:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            self._file = open(path, "w", encoding="utf-8", newline="")
            for key, value in (preamble or {}).items():
                self._file.write(f"# {key}={value}\n")
            self._file.write(",".join(self.columns) + "\n")
            self._file.flush()
        except OSError as e:
            self.logger.error(f"Cannot create metrics file {path}: {e}", exc_info=True)
            raise ExperimentError(f"cannot create metrics file {path}: {e}") from e

    def append(self, row: Dict[str, Any]):
        try:
            pd.DataFrame([row], columns=self.columns).to_csv(self._file, header=False, index=False)
            self._file.flush()
        except OSError as e:
            self.logger.error(f"Cannot append to {self.path}: {e}", exc_info=True)
            raise ExperimentError(f"cannot append to metrics file {self.path}: {e}") from e

    def close(self):
        if not self._file.closed:
            self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class TrajectoryWriter:
    def __init__(self, path: str):
        self.logger = logging.getLogger(__name__)
        self.path = path
        self.records = 0
        try:
            self._file = open(path, "w", encoding="utf-8")
        except OSError as e:
            raise ExperimentError(f"cannot create trajectory file {path}: {e}") from e

    def write_all(self, records: List[dict]):
        for record in records:
            self._file.write(json.dumps(record) + "\n")
        self.records += len(records)
        self._file.flush()

    def close(self):
        if not self._file.closed:
            self._file.close()
            self.logger.info(f"{self.records} trajectory records written to {self.path}")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def summarize(rows: List[Dict[str, Any]]) -> Dict[str, float]:
    """Mean and population std of every episode metric."""
    frame = pd.DataFrame(rows, columns=list(METRIC_COLUMNS))
    summary: Dict[str, float] = {"episodes": float(len(frame))}
    for name in SUMMARY_METRICS:
        summary[f"{name}_mean"] = float(frame[name].mean())
        summary[f"{name}_std"] = float(frame[name].std(ddof=0))
    return summary


def write_table(rows: List[Dict[str, Any]], path: str) -> str:
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        pd.DataFrame(rows).to_csv(path, index=False, encoding="utf-8")
    except OSError as e:
        logging.getLogger(__name__).error(f"Cannot write {path}: {e}", exc_info=True)
        raise ExperimentError(f"cannot write {path}: {e}") from e
    return path


def _build_agents(config: ExperimentConfig, seed: int):
    rng = np.random.default_rng(derive_seed(seed, INIT_STREAM))
    return MacroAgent(config, rng), MicroAgent(config, rng)


class TrainingService:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.logger = logging.getLogger(__name__)

    def run(self, output_dir: Optional[str] = None) -> Dict[str, Any]:
        cfg = self.config
        out = output_dir or cfg["run.output_dir"]
        cfg.write_resolved(out)
        trainer = HmappoTrainer(cfg)
        every = cfg["run.checkpoint_every"]
        checkpoint_dir = os.path.join(out, "checkpoints")
        trajectories = TrajectoryWriter(os.path.join(out, TRAJECTORY_FILENAME)) if cfg["run.dump_trajectories"] else None

        header = {"workers": cfg["run.workers"]}
        with MetricsWriter(os.path.join(out, METRICS_FILENAME), preamble=header) as metrics, \
                MetricsWriter(os.path.join(out, LOSSES_FILENAME), LOSS_COLUMNS) as losses:
            trainer.on_update = losses.append

            def on_episode(row: Dict[str, Any], record: EpisodeRecord):
                metrics.append(row)
                if trajectories is not None:
                    trajectories.write_all(record.trajectories)
                if (record.episode + 1) % every == 0:
                    save_checkpoint(os.path.join(checkpoint_dir, f"episode_{record.episode + 1:05d}.npz"),
                                    trainer.macro, trainer.micro, cfg, record.episode + 1)
            try:
                rows = trainer.train(on_episode=on_episode)
            finally:
                if trajectories is not None:
                    trajectories.close()

        final = save_checkpoint(os.path.join(out, "final.npz"), trainer.macro, trainer.micro, cfg,
                                trainer.episodes_done)
        macro_updates, micro_updates = trainer.update_counts
        self.logger.info(f"Training finished: {len(rows)} episodes, {macro_updates} central and "
                         f"{micro_updates} AUV updates, checksum {trainer.checksum()[:16]}")
        return {"rows": rows, "checkpoint": final, "summary": summarize(rows), "checksum": trainer.checksum()}


class EvaluationService:
    """Greedy rollouts of a trained (or freshly initialised) policy pair."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.logger = logging.getLogger(__name__)

    def load_agents(self, checkpoint: Optional[str]):
        macro, micro = _build_agents(self.config, self.config["run.seed"])
        if checkpoint:
            load_checkpoint(checkpoint, macro, micro, self.config)
        else:
            self.logger.warning("No checkpoint given; evaluating freshly initialised networks.")
        return macro, micro

    def rollout(self, macro: MacroAgent, micro: MicroAgent, episodes: int, output_dir: Optional[str],
                label: str = "eval", **overrides) -> Dict[str, Any]:
        cfg = self.config
        seed = cfg["run.seed"] + EVAL_SEED_OFFSET
        env = HierarchicalAuvEnv(cfg, seed=seed)
        dump = cfg["run.dump_trajectories"] and output_dir is not None
        rows: List[Dict[str, Any]] = []
        trajectories = TrajectoryWriter(os.path.join(output_dir, TRAJECTORY_FILENAME)) if dump else None
        try:
            for episode in range(episodes):
                record = run_episode(env, macro, micro, episode, seed, explore=False, collect=False,
                                     record_trajectories=dump, **overrides)
                rows.append(episode_metrics(episode, record.results))
                if trajectories is not None:
                    trajectories.write_all(record.trajectories)
        finally:
            if trajectories is not None:
                trajectories.close()

        summary = summarize(rows)
        if output_dir is not None:
            write_table(rows, os.path.join(output_dir, f"{label}_metrics.csv"))
            write_table([summary], os.path.join(output_dir, f"{label}_{SUMMARY_FILENAME}"))
        self.logger.info(f"{label}: eta {summary['eta_mean']:.5f} +/- {summary['eta_std']:.5f}, "
                         f"zeta {summary['zeta_mean']:.3f}, KL {summary['mean_kl_mean']:.5f} over {episodes} episodes")
        return summary

    def run(self, checkpoint: Optional[str], episodes: Optional[int] = None,
            output_dir: Optional[str] = None) -> Dict[str, Any]:
        episodes = episodes or self.config["eval.episodes"]
        if output_dir:
            self.config.write_resolved(output_dir)
        macro, micro = self.load_agents(checkpoint)
        return self.rollout(macro, micro, episodes, output_dir)


class BaselineService:
    """random_G: team uniform over non-empty subsets.

    random_V: velocity uniform over the feasible set, the Δv ball around the
    previous velocity intersected with the speed ball.
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.logger = logging.getLogger(__name__)
        self.evaluator = EvaluationService(config)

    def team_sampler(self):
        m = self.config.num_auvs

        def sample(rng: np.random.Generator) -> np.ndarray:
            code = int(rng.integers(1, 2 ** m))
            return np.array([(code >> i) & 1 for i in range(m)], dtype=int)
        return sample

    def velocity_sampler(self):
        limits = self.config.motion_limits()
        random_power = self.config["baseline.random_power"]

        def sample(rng: np.random.Generator, m: int, policy_action, previous: np.ndarray):
            power = float(rng.uniform(limits.power_min, limits.power_max)) if random_power else policy_action[0]
            previous = np.asarray(previous, dtype=float)
            for _ in range(RANDOM_VELOCITY_ATTEMPTS):
                velocity = previous + sample_in_ball(rng, limits.max_delta_v)
                if np.linalg.norm(velocity) <= limits.max_speed:
                    return power, velocity
            return power, previous.copy()
        return sample

    def run(self, kind: str, checkpoint: Optional[str] = None, episodes: Optional[int] = None,
            output_dir: Optional[str] = None) -> Dict[str, Any]:
        if kind not in BASELINE_KINDS:
            raise ExperimentError(f"unknown baseline '{kind}', expected one of {', '.join(BASELINE_KINDS)}")
        episodes = episodes or self.config["eval.episodes"]
        if output_dir:
            self.config.write_resolved(output_dir)
        macro, micro = self.evaluator.load_agents(checkpoint)
        if kind == "random_G":
            overrides = {"team_override": self.team_sampler()}
        else:
            overrides = {"action_override": self.velocity_sampler()}
        return self.evaluator.rollout(macro, micro, episodes, output_dir, label=kind, **overrides)


class SweepService:
    """Train-and-evaluate sweeps over one configuration key."""

    SWEEP_KEYS = {"epsilon": "covert.epsilon", "agents": "env.num_auvs", "tasks": "env.macro_steps"}

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.logger = logging.getLogger(__name__)

    def run(self, kind: str, values: Sequence[Any], output_dir: Optional[str] = None,
            checkpoints: Optional[Sequence[str]] = None, episodes: Optional[int] = None) -> List[Dict[str, Any]]:
        if kind not in self.SWEEP_KEYS:
            raise ExperimentError(f"unknown sweep '{kind}'")
        if checkpoints and len(checkpoints) != len(values):
            raise ExperimentError(f"{len(checkpoints)} checkpoints given for {len(values)} sweep values")
        key = self.SWEEP_KEYS[kind]
        out = output_dir or self.config["run.output_dir"]
        rows = []
        for i, value in enumerate(values):
            sub_dir = os.path.join(out, f"{kind}_{value}")
            config = self.config.with_overrides({key: value, "run.output_dir": sub_dir})
            self.logger.info(f"Sweep {kind}: {key} = {value}")
            checkpoint = checkpoints[i] if checkpoints else TrainingService(config).run(sub_dir)["checkpoint"]
            summary = EvaluationService(config).run(checkpoint, episodes, sub_dir)
            rows.append({kind: value, **summary})
        write_table(rows, os.path.join(out, f"sweep_{kind}.csv"))
        return rows
