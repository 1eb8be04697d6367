# rl/trainer.py
"""Two-level HMAPPO training loop.

Per macro step the central actor samples a team, the team's actors act on
their local observations for one micro episode while the centralized critic
values the global state, and both buffers are checked for updates once the
task has been fused.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from app_config import ExperimentConfig
from data_model import MacroStepResult
from env import HierarchicalAuvEnv
from rl.agents import MacroAgent, MicroAgent, parameter_checksum
from rl.buffers import RolloutBuffer, Transition
from utils import derive_seed

ENV_STREAM = 0
ACTION_STREAM = 1
INIT_STREAM = 7
UPDATE_STREAM = 8

METRIC_COLUMNS = ("episode", "macro_reward", "micro_reward", "zeta", "eta", "t_task", "mean_kl",
                  "covert_rate", "mean_energy", "team_size")
LOSS_COLUMNS = ("update", "level", "episode", "actor_loss", "critic_loss", "clip_fraction")

TeamOverride = Callable[[np.random.Generator], np.ndarray]
ActionOverride = Callable[[np.random.Generator, int, Tuple[float, np.ndarray], np.ndarray], Tuple[float, np.ndarray]]


@dataclass
class StepChunk:
    micro: List[Tuple[int, Transition]]
    macro: Optional[Transition]
    result: MacroStepResult


@dataclass
class EpisodeRecord:
    episode: int
    chunks: List[StepChunk] = field(default_factory=list)
    trajectories: List[dict] = field(default_factory=list)

    @property
    def results(self) -> List[MacroStepResult]:
        return [c.result for c in self.chunks]


def episode_metrics(episode: int, results: List[MacroStepResult]) -> Dict[str, Any]:
    slot_rewards = [r for res in results for r in res.micro_rewards]
    slots = np.array([len(res.micro_rewards) for res in results], dtype=float)
    return {
        "episode": episode,
        "macro_reward": float(sum(res.reward for res in results)),
        "micro_reward": float(np.mean(slot_rewards)),
        "zeta": float(np.mean([res.zeta for res in results])),
        "eta": float(np.mean([res.efficiency for res in results])),
        "t_task": float(np.mean([res.t_task for res in results])),
        "mean_kl": float(np.average([res.mean_kl for res in results], weights=slots)),
        "covert_rate": float(np.average([res.covert_rate for res in results], weights=slots)),
        "mean_energy": float(results[-1].mean_energy),
        "team_size": float(np.mean([res.selection.sum() for res in results])),
    }


def run_episode(env: HierarchicalAuvEnv, macro: MacroAgent, micro: MicroAgent, episode: int, seed: int,
                explore: bool = True, collect: bool = True, record_trajectories: bool = False,
                team_override: Optional[TeamOverride] = None, action_override: Optional[ActionOverride] = None,
                on_step: Optional[Callable[[StepChunk], None]] = None) -> EpisodeRecord:
    """Play one episode; `explore=False` uses the greedy team and mean actions."""
    action_rng = np.random.default_rng(derive_seed(seed, episode, ACTION_STREAM))
    policy_rng = action_rng if explore else None
    record = EpisodeRecord(episode=episode)
    env.trajectory_sink = record.trajectories.append if record_trajectories else None
    state = env.reset_episode(derive_seed(seed, episode, ENV_STREAM), episode=episode)

    while not env.done:
        selection, macro_logp, macro_value, probabilities = macro.act(state, policy_rng)
        if team_override is not None:
            selection = team_override(action_rng)
        env.begin_task(selection, probabilities)

        micro_transitions: List[Tuple[int, Transition]] = []
        team = env.team
        observations = {m: env.micro_observe(m) for m in team}
        global_state = env.global_state()
        while env.micro_active:
            actions, raws, logps = {}, {}, {}
            for m in team:
                actions[m], raws[m], logps[m] = micro.act(m, observations[m], policy_rng)
                if action_override is not None:
                    actions[m] = action_override(action_rng, m, actions[m], env.auvs[m].thrust_velocity)
            values = {m: micro.value(m, global_state) for m in team} if collect else {}
            step = env.micro_step(actions)
            next_state = env.global_state()
            if collect:
                ended = step.done or step.truncated
                for m in team:
                    next_value = 0.0 if step.done else micro.value(m, next_state)
                    micro_transitions.append((m, Transition(
                        observation=observations[m], state=global_state, action=raws[m], log_prob=logps[m],
                        reward=step.reward, value=values[m], next_value=next_value, done=step.done,
                        segment_end=ended, agent=m)))
            observations = step.observations
            global_state = next_state

        result = env.finish_task()
        macro_transition = None
        if collect:
            next_value = 0.0 if result.done else macro.value(result.state)
            macro_transition = Transition(
                observation=state, state=state, action=np.asarray(selection, dtype=float), log_prob=macro_logp,
                reward=result.reward, value=macro_value, next_value=next_value, done=result.done,
                segment_end=result.done)
        chunk = StepChunk(micro=micro_transitions, macro=macro_transition, result=result)
        record.chunks.append(chunk)
        if on_step is not None:
            on_step(chunk)
        state = result.state

    env.trajectory_sink = None
    return record


def _collect_remote(config_values: Dict[str, Any], snapshot: Dict[str, Dict[str, np.ndarray]], episode: int,
                    seed: int, record_trajectories: bool) -> EpisodeRecord:
    config = ExperimentConfig(config_values)
    rng = np.random.default_rng(derive_seed(seed, INIT_STREAM))
    macro = MacroAgent(config, rng)
    micro = MicroAgent(config, rng)
    macro.load_parameter_arrays(snapshot["macro"])
    micro.load_parameter_arrays(snapshot["micro"])
    env = HierarchicalAuvEnv(config, seed=seed)
    return run_episode(env, macro, micro, episode, seed, record_trajectories=record_trajectories)


class HmappoTrainer:
    def __init__(self, config: ExperimentConfig, seed: Optional[int] = None):
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.seed = config["run.seed"] if seed is None else int(seed)
        init_rng = np.random.default_rng(derive_seed(self.seed, INIT_STREAM))
        self.macro = MacroAgent(config, init_rng)
        self.micro = MicroAgent(config, init_rng)
        self.update_rng = np.random.default_rng(derive_seed(self.seed, UPDATE_STREAM))
        micro_ppo = config.ppo_config("micro")
        macro_ppo = config.ppo_config("macro")
        self.micro_buffer = RolloutBuffer(micro_ppo.update_size, micro_ppo.gamma, micro_ppo.gae_lambda, "micro")
        self.macro_buffer = RolloutBuffer(macro_ppo.update_size, macro_ppo.gamma, macro_ppo.gae_lambda, "macro")
        self.env = HierarchicalAuvEnv(config, seed=self.seed)
        self.episodes_done = 0
        self.on_update: Optional[Callable[[Dict[str, Any]], None]] = None

    @property
    def update_counts(self) -> Tuple[int, int]:
        return self.macro.updates, self.micro.updates

    def checksum(self) -> str:
        return parameter_checksum(self.macro, self.micro)

    def absorb(self, chunk: StepChunk):
        for key, transition in chunk.micro:
            self.micro_buffer.add(key, transition)
        if chunk.macro is not None:
            self.macro_buffer.add("cauv", chunk.macro)
        while self.micro_buffer.ready():
            stats = self.micro.update(self.micro_buffer.drain(), self.update_rng)
            self._report_update("micro", self.micro.updates, stats)
        while self.macro_buffer.ready():
            stats = self.macro.update(self.macro_buffer.drain(), self.update_rng)
            self._report_update("macro", self.macro.updates, stats)

    def _report_update(self, level: str, update: int, stats: Dict[str, float]):
        self.logger.info("%s update %d: actor %.4f critic %.4f clip %.3f", level.capitalize(), update,
                         stats["actor"], stats["critic"], stats["clip_fraction"])
        if self.on_update is not None:
            self.on_update({"update": update, "level": level, "episode": self.episodes_done,
                            "actor_loss": stats["actor"], "critic_loss": stats["critic"],
                            "clip_fraction": stats["clip_fraction"]})

    def _snapshot(self) -> Dict[str, Dict[str, np.ndarray]]:
        return {"macro": {k: np.array(v) for k, v in self.macro.parameter_arrays().items()},
                "micro": {k: np.array(v) for k, v in self.micro.parameter_arrays().items()}}

    def train(self, episodes: Optional[int] = None,
              on_episode: Optional[Callable[[Dict[str, Any], EpisodeRecord], None]] = None) -> List[Dict[str, Any]]:
        episodes = self.config["train.episodes"] if episodes is None else episodes
        workers = self.config["run.workers"]
        dump = self.config["run.dump_trajectories"]
        rows: List[Dict[str, Any]] = []
        self.logger.info(f"Training for {episodes} episodes with {workers} worker(s), seed {self.seed}")

        def finish(record: EpisodeRecord):
            row = episode_metrics(record.episode, record.results)
            rows.append(row)
            self.episodes_done = record.episode + 1
            self.logger.info("Episode %d: macro %.3f micro %.4f zeta %.3f eta %.5f kl %.5f",
                             record.episode, row["macro_reward"], row["micro_reward"], row["zeta"], row["eta"],
                             row["mean_kl"])
            if on_episode is not None:
                on_episode(row, record)

        start = self.episodes_done
        if workers <= 1:
            for episode in range(start, start + episodes):
                record = run_episode(self.env, self.macro, self.micro, episode, self.seed,
                                     record_trajectories=dump, on_step=self.absorb)
                finish(record)
            return rows

        values = self.config.as_dict()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for round_start in range(start, start + episodes, workers):
                snapshot = self._snapshot()
                batch = range(round_start, min(round_start + workers, start + episodes))
                futures = [pool.submit(_collect_remote, values, snapshot, ep, self.seed, dump) for ep in batch]
                for future in futures:
                    record = future.result()
                    for chunk in record.chunks:
                        self.absorb(chunk)
                    finish(record)
        return rows


def train_hmappo(config: ExperimentConfig, seed: Optional[int] = None,
                 on_episode: Optional[Callable[[Dict[str, Any], EpisodeRecord], None]] = None
                 ) -> Tuple[HmappoTrainer, List[Dict[str, Any]]]:
    trainer = HmappoTrainer(config, seed)
    rows = trainer.train(on_episode=on_episode)
    return trainer, rows
