# rl/buffers.py

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Hashable, List

import numpy as np

from rl.ppo import gae_from_next_values


@dataclass
class Transition:
    observation: np.ndarray
    state: np.ndarray
    action: np.ndarray
    log_prob: float
    reward: float
    value: float
    next_value: float
    done: bool
    segment_end: bool
    agent: int = 0


@dataclass
class Batch:
    observations: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    values: np.ndarray
    agents: np.ndarray

    def __len__(self) -> int:
        return len(self.log_probs)

    def subset(self, index: np.ndarray) -> "Batch":
        return Batch(self.observations[index], self.states[index], self.actions[index], self.log_probs[index],
                     self.advantages[index], self.returns[index], self.values[index], self.agents[index])


class RolloutBuffer:
    """Transitions grouped into per-key segments.

    A segment becomes usable once its last transition (segment_end) arrives;
    its advantages are computed then, with the values recorded at collection
    time. Completed transitions queue up in completion order and are drained
    `update_size` at a time; an open segment always stays behind.
    """

    def __init__(self, update_size: int, gamma: float, gae_lambda: float, name: str = "buffer"):
        self.logger = logging.getLogger(__name__)
        self.update_size = update_size
        self.gamma = gamma
        self.gae_lambda = gae_lambda
        self.name = name
        self._open: Dict[Hashable, List[Transition]] = defaultdict(list)
        self._ready: List[tuple] = []
        self.total_added = 0
        self.updates_drained = 0

    def add(self, key: Hashable, transition: Transition):
        self._open[key].append(transition)
        self.total_added += 1
        if transition.segment_end:
            self._close(key)

    def _close(self, key: Hashable):
        segment = self._open.pop(key)
        advantages, returns = gae_from_next_values(
            np.array([t.reward for t in segment]),
            np.array([t.value for t in segment]),
            np.array([t.next_value for t in segment]),
            np.array([t.done for t in segment]),
            np.array([t.segment_end for t in segment]),
            self.gamma, self.gae_lambda,
        )
        for t, a, r in zip(segment, advantages, returns):
            self._ready.append((t, float(a), float(r)))

    @property
    def completed(self) -> int:
        return len(self._ready)

    @property
    def pending(self) -> int:
        return sum(len(s) for s in self._open.values())

    def ready(self) -> bool:
        return len(self._ready) >= self.update_size

    def drain(self) -> Batch:
        items, self._ready = self._ready[:self.update_size], self._ready[self.update_size:]
        self.updates_drained += 1
        self.logger.debug("%s drained %d transitions (%d left ready, %d pending)",
                          self.name, len(items), len(self._ready), self.pending)
        transitions = [i[0] for i in items]
        return Batch(
            observations=np.array([t.observation for t in transitions], dtype=float),
            states=np.array([t.state for t in transitions], dtype=float),
            actions=np.array([t.action for t in transitions], dtype=float),
            log_probs=np.array([t.log_prob for t in transitions], dtype=float),
            advantages=np.array([i[1] for i in items], dtype=float),
            returns=np.array([i[2] for i in items], dtype=float),
            values=np.array([t.value for t in transitions], dtype=float),
            agents=np.array([t.agent for t in transitions], dtype=int),
        )

    def clear(self):
        self._open.clear()
        self._ready = []
