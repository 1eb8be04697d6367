# rl/ppo.py
"""GAE, the clipped PPO objectives with their analytic gradients, gradient
clipping and Adam."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from data_model import DomainError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PpoConfig:
    clip: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 8
    minibatch: int = 512
    update_size: int = 2048
    actor_lr: float = 3e-5
    critic_lr: float = 5e-5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.clip < 1.0:
            raise DomainError(f"clip must lie in (0, 1), got {self.clip}")
        if not 0.0 < self.gamma <= 1.0 or not 0.0 <= self.gae_lambda <= 1.0:
            raise DomainError(f"gamma must lie in (0, 1] and lambda in [0, 1], got {self.gamma}, {self.gae_lambda}")
        if self.epochs < 1 or self.minibatch < 1 or self.update_size < 1:
            raise DomainError("epochs, minibatch and update_size must be >= 1")


def gae(rewards: Sequence[float], values: Sequence[float], bootstrap: float, dones: Sequence[bool],
        gamma: float, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """Advantages and returns for one contiguous run of transitions.

    `values[t]` is V(s_t); V(s_{t+1}) is `values[t+1]`, or `bootstrap` for the
    last step. A done flag zeroes the successor value and cuts the sum.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if not (len(rewards) == len(values) == len(dones)):
        raise ShapeError(f"gae inputs must align, got {len(rewards)}, {len(values)}, {len(dones)}")
    next_values = np.append(values[1:], bootstrap)
    return gae_from_next_values(rewards, values, next_values, dones, dones, gamma, lam)


def gae_from_next_values(rewards: np.ndarray, values: np.ndarray, next_values: np.ndarray, dones: np.ndarray,
                         segment_ends: np.ndarray, gamma: float, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """GAE when each transition carries its own successor value.

    `dones` zero the successor value (termination); `segment_ends` stop the
    backward sum. A time-limit truncation ends the segment but keeps its
    bootstrapped successor value.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    next_values = np.asarray(next_values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    segment_ends = np.asarray(segment_ends, dtype=bool)
    if not (len(rewards) == len(values) == len(next_values) == len(dones) == len(segment_ends)):
        raise ShapeError("gae inputs must align")
    deltas = rewards + gamma * next_values * (1.0 - dones.astype(float)) - values
    carry = 1.0 - (dones | segment_ends).astype(float)
    advantages = np.zeros_like(deltas)
    running = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        running = deltas[t] + gamma * lam * carry[t] * running
        advantages[t] = running
    return advantages, advantages + values


def normalize_advantages(advantages: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    advantages = np.asarray(advantages, dtype=float)
    if advantages.size < 2:
        return advantages - advantages.mean()
    return (advantages - advantages.mean()) / (advantages.std() + eps)


def clipped_surrogate(ratio: np.ndarray, advantages: np.ndarray, clip: float) -> np.ndarray:
    ratio = np.asarray(ratio, dtype=float)
    advantages = np.asarray(advantages, dtype=float)
    return np.minimum(ratio * advantages, np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages)


def ppo_losses(advantages: np.ndarray, returns: np.ndarray, old_log_probs: np.ndarray, new_log_probs: np.ndarray,
               new_values: np.ndarray, entropy: np.ndarray, config: PpoConfig) -> Dict[str, float]:
    ratio = np.exp(np.asarray(new_log_probs, dtype=float) - np.asarray(old_log_probs, dtype=float))
    surrogate = clipped_surrogate(ratio, advantages, config.clip)
    actor = -float(np.mean(surrogate)) - config.entropy_coef * float(np.mean(entropy))
    critic = float(np.mean((np.asarray(returns, dtype=float) - np.asarray(new_values, dtype=float)) ** 2))
    clip_fraction = float(np.mean(np.abs(ratio - 1.0) > config.clip))
    return {"actor": actor, "critic": critic, "clip_fraction": clip_fraction}


def surrogate_log_prob_grad(advantages: np.ndarray, old_log_probs: np.ndarray, new_log_probs: np.ndarray,
                            clip: float) -> np.ndarray:
    """d(actor loss without entropy) / d(new log-prob), per sample.

    The min picks the unclipped branch exactly when ratio*A <= clipped*A; only
    that branch carries gradient.
    """
    advantages = np.asarray(advantages, dtype=float)
    ratio = np.exp(np.asarray(new_log_probs, dtype=float) - np.asarray(old_log_probs, dtype=float))
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages
    active = (unclipped <= clipped).astype(float)
    return -(ratio * advantages * active) / len(advantages)


def critic_value_grad(returns: np.ndarray, values: np.ndarray) -> np.ndarray:
    returns = np.asarray(returns, dtype=float)
    values = np.asarray(values, dtype=float)
    return -2.0 * (returns - values) / len(values)


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_grad_norm(grads: List[np.ndarray], max_norm: float) -> Tuple[List[np.ndarray], float]:
    norm = global_norm(grads)
    if max_norm is None or max_norm <= 0 or norm <= max_norm:
        return grads, norm
    scale = max_norm / (norm + 1e-12)
    return [g * scale for g in grads], norm


def adam_step(params: np.ndarray, grads: np.ndarray, m: np.ndarray, v: np.ndarray, lr: float, t: int,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or m.shape != params.shape or v.shape != params.shape:
        raise ShapeError(f"adam shapes differ: params {params.shape}, grads {grads.shape}, moments {m.shape}/{v.shape}")
    if t < 1:
        raise DomainError(f"adam step counter starts at 1, got {t}")
    m = beta1 * m + (1.0 - beta1) * grads
    v = beta2 * v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


class AdamOptimizer:
    """Adam over a list of parameter arrays, updated in place."""

    def __init__(self, params: List[np.ndarray], lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, max_grad_norm: float = 0.5):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: List[np.ndarray]) -> float:
        if len(grads) != len(self.params):
            raise ShapeError(f"expected {len(self.params)} gradient arrays, got {len(grads)}")
        grads, norm = clip_grad_norm(grads, self.max_grad_norm)
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            updated, self.m[i], self.v[i] = adam_step(p, g, self.m[i], self.v[i], self.lr, self.t,
                                                      self.beta1, self.beta2, self.eps)
            p[...] = updated
        return norm

    def state_arrays(self) -> Dict[str, np.ndarray]:
        state = {"t": np.array(self.t)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            state[f"m{i}"] = m
            state[f"v{i}"] = v
        return state

    def load_state_arrays(self, state: Dict[str, np.ndarray]):
        self.t = int(state["t"])
        for i in range(len(self.params)):
            if state[f"m{i}"].shape != self.params[i].shape:
                raise ShapeError(f"optimizer moment {i} has shape {state[f'm{i}'].shape}, expected {self.params[i].shape}")
            self.m[i] = np.array(state[f"m{i}"], dtype=float)
            self.v[i] = np.array(state[f"v{i}"], dtype=float)
