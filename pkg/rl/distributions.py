# rl/distributions.py
"""Policy heads.

The micro head is a diagonal Gaussian over an unbounded vector u = (u_p, u_v)
squashed into the action set: power by a shifted tanh, velocity radially into
the speed ball. PPO ratios use the Gaussian log-density of u; the squash
correction depends on u alone and cancels in the ratio.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from data_model import MotionLimits

LOG_2PI = math.log(2.0 * math.pi)
_SMALL = 1e-8


def softplus(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(-softplus(-x))


def log_one_minus_tanh_sq(x: np.ndarray) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=float))
    return 2.0 * (math.log(2.0) - x - softplus(-2.0 * x))


@dataclass
class GaussianSample:
    power: np.ndarray
    velocity: np.ndarray
    raw: np.ndarray
    log_prob: np.ndarray
    pre_squash_log_prob: np.ndarray
    entropy: np.ndarray


@dataclass
class BernoulliSample:
    selection: np.ndarray
    probabilities: np.ndarray
    log_prob: np.ndarray
    entropy: np.ndarray


def gaussian_log_prob(u: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (np.asarray(u, dtype=float) - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * LOG_2PI, axis=-1)


def gaussian_entropy(mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    per_dim = np.asarray(log_std, dtype=float) + 0.5 * (LOG_2PI + 1.0)
    return np.broadcast_to(per_dim, np.shape(mean)).sum(axis=-1)


def squash(u: np.ndarray, limits: MotionLimits) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map raw u (..., 4) to (power, velocity, log|det J|)."""
    u = np.asarray(u, dtype=float)
    span = limits.power_max - limits.power_min
    power = limits.power_min + span * (np.tanh(u[..., 0]) + 1.0) / 2.0
    log_det = np.zeros(u.shape[:-1])
    if span > 0:
        log_det = log_det + math.log(span / 2.0) + log_one_minus_tanh_sq(u[..., 0])

    v_max = limits.max_speed
    uv = u[..., 1:4]
    rho = np.linalg.norm(uv, axis=-1)
    safe = np.maximum(rho, _SMALL)
    tanh_rho = np.tanh(rho)
    ratio = np.where(rho > _SMALL, tanh_rho / safe, 1.0)
    velocity = v_max * ratio[..., None] * uv
    log_det = log_det + math.log(v_max) + log_one_minus_tanh_sq(rho) + 2.0 * np.log(v_max * ratio)
    return power, velocity, log_det


def gaussian_head(mean: np.ndarray, log_std: np.ndarray, limits: MotionLimits,
                  rng: Optional[np.random.Generator] = None) -> GaussianSample:
    """Sample (or, without `rng`, take the mean of) the squashed Gaussian."""
    mean = np.asarray(mean, dtype=float)
    log_std = np.asarray(log_std, dtype=float)
    if rng is None:
        u = mean.copy()
    else:
        u = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
    power, velocity, log_det = squash(u, limits)
    pre = gaussian_log_prob(u, mean, log_std)
    return GaussianSample(power=power, velocity=velocity, raw=u, log_prob=pre - log_det,
                          pre_squash_log_prob=pre, entropy=gaussian_entropy(mean, log_std))


def gaussian_grads(u: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """d log p(u) / d mean, and d log p(u) / d log_std, per sample."""
    inv_var = np.exp(-2.0 * np.asarray(log_std, dtype=float))
    diff = np.asarray(u, dtype=float) - mean
    return diff * inv_var, diff * diff * inv_var - 1.0


def bernoulli_log_prob(logits: np.ndarray, selection: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=float)
    return np.sum(np.asarray(selection, dtype=float) * logits - softplus(logits), axis=-1)


def bernoulli_entropy(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=float)
    return np.sum(softplus(logits) - logits * sigmoid(logits), axis=-1)


def bernoulli_head(logits: np.ndarray, rng: Optional[np.random.Generator] = None) -> BernoulliSample:
    """Independent Bernoulli selection; without `rng` the selection is p > 0.5."""
    logits = np.asarray(logits, dtype=float)
    probabilities = sigmoid(logits)
    if rng is None:
        selection = (logits > 0.0).astype(int)
    else:
        selection = (rng.uniform(size=logits.shape) < probabilities).astype(int)
    return BernoulliSample(selection=selection, probabilities=probabilities,
                           log_prob=bernoulli_log_prob(logits, selection), entropy=bernoulli_entropy(logits))
