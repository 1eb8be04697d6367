# rl/agents.py
"""Central-AUV (macro) and AUV-team (micro) actor-critic agents."""

import hashlib
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from app_config import ExperimentConfig
from data_model import (GLOBAL_FEATURES_PER_AUV, GLOBAL_SHARED_FEATURES, MACRO_FEATURES_PER_AUV,
                        MICRO_OBSERVATION_FIELDS, MotionLimits, ShapeError)
from rl.buffers import Batch
from rl.distributions import (bernoulli_entropy, bernoulli_head, bernoulli_log_prob, gaussian_entropy,
                              gaussian_grads, gaussian_head, gaussian_log_prob, sigmoid)
from rl.networks import DenseNet, FeatureScaler
from rl.ppo import (AdamOptimizer, PpoConfig, clipped_surrogate, critic_value_grad, normalize_advantages,
                    surrogate_log_prob_grad)

MICRO_ACTION_DIM = 4


def _hidden(width: int, layers: int) -> List[int]:
    return [width] * layers


def micro_scales(config: ExperimentConfig) -> List[float]:
    length, width, depth = config["arena.length"], config["arena.width"], config["arena.depth"]
    diagonal = math.sqrt(length ** 2 + width ** 2 + depth ** 2)
    v_max = config["env.max_speed"]
    energy = config["env.energy_init_max"]
    return [diagonal, diagonal, diagonal, length, width, depth, v_max, v_max, v_max, 1.0, energy]


def macro_scales(config: ExperimentConfig) -> List[float]:
    per_auv = [config["arena.length"], config["arena.width"], config["arena.depth"], config["env.energy_init_max"]]
    return per_auv * config.num_auvs


def global_scales(config: ExperimentConfig) -> List[float]:
    length, width, depth = config["arena.length"], config["arena.width"], config["arena.depth"]
    diagonal = math.sqrt(length ** 2 + width ** 2 + depth ** 2)
    v_max = config["env.max_speed"]
    per_auv = [length, width, depth, v_max, v_max, v_max, config["env.energy_init_max"], 1.0, diagonal, diagonal]
    shared = [length, width, config["task.length"], config["task.width"], diagonal, max(config.covert_limit, 1e-6)]
    return per_auv * config.num_auvs + shared


def _minibatches(size: int, batch: int, rng: np.random.Generator):
    order = rng.permutation(size)
    for start in range(0, size, batch):
        yield order[start:start + batch]


def gaussian_actor_loss_and_grads(actor: DenseNet, log_std: np.ndarray, x: np.ndarray, u: np.ndarray,
                                  old_log_probs: np.ndarray, advantages: np.ndarray, cfg: PpoConfig,
                                  weight: float = 1.0) -> Tuple[float, List[np.ndarray], float]:
    """Clipped-surrogate loss of a Gaussian actor and its gradients.

    Gradients follow `actor.params` with the log-std gradient appended. `weight`
    scales the loss, for groups that are a share of a larger minibatch.
    """
    mean, cache = actor.forward_with_cache(x)
    new_log_probs = gaussian_log_prob(u, mean, log_std)
    ratio = np.exp(new_log_probs - old_log_probs)
    entropy = gaussian_entropy(mean, log_std)
    loss = weight * (-float(np.mean(clipped_surrogate(ratio, advantages, cfg.clip)))
                     - cfg.entropy_coef * float(np.mean(entropy)))
    g = weight * surrogate_log_prob_grad(advantages, old_log_probs, new_log_probs, cfg.clip)
    d_mean, d_log_std = gaussian_grads(u, mean, log_std)
    grads = actor.backward(cache, g[:, None] * d_mean)
    grads.append(np.sum(g[:, None] * d_log_std, axis=0) - weight * cfg.entropy_coef)
    return loss, grads, float(np.mean(np.abs(ratio - 1.0) > cfg.clip))


def bernoulli_actor_loss_and_grads(actor: DenseNet, x: np.ndarray, selections: np.ndarray,
                                   old_log_probs: np.ndarray, advantages: np.ndarray,
                                   cfg: PpoConfig) -> Tuple[float, List[np.ndarray], float]:
    logits, cache = actor.forward_with_cache(x)
    new_log_probs = bernoulli_log_prob(logits, selections)
    ratio = np.exp(new_log_probs - old_log_probs)
    entropy = bernoulli_entropy(logits)
    loss = -float(np.mean(clipped_surrogate(ratio, advantages, cfg.clip))) - cfg.entropy_coef * float(np.mean(entropy))
    n = len(advantages)
    g = surrogate_log_prob_grad(advantages, old_log_probs, new_log_probs, cfg.clip)
    p = sigmoid(logits)
    # d entropy / d logit = -logit * p * (1 - p)
    d_logits = g[:, None] * (selections - p) + (cfg.entropy_coef / n) * logits * p * (1.0 - p)
    return loss, actor.backward(cache, d_logits), float(np.mean(np.abs(ratio - 1.0) > cfg.clip))


def critic_loss_and_grads(critic: DenseNet, x: np.ndarray, returns: np.ndarray,
                          weight: float = 1.0) -> Tuple[float, List[np.ndarray]]:
    values, cache = critic.forward_with_cache(x)
    values = values[:, 0]
    loss = weight * float(np.mean((returns - values) ** 2))
    d_values = weight * critic_value_grad(returns, values)
    return loss, critic.backward(cache, d_values[:, None])


class MacroAgent:
    """Bernoulli team-selection actor and value critic over the macro state."""

    def __init__(self, config: ExperimentConfig, rng: np.random.Generator):
        self.logger = logging.getLogger(__name__)
        m = config.num_auvs
        n_in = len(MACRO_FEATURES_PER_AUV) * m
        hidden = _hidden(config["net.macro_hidden"], config["net.hidden_layers"])
        self.actor = DenseNet([n_in, *hidden, m], rng, output_gain=0.01)
        self.critic = DenseNet([n_in, *hidden, 1], rng, output_gain=1.0)
        self.scaler = FeatureScaler(macro_scales(config))
        self.ppo = config.ppo_config("macro")
        self.actor_opt = AdamOptimizer(self.actor.params, self.ppo.actor_lr, max_grad_norm=self.ppo.max_grad_norm)
        self.critic_opt = AdamOptimizer(self.critic.params, self.ppo.critic_lr, max_grad_norm=self.ppo.max_grad_norm)
        self.updates = 0

    def act(self, state: np.ndarray, rng: Optional[np.random.Generator] = None):
        """Returns (selection, log_prob, value, probabilities); no rng means greedy."""
        x = self.scaler(state)
        sample = bernoulli_head(self.actor.forward(x), rng)
        value = float(self.critic.forward(x)[0])
        return sample.selection, float(sample.log_prob), value, sample.probabilities

    def value(self, state: np.ndarray) -> float:
        return float(self.critic.forward(self.scaler(state))[0])

    def update(self, batch: Batch, rng: np.random.Generator) -> Dict[str, float]:
        cfg = self.ppo
        states = self.scaler(batch.states)
        stats = {"actor": 0.0, "critic": 0.0, "clip_fraction": 0.0}
        count = 0
        for _ in range(cfg.epochs):
            for index in _minibatches(len(batch), cfg.minibatch, rng):
                mb = batch.subset(index)
                x = states[index]
                adv = normalize_advantages(mb.advantages)
                actor_loss, actor_grads, clipped = bernoulli_actor_loss_and_grads(
                    self.actor, x, mb.actions, mb.log_probs, adv, cfg)
                self.actor_opt.step(actor_grads)
                critic_loss, critic_grads = critic_loss_and_grads(self.critic, x, mb.returns)
                self.critic_opt.step(critic_grads)
                stats["actor"] += actor_loss
                stats["critic"] += critic_loss
                stats["clip_fraction"] += clipped
                count += 1
        self.updates += 1
        return {k: v / max(count, 1) for k, v in stats.items()}

    def parameter_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {}
        for name, net, opt in (("actor", self.actor, self.actor_opt), ("critic", self.critic, self.critic_opt)):
            for i, p in enumerate(net.params):
                arrays[f"{name}.p{i}"] = p
            for key, value in opt.state_arrays().items():
                arrays[f"{name}.opt.{key}"] = value
        return arrays

    def load_parameter_arrays(self, arrays: Dict[str, np.ndarray]):
        for name, net, opt in (("actor", self.actor, self.actor_opt), ("critic", self.critic, self.critic_opt)):
            _load_net(net, arrays, name)
            opt.load_state_arrays({k[len(name) + 5:]: v for k, v in arrays.items() if k.startswith(f"{name}.opt.")})


class MicroAgent:
    """AUV actors over local observations plus the centralized critic(s).

    With `net.share_actor` every AUV uses actor 0; otherwise AUV m uses actor m.
    `net.per_agent_critic` does the same for critics. Actors only ever see the
    11 local features.
    """

    def __init__(self, config: ExperimentConfig, rng: np.random.Generator):
        self.logger = logging.getLogger(__name__)
        m = config.num_auvs
        layers = config["net.hidden_layers"]
        self.share_actor = config["net.share_actor"]
        self.per_agent_critic = config["net.per_agent_critic"]
        self.limits: MotionLimits = config.motion_limits()
        self.ppo: PpoConfig = config.ppo_config("micro")
        obs_dim = len(MICRO_OBSERVATION_FIELDS)
        state_dim = len(GLOBAL_FEATURES_PER_AUV) * m + len(GLOBAL_SHARED_FEATURES)

        n_actors = 1 if self.share_actor else m
        n_critics = m if self.per_agent_critic else 1
        actor_hidden = _hidden(config["net.actor_hidden"], layers)
        critic_hidden = _hidden(config["net.critic_hidden"], layers)
        self.actors = [DenseNet([obs_dim, *actor_hidden, MICRO_ACTION_DIM], rng, output_gain=0.01)
                       for _ in range(n_actors)]
        self.log_stds = [np.full(MICRO_ACTION_DIM, config["ppo.init_log_std"]) for _ in range(n_actors)]
        self.critics = [DenseNet([state_dim, *critic_hidden, 1], rng, output_gain=1.0) for _ in range(n_critics)]
        self.obs_scaler = FeatureScaler(micro_scales(config))
        self.state_scaler = FeatureScaler(global_scales(config))

        self.actor_opts = [AdamOptimizer(a.params + [s], self.ppo.actor_lr, max_grad_norm=self.ppo.max_grad_norm)
                           for a, s in zip(self.actors, self.log_stds)]
        self.critic_opts = [AdamOptimizer(c.params, self.ppo.critic_lr, max_grad_norm=self.ppo.max_grad_norm)
                            for c in self.critics]
        self.updates = 0

    def actor_index(self, m: int) -> int:
        return 0 if self.share_actor else m

    def critic_index(self, m: int) -> int:
        return m if self.per_agent_critic else 0

    def act(self, m: int, observation: np.ndarray, rng: Optional[np.random.Generator] = None):
        """Returns ((power, velocity), raw u, log_prob); no rng means the deterministic action."""
        observation = np.asarray(observation, dtype=float)
        if observation.shape != (len(MICRO_OBSERVATION_FIELDS),):
            raise ShapeError(f"micro actor expects {len(MICRO_OBSERVATION_FIELDS)} local features, "
                             f"got {observation.shape}")
        k = self.actor_index(m)
        mean = self.actors[k].forward(self.obs_scaler(observation))
        sample = gaussian_head(mean, self.log_stds[k], self.limits, rng)
        return (float(sample.power), sample.velocity.copy()), sample.raw, float(sample.pre_squash_log_prob)

    def value(self, m: int, state: np.ndarray) -> float:
        return float(self.critics[self.critic_index(m)].forward(self.state_scaler(state))[0])

    def update(self, batch: Batch, rng: np.random.Generator) -> Dict[str, float]:
        cfg = self.ppo
        observations = self.obs_scaler(batch.observations)
        states = self.state_scaler(batch.states)
        stats = {"actor": 0.0, "critic": 0.0, "clip_fraction": 0.0}
        count = 0
        actor_of = np.array([self.actor_index(a) for a in batch.agents])
        critic_of = np.array([self.critic_index(a) for a in batch.agents])

        for _ in range(cfg.epochs):
            for index in _minibatches(len(batch), cfg.minibatch, rng):
                mb = batch.subset(index)
                adv = normalize_advantages(mb.advantages)
                n = len(index)
                obs_mb = observations[index]
                states_mb = states[index]

                for k in np.unique(actor_of[index]):
                    rows = np.flatnonzero(actor_of[index] == k)
                    share = len(rows) / n
                    loss, grads, clipped = gaussian_actor_loss_and_grads(
                        self.actors[k], self.log_stds[k], obs_mb[rows], mb.actions[rows], mb.log_probs[rows],
                        adv[rows], cfg, weight=share)
                    self.actor_opts[k].step(grads)
                    stats["actor"] += loss
                    stats["clip_fraction"] += clipped * share

                for k in np.unique(critic_of[index]):
                    rows = np.flatnonzero(critic_of[index] == k)
                    loss, grads = critic_loss_and_grads(self.critics[k], states_mb[rows], mb.returns[rows],
                                                        weight=len(rows) / n)
                    self.critic_opts[k].step(grads)
                    stats["critic"] += loss
                count += 1
        self.updates += 1
        return {k: v / max(count, 1) for k, v in stats.items()}

    def parameter_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {}
        for k, (actor, opt) in enumerate(zip(self.actors, self.actor_opts)):
            for i, p in enumerate(actor.params):
                arrays[f"actor{k}.p{i}"] = p
            arrays[f"actor{k}.log_std"] = self.log_stds[k]
            for key, value in opt.state_arrays().items():
                arrays[f"actor{k}.opt.{key}"] = value
        for k, (critic, opt) in enumerate(zip(self.critics, self.critic_opts)):
            for i, p in enumerate(critic.params):
                arrays[f"critic{k}.p{i}"] = p
            for key, value in opt.state_arrays().items():
                arrays[f"critic{k}.opt.{key}"] = value
        return arrays

    def load_parameter_arrays(self, arrays: Dict[str, np.ndarray]):
        for k, (actor, opt) in enumerate(zip(self.actors, self.actor_opts)):
            name = f"actor{k}"
            _load_net(actor, arrays, name)
            _assign(self.log_stds[k], arrays[f"{name}.log_std"], f"{name}.log_std")
            opt.load_state_arrays({key[len(name) + 5:]: v for key, v in arrays.items()
                                   if key.startswith(f"{name}.opt.")})
        for k, (critic, opt) in enumerate(zip(self.critics, self.critic_opts)):
            name = f"critic{k}"
            _load_net(critic, arrays, name)
            opt.load_state_arrays({key[len(name) + 5:]: v for key, v in arrays.items()
                                   if key.startswith(f"{name}.opt.")})


def _assign(target: np.ndarray, source: np.ndarray, name: str):
    if target.shape != np.shape(source):
        raise ShapeError(f"{name}: stored shape {np.shape(source)} does not match {target.shape}")
    target[...] = source


def _load_net(net: DenseNet, arrays: Dict[str, np.ndarray], name: str):
    for i, p in enumerate(net.params):
        key = f"{name}.p{i}"
        if key not in arrays:
            raise ShapeError(f"missing parameter array {key}")
        _assign(p, arrays[key], key)


def parameter_checksum(*agents) -> str:
    digest = hashlib.sha256()
    for agent in agents:
        arrays = agent.parameter_arrays()
        for key in sorted(arrays):
            if ".opt." in key:
                continue
            digest.update(key.encode("utf-8"))
            digest.update(np.ascontiguousarray(arrays[key], dtype=np.float64).tobytes())
    return digest.hexdigest()
