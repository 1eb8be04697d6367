# env.py
"""Two-timescale environment.

At each macro step the central AUV picks a team; the team then runs a micro
episode of motion and power control towards its sub-targets, after which the
task is fused and scored. One instance owns all mutable simulation state and
is driven by a single caller.
"""

import logging
import math
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from gymnasium import spaces

from acoustics import ambient_noise, channel_gains, eavesdropper_snr, link_rate
from app_config import ExperimentConfig
from covertness import covertness_margin, max_covert_snr
from data_model import (AuvState, DomainError, GLOBAL_FEATURES_PER_AUV, GLOBAL_SHARED_FEATURES, LifecycleError,
                        MACRO_FEATURES_PER_AUV, MICRO_OBSERVATION_FIELDS, MacroStepResult, MicroAction,
                        MicroStepResult, RewardLedger, RewardWeights, ShapeError, TaskSpec)
from ocean import advance_field, current_at, random_field, relative_velocity
from tasking import (assign_subtargets, coverage_ratio, detection_radius, phase_delays, task_time_and_efficiency,
                     to_arena_frame)
from utils import distance
from vehicle import apply_energy, integrate_position, mission_energy, project_action, propulsion_energy

ActionInput = Union[MicroAction, Tuple[float, Sequence[float]]]
MicroController = Callable[["HierarchicalAuvEnv", Dict[int, np.ndarray]], Mapping[int, ActionInput]]
TrajectorySink = Callable[[dict], None]

_CONSTRAINT_TOL = 1e-9


def target_reward(delta: float, weights: RewardWeights) -> float:
    if delta > 0:
        return weights.progress_gain * delta
    if delta < 0:
        return -weights.regress_gain * abs(delta)
    return 0.0


def micro_reward(covert: bool, task_rewards: float, target_rewards: float, energies: Sequence[float],
                 weights: RewardWeights, scales: Optional[Sequence[float]] = None) -> RewardLedger:
    """Per-slot team reward.

    The energy term sums each AUV's deficit below zero, divided by its entry
    in `scales` when given.
    """
    covert_reward = 1.0 if covert else -1.0
    if scales is None:
        scales = np.ones(len(energies))
    deficit = float(sum(max(-e, 0.0) / s for e, s in zip(energies, scales)))
    phi1, phi2, phi3, phi4 = weights.phi
    total = phi1 * covert_reward + phi2 * task_rewards + phi3 * target_rewards + phi4 * deficit
    return RewardLedger(covert=covert_reward, task=task_rewards, target=target_rewards, energy=deficit, total=total)


class HierarchicalAuvEnv:
    def __init__(self, config: ExperimentConfig, seed: Optional[int] = None):
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.num_auvs = config.num_auvs
        self.channel = config.channel_params()
        self.energy_params = config.energy_params()
        self.limits = config.motion_limits()
        self.weights = config.reward_weights()
        self.noise_power = ambient_noise(self.channel).band_power_w
        self.eavesdropper = np.array(config["env.eavesdropper"], dtype=float)
        self.cauv_position = np.array(config["env.cauv_position"], dtype=float)
        self.lower = np.array(config.arena_lower, dtype=float)
        self.upper = np.array(config.arena_upper, dtype=float)
        self.slot_dt = config["env.slot_dt"]
        self.micro_budget = config["env.micro_steps"]
        self.macro_budget = config["env.macro_steps"]

        self.rng = np.random.default_rng(config["run.seed"] if seed is None else seed)
        self.trajectory_sink: Optional[TrajectorySink] = None

        m = self.num_auvs
        self.macro_observation_space = spaces.Box(-np.inf, np.inf, shape=(len(MACRO_FEATURES_PER_AUV) * m,),
                                                  dtype=np.float64)
        self.macro_action_space = spaces.MultiBinary(m)
        self.micro_observation_space = spaces.Box(-np.inf, np.inf, shape=(len(MICRO_OBSERVATION_FIELDS),),
                                                  dtype=np.float64)
        v_max = self.limits.max_speed
        self.micro_action_space = spaces.Box(
            low=np.array([self.limits.power_min, -v_max, -v_max, -v_max]),
            high=np.array([self.limits.power_max, v_max, v_max, v_max]),
            dtype=np.float64,
        )
        self.global_state_space = spaces.Box(
            -np.inf, np.inf, shape=(len(GLOBAL_FEATURES_PER_AUV) * m + len(GLOBAL_SHARED_FEATURES),),
            dtype=np.float64)

        self.auvs: List[AuvState] = []
        self.field = None
        self.tasks: List[TaskSpec] = []
        self.episode_index = 0
        self.t = 0
        self.last_kl = 0.0
        self._episode_active = False
        self._micro_active = False
        self._awaiting_fusion = False
        self._clear_task_state()

    # --- lifecycle ---

    def _clear_task_state(self):
        self._team: List[int] = []
        self._subtargets: Dict[int, np.ndarray] = {}
        self._arrival_slot: Dict[int, int] = {}
        self._prev_dsub: Dict[int, float] = {}
        self._power_sum: Dict[int, float] = {}
        self._dist_distances = np.zeros(0)
        self._dist_rates = np.zeros(0)
        self._slot = 0
        self._micro_rewards: List[float] = []
        self._kls: List[float] = []
        self._covert_flags: List[bool] = []
        self._repaired = False
        self._selection = np.zeros(self.num_auvs, dtype=int)

    @property
    def episode_active(self) -> bool:
        return self._episode_active

    @property
    def micro_active(self) -> bool:
        return self._micro_active

    @property
    def done(self) -> bool:
        return self._episode_active and self.t >= self.macro_budget

    @property
    def current_task(self) -> TaskSpec:
        self._require_episode()
        return self.tasks[min(self.t, len(self.tasks) - 1)]

    @property
    def team(self) -> List[int]:
        return list(self._team)

    @property
    def slot(self) -> int:
        return self._slot

    def subtarget(self, m: int) -> Optional[np.ndarray]:
        target = self._subtargets.get(m)
        return None if target is None else target.copy()

    def _require_episode(self):
        if not self._episode_active:
            raise LifecycleError("no active episode; call reset_episode first")

    def reset_episode(self, seed: Optional[int] = None, episode: int = 0) -> np.ndarray:
        cfg = self.config
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        rng = self.rng
        self.episode_index = episode

        positions = rng.uniform(self.lower, self.upper, size=(self.num_auvs, 3))
        energies = rng.uniform(cfg["env.energy_init_min"], cfg["env.energy_init_max"], size=self.num_auvs)
        compute = rng.uniform(cfg["task.compute_min"], cfg["task.compute_max"], size=self.num_auvs)
        self.auvs = []
        for m in range(self.num_auvs):
            radius = detection_radius(float(compute[m]), cfg["task.base_radius"], cfg["task.radius_gain"],
                                      cfg["task.compute_ref"])
            self.auvs.append(AuvState(index=m, position=positions[m].copy(), thrust_velocity=np.zeros(3),
                                      energy=float(energies[m]), initial_energy=float(energies[m]),
                                      detection_radius=radius, compute_C_m=float(compute[m])))

        self.field = random_field(
            rng, (cfg["arena.length"], cfg["arena.width"]),
            num_vortices=cfg["ocean.num_vortices"],
            core_radius_range=(cfg["ocean.core_radius_min"], cfg["ocean.core_radius_max"]),
            circulation_range=(cfg["ocean.circulation_min"], cfg["ocean.circulation_max"]),
            vertical_factor=cfg["ocean.vertical_factor"],
            viscosity=cfg["ocean.viscosity"],
            background=cfg["ocean.background"],
            max_speed=cfg["ocean.max_speed"],
        )

        length, width = cfg["task.length"], cfg["task.width"]
        self.tasks = []
        for _ in range(self.macro_budget):
            center = (
                float(rng.uniform(length / 2.0, cfg["arena.length"] - length / 2.0)),
                float(rng.uniform(width / 2.0, cfg["arena.width"] - width / 2.0)),
                float(rng.uniform(cfg["env.task_depth_min"], cfg["env.task_depth_max"])),
            )
            self.tasks.append(TaskSpec(center=center, length_l=length, width_w=width,
                                       instruction_bits_D=cfg["task.instruction_bits"],
                                       sample_bits_phi=cfg["task.sample_density"],
                                       sonar_beam_theta=cfg["task.sonar_beam"]))

        self.t = 0
        self.last_kl = 0.0
        self._episode_active = True
        self._micro_active = False
        self._awaiting_fusion = False
        self._clear_task_state()
        self.logger.debug("Episode %d reset: %d AUVs, %d tasks, covert SNR budget %.4g",
                          episode, self.num_auvs, len(self.tasks), max_covert_snr(cfg["covert.epsilon"]))
        return self.macro_observe()

    # --- observations ---

    def macro_observe(self) -> np.ndarray:
        self._require_episode()
        return np.concatenate([[a.position[0], a.position[1], a.position[2], a.energy] for a in self.auvs]).astype(float)

    def _distance_to_subtarget(self, m: int) -> float:
        target = self._subtargets.get(m)
        return 0.0 if target is None else distance(self.auvs[m].position, target)

    def micro_observe(self, m: int) -> np.ndarray:
        self._require_episode()
        if not 0 <= m < self.num_auvs:
            raise ShapeError(f"AUV index {m} out of range for {self.num_auvs} AUVs")
        auv = self.auvs[m]
        return np.array([
            distance(auv.position, self.eavesdropper),
            distance(auv.position, self.cauv_position),
            self._distance_to_subtarget(m),
            *auv.position,
            *auv.thrust_velocity,
            float(auv.selected_G),
            auv.energy,
        ], dtype=float)

    def global_state(self) -> np.ndarray:
        self._require_episode()
        per_auv = []
        d_eve = []
        for auv in self.auvs:
            d = distance(auv.position, self.eavesdropper)
            d_eve.append(d)
            per_auv.extend([*auv.position, *auv.thrust_velocity, auv.energy, float(auv.selected_G),
                            self._distance_to_subtarget(auv.index), d])
        task = self.current_task
        watched = [d_eve[m] for m in self._team] or d_eve
        shared = [task.center[0], task.center[1], task.length_l, task.width_w, min(watched), self.last_kl]
        return np.array(per_auv + shared, dtype=float)

    # --- macro level ---

    def begin_task(self, selection: Sequence[int], probabilities: Optional[Sequence[float]] = None) -> Tuple[np.ndarray, bool]:
        """Start the next task with the given team and return (team, repaired)."""
        self._require_episode()
        if self._micro_active or self._awaiting_fusion:
            raise LifecycleError("the current task has not been finished")
        if self.done:
            raise LifecycleError(f"all {self.macro_budget} tasks of the episode are finished")
        selection = np.asarray(selection).astype(int).reshape(-1)
        if selection.shape != (self.num_auvs,):
            raise ShapeError(f"selection must have {self.num_auvs} entries, got {selection.shape}")
        selection = (selection != 0).astype(int)

        self._clear_task_state()
        if selection.sum() == 0:
            if probabilities is not None:
                fallback = int(np.argmax(np.asarray(probabilities, dtype=float)))
            else:
                fallback = int(np.argmax([a.energy for a in self.auvs]))
            selection[fallback] = 1
            self._repaired = True
            self.logger.warning(f"Empty team selected for task {self.t}; forcing AUV {fallback} on.")

        for auv, g in zip(self.auvs, selection):
            auv.thrust_velocity = np.zeros(3)
            auv.transmit_power = 0.0
            auv.selected_G = int(g)
        self._selection = selection
        self._team = [int(m) for m in np.flatnonzero(selection)]

        task = self.current_task
        radii = np.array([self.auvs[m].detection_radius for m in self._team])
        placement = assign_subtargets(radii, task.length_l, task.width_w, self.rng,
                                      max_attempts=self.config["task.placement_attempts"])
        if placement.best_effort:
            self.logger.warning(f"Sub-targets for task {self.t} overlap (best-effort placement, team {self._team}).")
        centers = to_arena_frame(placement, task)
        for m, center in zip(self._team, centers):
            self._subtargets[m] = center
            self._arrival_slot[m] = 0
            self._prev_dsub[m] = distance(self.auvs[m].position, center)
            self._power_sum[m] = 0.0

        self._dist_distances = np.array([distance(self.auvs[m].position, self.cauv_position) for m in self._team])
        gains = channel_gains(self.channel, np.maximum(self._dist_distances, self.channel.min_distance))
        cauv_power = self.config["env.cauv_power"]
        self._dist_rates = np.array([link_rate([1], [cauv_power], [g], self.noise_power, self.channel.bandwidth)
                                     for g in gains])
        self._micro_active = True
        self.logger.debug("Task %d started with team %s", self.t, self._team)
        return selection.copy(), self._repaired

    # --- micro level ---

    def _normalize_action(self, action: ActionInput) -> Tuple[float, np.ndarray]:
        if isinstance(action, MicroAction):
            return float(action.power), np.asarray(action.velocity, dtype=float)
        power, velocity = action
        velocity = np.asarray(velocity, dtype=float)
        if velocity.shape != (3,):
            raise ShapeError(f"velocity must have 3 components, got {velocity.shape}")
        return float(power), velocity

    def micro_step(self, actions: Mapping[int, ActionInput]) -> MicroStepResult:
        if not self._micro_active:
            raise LifecycleError("no active micro episode; call begin_task first")
        unknown = sorted(set(actions) - set(self._team))
        if unknown:
            raise DomainError(f"actions given for unselected AUVs {unknown}")
        missing = sorted(set(self._team) - set(actions))
        if missing:
            raise DomainError(f"missing actions for selected AUVs {missing}")

        self._slot += 1
        tau = self._slot
        w = self.weights
        drift = self.config["env.drift_displacement"]
        executed: Dict[int, MicroAction] = {}
        task_rewards = 0.0
        target_rewards = 0.0

        for m in self._team:
            auv = self.auvs[m]
            power, velocity = self._normalize_action(actions[m])
            previous = auv.thrust_velocity.copy()
            action, delta_active, speed_active = project_action(power, velocity, previous, self.limits)
            if delta_active or speed_active:
                self.logger.debug("AUV %d slot %d: velocity projected (delta=%s, speed=%s)",
                                  m, tau, delta_active, speed_active)
            self._check_constraints(action, previous)
            executed[m] = action
            auv.thrust_velocity = np.array(action.velocity, dtype=float)
            auv.transmit_power = action.power
            self._power_sum[m] += action.power

            current = current_at(self.field, auv.position)
            costs = propulsion_energy(auv, relative_velocity(auv.thrust_velocity, current), self.energy_params)
            auv.energy = apply_energy(auv.energy, [costs.total])
            auv.position = integrate_position(auv.position, auv.thrust_velocity, self.slot_dt, self.lower,
                                              self.upper, drift=current if drift else None)

            d_sub = distance(auv.position, self._subtargets[m])
            if self._arrival_slot[m] == 0 and d_sub < auv.detection_radius:
                self._arrival_slot[m] = tau
                task_rewards += w.task_bonus
                detect = mission_energy(auv, self.energy_params, 0.0, 0.0).detection
                auv.energy = apply_energy(auv.energy, [detect])
                self.logger.debug("AUV %d reached its sub-target in slot %d", m, tau)

            target_rewards += target_reward(self._prev_dsub[m] - d_sub, w)
            self._prev_dsub[m] = d_sub

        team_powers = [self.auvs[m].transmit_power for m in self._team]
        team_d_eve = [max(distance(self.auvs[m].position, self.eavesdropper), self.channel.min_distance)
                      for m in self._team]
        gamma_d = eavesdropper_snr(np.ones(len(self._team)), team_powers, team_d_eve, self.channel,
                                   noise_power=self.noise_power)
        margin = covertness_margin(gamma_d, self.config["covert.epsilon"])
        scales = [a.initial_energy for a in self.auvs] if w.relative_deficit else None
        ledger = micro_reward(margin.satisfied, task_rewards, target_rewards, [a.energy for a in self.auvs], w,
                              scales=scales)
        total = ledger.total

        self.field = advance_field(self.field, self.slot_dt)
        self.last_kl = margin.kl
        self._micro_rewards.append(total)
        self._kls.append(margin.kl)
        self._covert_flags.append(margin.satisfied)

        arrived = {m: self._arrival_slot[m] > 0 for m in self._team}
        done = bool(self.config["env.stop_on_arrival"] and all(arrived.values()))
        truncated = (not done) and tau >= self.micro_budget
        if done or truncated:
            self._micro_active = False
            self._awaiting_fusion = True

        if self.trajectory_sink is not None:
            for m in self._team:
                auv = self.auvs[m]
                self.trajectory_sink({
                    "episode": self.episode_index, "t": self.t, "tau": tau, "auv": m,
                    "position": [float(c) for c in auv.position],
                    "velocity": [float(c) for c in auv.thrust_velocity],
                    "power": float(auv.transmit_power), "kl": float(margin.kl),
                    "arrived": bool(arrived[m]),
                })

        observations = {m: self.micro_observe(m) for m in self._team}
        return MicroStepResult(observations=observations, reward=total, ledger=ledger, kl=margin.kl,
                               covert=margin.satisfied, arrived=arrived, executed=executed,
                               done=done, truncated=truncated)

    def _check_constraints(self, action: MicroAction, previous: np.ndarray):
        lim = self.limits
        if not lim.power_min - _CONSTRAINT_TOL <= action.power <= lim.power_max + _CONSTRAINT_TOL:
            raise DomainError(f"executed power {action.power} outside [{lim.power_min}, {lim.power_max}]")
        if np.linalg.norm(action.velocity) > lim.max_speed + _CONSTRAINT_TOL:
            raise DomainError(f"executed speed {np.linalg.norm(action.velocity)} exceeds {lim.max_speed}")
        if np.linalg.norm(action.velocity - previous) > lim.max_delta_v + _CONSTRAINT_TOL:
            raise DomainError(f"executed velocity change exceeds {lim.max_delta_v}")

    def finish_task(self) -> MacroStepResult:
        """Fuse the team's results, charge upload energy and score the task."""
        if not self._awaiting_fusion:
            raise LifecycleError("the micro episode has not ended")
        cfg = self.config
        task = self.current_task
        team = self._team
        radii = np.array([self.auvs[m].detection_radius for m in team])

        upload_distances = np.array([distance(self.auvs[m].position, self.cauv_position) for m in team])
        gains = channel_gains(self.channel, np.maximum(upload_distances, self.channel.min_distance))
        upload_rates = np.zeros(len(team))
        for i, m in enumerate(team):
            auv = self.auvs[m]
            mean_power = self._power_sum[m] / self._slot
            upload_rates[i] = link_rate([1], [mean_power], [gains[i]], self.noise_power, self.channel.bandwidth)
            bits = task.sample_bits_phi * math.pi * auv.detection_radius ** 2
            if upload_rates[i] <= 0:
                self.logger.warning(f"AUV {m} never transmitted during task {self.t}; upload stalls "
                                    f"for {cfg['task.upload_timeout']} s.")
                continue
            auv.transmit_power = mean_power
            cost = mission_energy(auv, self.energy_params, bits, upload_rates[i]).transmission
            auv.energy = apply_energy(auv.energy, [cost])

        delays = phase_delays(
            radii, task, self._dist_distances, self._dist_rates, upload_distances, upload_rates,
            [self._arrival_slot[m] for m in team], self.slot_dt, self.micro_budget,
            sound_speed=cfg["channel.sound_speed"], inverted_propagation=cfg["task.inverted_propagation"],
            upload_timeout=cfg["task.upload_timeout"],
        )
        zeta = coverage_ratio(np.ones(len(team)), radii, task.length_l, task.width_w)
        outcome = task_time_and_efficiency(delays, zeta)
        mean_micro = float(np.mean(self._micro_rewards))
        xi1, xi2, xi3 = self.weights.xi
        reward = xi1 * zeta + xi2 * outcome.t_task + xi3 * mean_micro

        for auv in self.auvs:
            auv.thrust_velocity = np.zeros(3)
            auv.transmit_power = 0.0

        self._awaiting_fusion = False
        self.t += 1
        result = MacroStepResult(
            state=self.macro_observe(),
            reward=reward,
            selection=self._selection.copy(),
            repaired=self._repaired,
            zeta=zeta,
            t_task=outcome.t_task,
            efficiency=outcome.efficiency,
            mean_kl=float(np.mean(self._kls)),
            covert_rate=float(np.mean(self._covert_flags)),
            mean_energy=float(np.mean([a.energy for a in self.auvs])),
            micro_rewards=list(self._micro_rewards),
            delays=delays,
            done=self.done,
        )
        self.logger.debug("Task %d finished: zeta=%.3f T_task=%.2f eta=%.5f R=%.3f",
                          self.t - 1, zeta, outcome.t_task, outcome.efficiency, reward)
        return result

    def macro_step(self, selection: Sequence[int], controller: MicroController,
                   probabilities: Optional[Sequence[float]] = None) -> MacroStepResult:
        self.begin_task(selection, probabilities)
        observations = {m: self.micro_observe(m) for m in self._team}
        while self._micro_active:
            result = self.micro_step(controller(self, observations))
            observations = result.observations
        return self.finish_task()
