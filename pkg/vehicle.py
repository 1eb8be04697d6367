# vehicle.py

import logging
import math
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from data_model import (AuvState, DomainError, EnergyParams, MicroAction, MissionEnergy, MotionLimits,
                        PropulsionEnergy, StalledUploadError)
from utils import clamp_to_box, project_to_ball

logger = logging.getLogger(__name__)


def integrate_position(r: Sequence[float], thrust_velocity: Sequence[float], dt: float,
                       lower: Sequence[float], upper: Sequence[float],
                       drift: Optional[Sequence[float]] = None) -> np.ndarray:
    if not dt > 0:
        raise DomainError(f"slot duration must be > 0 s, got {dt}")
    velocity = np.asarray(thrust_velocity, dtype=float)
    if drift is not None:
        velocity = velocity + np.asarray(drift, dtype=float)
    return clamp_to_box(np.asarray(r, dtype=float) + dt * velocity, lower, upper)


def propulsion_energy(state: AuvState, v_rel: Sequence[float], params: EnergyParams) -> PropulsionEnergy:
    G = params.weight
    rho = params.water_density
    A = params.cross_section
    dt = params.slot_dt
    vx, vy, vz = (float(c) for c in state.thrust_velocity)

    horizontal_sq = vx * vx + vy * vy
    induced = horizontal_sq + horizontal_sq ** 2 + G * G / (rho * rho * A * A)
    e_horizontal = G * G * dt / (math.sqrt(2.0) * rho * A) / math.sqrt(induced)

    if params.vertical_mode == "absolute":
        e_descent = G * abs(vz) * dt
    else:
        # z is up-positive, so descending means vz < 0; ascent is buoyancy-assisted
        e_descent = G * max(-vz, 0.0) * dt

    speed_rel = float(np.linalg.norm(np.asarray(v_rel, dtype=float)))
    e_drag = 0.5 * rho * A * params.drag_cd * dt * speed_rel ** 3

    return PropulsionEnergy(horizontal=e_horizontal, descent=e_descent, drag=e_drag)


def mission_energy(state: AuvState, params: EnergyParams, upload_bits: float, upload_rate: float) -> MissionEnergy:
    detection = params.detect_coeff * math.pi * state.detection_radius ** 2
    if upload_bits > 0:
        if not upload_rate > 0:
            raise StalledUploadError(
                f"AUV {state.index} cannot upload {upload_bits:.0f} bits at rate {upload_rate}")
        transmission = state.transmit_power / params.acoustic_efficiency * (upload_bits / upload_rate)
    else:
        transmission = 0.0
    return MissionEnergy(detection=detection, transmission=transmission)


def apply_energy(energy: float, costs: Iterable[float]) -> float:
    costs = list(costs)
    if any(c < 0 for c in costs):
        raise DomainError(f"energy costs must be >= 0 J, got {costs}")
    return energy - float(sum(costs))


def project_action(power: float, velocity: Sequence[float], previous_velocity: Sequence[float],
                   limits: MotionLimits) -> Tuple[MicroAction, bool, bool]:
    """Project a commanded action onto the feasible set.

    The velocity is first pulled into the delta-v ball around the previous
    velocity, then into the speed ball. Both sets are convex and the previous
    velocity already lies in the speed ball, so the second projection keeps the
    delta-v bound.
    """
    clamped_power = float(min(max(power, limits.power_min), limits.power_max))
    previous = np.asarray(previous_velocity, dtype=float)
    stepped, delta_active = project_to_ball(np.asarray(velocity, dtype=float), limits.max_delta_v, center=previous)
    executed, speed_active = project_to_ball(stepped, limits.max_speed)
    return MicroAction(power=clamped_power, velocity=executed), delta_active, speed_active
