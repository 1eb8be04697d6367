# tasking.py
"""Task pipeline: detection radii, greedy sub-target placement, coverage,
phase delays, total task time and collaboration efficiency."""

import logging
import math
from typing import Optional, Sequence

import numpy as np

from data_model import DomainError, PhaseDelays, Placement, TaskOutcome, TaskSpec, UndefinedTaskError
from utils import clamp_to_box

logger = logging.getLogger(__name__)

SOUND_SPEED = 1500.0


def detection_radius(compute_C_m: float, base_radius: float, mu: float, compute_ref: float) -> float:
    if compute_C_m < 0:
        raise DomainError(f"computing ability must be >= 0, got {compute_C_m}")
    if not compute_ref > 0:
        raise DomainError(f"reference computing ability must be > 0, got {compute_ref}")
    return base_radius + mu * math.log1p(compute_C_m / compute_ref)


def coverage_ratio(selected: Sequence[float], radii: Sequence[float], length_l: float, width_w: float) -> float:
    if not length_l > 0 or not width_w > 0:
        raise DomainError(f"task rectangle must have positive sides, got {length_l} x {width_w}")
    selected = np.asarray(selected, dtype=float)
    radii = np.asarray(radii, dtype=float)
    raw = float(np.sum(selected * math.pi * radii ** 2)) / (length_l * width_w)
    return min(1.0, raw)


def assign_subtargets(radii: Sequence[float], length_l: float, width_w: float, rng: np.random.Generator,
                      max_attempts: int = 200) -> Placement:
    """Greedy placement of detection discs inside an l x w rectangle.

    Largest radius first. Candidates come from a normal distribution centred on
    the rectangle (std l/6, w/6) clamped to the disc's feasible box, and are
    accepted once they clear every placed disc. When no candidate clears after
    `max_attempts`, the one with the largest worst-case clearance is kept and the
    placement is marked best effort. Centers are returned in input order, in the
    rectangle frame.
    """
    radii = np.asarray(radii, dtype=float)
    count = len(radii)
    order = tuple(int(i) for i in np.argsort(-radii, kind="stable"))
    centers = np.zeros((count, 2))
    mean = np.array([length_l / 2.0, width_w / 2.0])
    std = np.array([length_l / 6.0, width_w / 6.0])
    placed = []
    best_effort = False

    for i in order:
        r = radii[i]
        if r > min(length_l, width_w) / 2.0:
            logger.warning(f"Detection radius {r:.3f} m does not fit a {length_l} x {width_w} m rectangle; using its center.")
            centers[i] = mean
            placed.append(i)
            best_effort = True
            continue

        lower = (r, r)
        upper = (length_l - r, width_w - r)
        best_candidate, best_clearance = None, -math.inf
        accepted = False
        for _ in range(max_attempts):
            candidate = clamp_to_box(rng.normal(mean, std), lower, upper)
            if placed:
                clearance = min(float(np.linalg.norm(candidate - centers[j])) - (r + radii[j]) for j in placed)
            else:
                clearance = math.inf
            if clearance >= 0.0:
                best_candidate = candidate
                accepted = True
                break
            if clearance > best_clearance:
                best_candidate, best_clearance = candidate, clearance

        if not accepted:
            logger.debug("No overlap-free spot for radius %.3f after %d attempts (best clearance %.3f m)",
                         r, max_attempts, best_clearance)
            best_effort = True
        centers[i] = best_candidate
        placed.append(i)

    return Placement(centers=centers, radii=radii.copy(), best_effort=best_effort, processing_order=order)


def to_arena_frame(placement: Placement, task: TaskSpec) -> np.ndarray:
    origin = np.array([task.center[0] - task.length_l / 2.0, task.center[1] - task.width_w / 2.0])
    xy = placement.centers + origin
    z = np.full((len(xy), 1), float(task.center[2]))
    return np.hstack([xy, z])


def _propagation(distances: np.ndarray, sound_speed: float, inverted_propagation: bool) -> np.ndarray:
    if inverted_propagation:
        return sound_speed / np.maximum(distances, 1e-9)
    return distances / sound_speed


def phase_delays(radii: Sequence[float], task: TaskSpec,
                 distribution_distances: Sequence[float], distribution_rates: Sequence[float],
                 upload_distances: Sequence[float], upload_rates: Sequence[float],
                 arrival_slots: Sequence[int], slot_dt: float, micro_budget: int,
                 sound_speed: float = SOUND_SPEED, inverted_propagation: bool = False,
                 upload_timeout: Optional[float] = None) -> PhaseDelays:
    """Per-AUV delays of the three task phases.

    `arrival_slots` holds the 1-based index of the first micro slot in which the
    AUV was within its detection radius of the sub-target, or 0 if it never was.
    An upload rate of zero is only accepted when `upload_timeout` is given.
    """
    radii = np.asarray(radii, dtype=float)
    dist_rates = np.asarray(distribution_rates, dtype=float)
    up_rates = np.asarray(upload_rates, dtype=float)
    if np.any(dist_rates <= 0):
        raise DomainError("task distribution rates must be > 0 bit/s")
    if upload_timeout is None and np.any(up_rates <= 0):
        raise DomainError("upload rates must be > 0 bit/s")

    distribution = task.instruction_bits_D / dist_rates + _propagation(
        np.asarray(distribution_distances, dtype=float), sound_speed, inverted_propagation)

    slots = np.asarray(arrival_slots, dtype=int)
    arrived = slots > 0
    move = np.where(arrived, slots, micro_budget) * slot_dt

    chord = 2.0 * radii * math.sin(task.sonar_beam_theta / 2.0)
    execution = 2.0 * math.pi / chord

    payload = task.sample_bits_phi * math.pi * radii ** 2
    propagation_up = _propagation(np.asarray(upload_distances, dtype=float), sound_speed, inverted_propagation)
    with np.errstate(divide="ignore"):
        transfer = np.where(up_rates > 0, payload / np.where(up_rates > 0, up_rates, 1.0), np.inf)
    upload = np.where(up_rates > 0, transfer + propagation_up, upload_timeout if upload_timeout is not None else np.inf)

    return PhaseDelays(distribution=distribution, move=move, execution=execution, upload=upload, arrived=arrived)


def task_time_and_efficiency(delays: PhaseDelays, zeta: float) -> TaskOutcome:
    totals = delays.total
    if totals.size == 0:
        raise UndefinedTaskError("task time is undefined for an empty team")
    t_task = float(np.max(totals))
    return TaskOutcome(t_task=t_task, efficiency=zeta / t_task)
