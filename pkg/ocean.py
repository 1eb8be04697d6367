# ocean.py
"""Time-varying 3D current field built from superposed Lamb-Oseen vortices.

Horizontal components follow the printed vortex formulas verbatim (both carry a
leading minus, which makes v_y point against +x on the +x axis). The vertical
component is a Gaussian bump with covariance diag(l, l):
    v_z = rho * delta / (2 pi l) * exp(-|r - r_c|^2 / (2 l)).
Between slots the field is frozen; `advance_field` applies the closed-form
Lamb-Oseen evolution (advect the center, grow the core).
"""

import logging
import math
from dataclasses import replace
from typing import Sequence, Tuple

import numpy as np

from data_model import CurrentField, DomainError, Vortex

logger = logging.getLogger(__name__)

_CENTER_EPS = 1e-12


def vortex_horizontal(vortex: Vortex, r: Sequence[float]) -> Tuple[float, float]:
    dx = float(r[0]) - vortex.center[0]
    dy = float(r[1]) - vortex.center[1]
    rho_sq = dx * dx + dy * dy
    if rho_sq < _CENTER_EPS:
        return 0.0, 0.0
    # 1 - exp(-x) without cancellation near the core
    bracket = -math.expm1(-rho_sq / vortex.core_radius ** 2)
    scale = -vortex.circulation_delta / (2.0 * math.pi * rho_sq) * bracket
    return scale * dy, scale * dx


def vortex_vertical(vortex: Vortex, r: Sequence[float]) -> float:
    dx = float(r[0]) - vortex.center[0]
    dy = float(r[1]) - vortex.center[1]
    l = vortex.core_radius
    normalizer = 1.0 / (2.0 * math.pi * l)   # det(2 pi diag(l, l))^(-1/2)
    return vortex.vertical_factor_rho * vortex.circulation_delta * normalizer * math.exp(-(dx * dx + dy * dy) / (2.0 * l))


def vorticity_at(vortex: Vortex, r: Sequence[float]) -> float:
    dx = float(r[0]) - vortex.center[0]
    dy = float(r[1]) - vortex.center[1]
    return vortex.peak_vorticity * math.exp(-(dx * dx + dy * dy) / vortex.core_radius ** 2)


def current_at(field: CurrentField, r: Sequence[float], clamp: bool = True) -> np.ndarray:
    velocity = np.array(field.background, dtype=float)
    for vortex in field.vortices:
        vx, vy = vortex_horizontal(vortex, r)
        velocity[0] += vx
        velocity[1] += vy
        velocity[2] += vortex_vertical(vortex, r)
    if clamp and field.max_speed is not None:
        speed = float(np.linalg.norm(velocity))
        if speed > field.max_speed:
            velocity *= field.max_speed / speed
    return velocity


def advance_field(field: CurrentField, dt: float) -> CurrentField:
    if not dt > 0:
        raise DomainError(f"field time step must be > 0 s, got {dt}")
    bx, by = field.background[0], field.background[1]
    advanced = []
    for vortex in field.vortices:
        core = math.sqrt(vortex.core_radius ** 2 + 4.0 * vortex.viscosity_h * dt)
        # the Gaussian core integrates to beta, so beta = delta keeps the circulation
        advanced.append(replace(
            vortex,
            center=(vortex.center[0] + bx * dt, vortex.center[1] + by * dt),
            core_radius=core,
            strength_beta=vortex.circulation_delta,
        ))
    return replace(field, vortices=tuple(advanced), time=field.time + dt)


def relative_velocity(thrust_velocity: Sequence[float], current: Sequence[float]) -> np.ndarray:
    return np.asarray(thrust_velocity, dtype=float) - np.asarray(current, dtype=float)


def random_field(rng: np.random.Generator, extent: Tuple[float, float], num_vortices: int = 3,
                 core_radius_range: Tuple[float, float] = (20.0, 40.0),
                 circulation_range: Tuple[float, float] = (5.0, 20.0),
                 vertical_factor: float = 0.05, viscosity: float = 1e-3,
                 background: Sequence[float] = (0.1, 0.05, 0.0),
                 max_speed: float = 1.5) -> CurrentField:
    vortices = []
    for _ in range(num_vortices):
        delta = float(rng.uniform(*circulation_range))
        vortices.append(Vortex(
            center=(float(rng.uniform(0.0, extent[0])), float(rng.uniform(0.0, extent[1]))),
            core_radius=float(rng.uniform(*core_radius_range)),
            strength_beta=delta,
            circulation_delta=delta,
            vertical_factor_rho=vertical_factor,
            viscosity_h=viscosity,
        ))
    logger.debug("Generated current field with %d vortices", len(vortices))
    return CurrentField(vortices=tuple(vortices), background=tuple(float(b) for b in background),
                        time=0.0, max_speed=max_speed)
