# data_model.py

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np


class SimulationError(Exception):
    pass
class DomainError(SimulationError, ValueError):
    pass
class DegenerateHypothesesError(SimulationError):
    pass
class StalledUploadError(SimulationError):
    pass
class UndefinedTaskError(SimulationError):
    pass
class LifecycleError(SimulationError):
    pass
class ShapeError(SimulationError, ValueError):
    pass
class ExperimentError(SimulationError):
    pass
class IncompatibleCheckpointError(ExperimentError):
    pass


class ThorpVariant(str, Enum):
    STANDARD_F2 = "standard_f2"
    CUBIC_F3 = "cubic_f3"


# --- Acoustics ---

@dataclass(frozen=True)
class ChannelParams:
    carrier_f: float = 30.0
    bandwidth: float = 10e6
    spreading_chi: float = 1.5
    shipping_s: float = 0.5
    wind_w: float = 0.0
    noise_override: Optional[float] = 0.2
    thorp_variant: ThorpVariant = ThorpVariant.STANDARD_F2
    min_distance: float = 1.0

    def __post_init__(self):
        if not self.carrier_f > 0:
            raise DomainError(f"carrier_f must be > 0 kHz, got {self.carrier_f}")
        if not self.bandwidth > 0:
            raise DomainError(f"bandwidth must be > 0 Hz, got {self.bandwidth}")
        if not 1.0 <= self.spreading_chi <= 2.0:
            raise DomainError(f"spreading_chi must lie in [1, 2], got {self.spreading_chi}")
        if not 0.0 <= self.shipping_s <= 1.0:
            raise DomainError(f"shipping_s must lie in [0, 1], got {self.shipping_s}")
        if self.wind_w < 0:
            raise DomainError(f"wind_w must be >= 0 m/s, got {self.wind_w}")
        if self.noise_override is not None and not self.noise_override > 0:
            raise DomainError(f"noise_override must be > 0 W, got {self.noise_override}")
        if self.min_distance <= 0:
            raise DomainError(f"min_distance must be > 0 m, got {self.min_distance}")


@dataclass(frozen=True)
class LinkBudget:
    distance: float
    loss_db: float
    gain_linear: float
    noise_power: float

    @property
    def loss_linear(self) -> float:
        return 10.0 ** (self.loss_db / 10.0)


@dataclass(frozen=True)
class NoiseSpectrum:
    turbulence_db: float
    shipping_db: float
    waves_db: float
    thermal_db: float
    total_psd_db: float
    band_power_w: float


# --- Covertness ---

@dataclass(frozen=True)
class HypothesisStats:
    sigma0_sq: float
    sigma1_sq: float
    epsilon: float = 0.05

    def __post_init__(self):
        if not self.sigma0_sq > 0:
            raise DomainError(f"sigma0_sq must be > 0, got {self.sigma0_sq}")
        if self.sigma1_sq < self.sigma0_sq:
            raise DomainError(f"sigma1_sq ({self.sigma1_sq}) must be >= sigma0_sq ({self.sigma0_sq})")
        if not 0.0 < self.epsilon <= 1.0:
            raise DomainError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    @property
    def snr(self) -> float:
        return self.sigma1_sq / self.sigma0_sq - 1.0


@dataclass(frozen=True)
class CovertnessMargin:
    kl: float
    limit: float
    satisfied: bool


@dataclass(frozen=True)
class DetectionError:
    p_fa: float
    p_md: float

    @property
    def total(self) -> float:
        return self.p_fa + self.p_md


# --- Ocean ---

@dataclass(frozen=True)
class Vortex:
    center: Tuple[float, float]
    core_radius: float
    strength_beta: float
    circulation_delta: float
    vertical_factor_rho: float = 0.05
    viscosity_h: float = 1e-3

    def __post_init__(self):
        if not self.core_radius > 0:
            raise DomainError(f"core_radius must be > 0 m, got {self.core_radius}")
        if self.viscosity_h < 0:
            raise DomainError(f"viscosity_h must be >= 0, got {self.viscosity_h}")

    @property
    def peak_vorticity(self) -> float:
        return self.strength_beta / (math.pi * self.core_radius ** 2)


@dataclass(frozen=True)
class CurrentField:
    vortices: Tuple[Vortex, ...] = ()
    background: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    time: float = 0.0
    max_speed: Optional[float] = 1.5


# --- Vehicle ---

@dataclass
class AuvState:
    index: int
    position: np.ndarray
    thrust_velocity: np.ndarray
    energy: float
    detection_radius: float
    compute_C_m: float
    selected_G: int = 0
    transmit_power: float = 0.0
    initial_energy: float = 0.0

    def copy(self) -> "AuvState":
        return AuvState(
            index=self.index,
            position=self.position.copy(),
            thrust_velocity=self.thrust_velocity.copy(),
            energy=self.energy,
            detection_radius=self.detection_radius,
            compute_C_m=self.compute_C_m,
            selected_G=self.selected_G,
            transmit_power=self.transmit_power,
            initial_energy=self.initial_energy,
        )


@dataclass(frozen=True)
class EnergyParams:
    weight: float = 150.0
    water_density: float = 1025.0
    cross_section: float = 0.1
    drag_cd: float = 0.8
    detect_coeff: float = 0.5
    acoustic_efficiency: float = 0.5
    slot_dt: float = 2.0
    vertical_mode: str = "descent"

    def __post_init__(self):
        for name in ("weight", "water_density", "cross_section", "drag_cd", "detect_coeff", "acoustic_efficiency", "slot_dt"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.acoustic_efficiency > 1.0:
            raise DomainError(f"acoustic_efficiency must be <= 1, got {self.acoustic_efficiency}")
        if self.vertical_mode not in ("descent", "absolute"):
            raise DomainError(f"vertical_mode must be 'descent' or 'absolute', got {self.vertical_mode!r}")


@dataclass(frozen=True)
class MotionLimits:
    power_min: float = 0.0
    power_max: float = 2.0
    max_speed: float = 5.0
    max_delta_v: float = 1.0

    def __post_init__(self):
        if self.power_min < 0 or self.power_max < self.power_min:
            raise DomainError(f"power bounds must satisfy 0 <= P_min <= P_max, got [{self.power_min}, {self.power_max}]")
        if not self.max_speed > 0 or not self.max_delta_v > 0:
            raise DomainError("max_speed and max_delta_v must be > 0")


@dataclass(frozen=True)
class PropulsionEnergy:
    horizontal: float
    descent: float
    drag: float

    @property
    def total(self) -> float:
        return self.horizontal + self.descent + self.drag


@dataclass(frozen=True)
class MissionEnergy:
    detection: float
    transmission: float


@dataclass(frozen=True)
class MicroAction:
    power: float
    velocity: np.ndarray


# --- Tasking ---

@dataclass(frozen=True)
class TaskSpec:
    center: Tuple[float, float, float]
    length_l: float = 30.0
    width_w: float = 30.0
    instruction_bits_D: float = 1e6
    sample_bits_phi: float = 1e3
    sonar_beam_theta: float = math.pi / 3

    def __post_init__(self):
        if not self.length_l > 0 or not self.width_w > 0:
            raise DomainError(f"task rectangle must have positive sides, got {self.length_l} x {self.width_w}")

    @property
    def area(self) -> float:
        return self.length_l * self.width_w


@dataclass
class Placement:
    centers: np.ndarray
    radii: np.ndarray
    best_effort: bool
    processing_order: Tuple[int, ...] = ()


@dataclass(frozen=True)
class PhaseDelays:
    distribution: np.ndarray
    move: np.ndarray
    execution: np.ndarray
    upload: np.ndarray
    arrived: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.distribution + self.move + self.execution + self.upload


@dataclass(frozen=True)
class TaskOutcome:
    t_task: float
    efficiency: float


# --- Environment ---

MICRO_OBSERVATION_FIELDS = (
    "d_to_eavesdropper", "d_to_cauv", "d_to_subtarget",
    "x", "y", "z", "vx", "vy", "vz",
    "selected_G", "energy",
)
MACRO_FEATURES_PER_AUV = ("x", "y", "z", "energy")
GLOBAL_FEATURES_PER_AUV = ("x", "y", "z", "vx", "vy", "vz", "energy", "selected_G", "d_to_subtarget", "d_to_eavesdropper")
GLOBAL_SHARED_FEATURES = ("task_x", "task_y", "task_l", "task_w", "min_d_to_eavesdropper", "last_kl")


@dataclass(frozen=True)
class RewardWeights:
    xi: Tuple[float, float, float] = (10.0, -0.01, 1.0)
    phi: Tuple[float, float, float, float] = (1.0, 1.0, 1.0, -1.0)
    task_bonus: float = 100.0
    progress_gain: float = 1.5
    regress_gain: float = 1.5
    relative_deficit: bool = True


@dataclass(frozen=True)
class RewardLedger:
    covert: float
    task: float
    target: float
    energy: float
    total: float


@dataclass
class MicroStepResult:
    observations: Dict[int, np.ndarray]
    reward: float
    ledger: RewardLedger
    kl: float
    covert: bool
    arrived: Dict[int, bool]
    executed: Dict[int, MicroAction]
    done: bool
    truncated: bool


@dataclass
class MacroStepResult:
    state: np.ndarray
    reward: float
    selection: np.ndarray
    repaired: bool
    zeta: float
    t_task: float
    efficiency: float
    mean_kl: float
    covert_rate: float
    mean_energy: float
    micro_rewards: List[float] = field(default_factory=list)
    delays: Optional[PhaseDelays] = None
    done: bool = False
