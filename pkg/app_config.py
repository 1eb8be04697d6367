# app_config.py

import hashlib
import logging
import math
import os
import re
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

from data_model import ChannelParams, EnergyParams, MotionLimits, RewardWeights, SimulationError, ThorpVariant
from rl.ppo import PpoConfig
from utils import format_value

RESOLVED_CONFIG_FILENAME = "resolved_config.properties"


class ConfigError(SimulationError):
    pass


@dataclass(frozen=True)
class ConfigKey:
    name: str
    default: Any
    kind: str
    doc: str
    choices: Tuple[str, ...] = ()
    hashed: bool = True


def _key(name, default, kind, doc, choices=(), hashed=True) -> ConfigKey:
    return ConfigKey(name, default, kind, doc, tuple(choices), hashed)


# Order is the echo order.
CONFIG_KEYS: Tuple[ConfigKey, ...] = (
    _key("arena.length", 200.0, "float", "arena extent along x, m"),
    _key("arena.width", 200.0, "float", "arena extent along y, m"),
    _key("arena.depth", 100.0, "float", "arena depth, z in [-depth, 0], m"),

    _key("env.num_auvs", 6, "int", "team size M"),
    _key("env.macro_steps", 10, "int", "macro tasks per episode T"),
    _key("env.micro_steps", 100, "int", "micro slot budget per task"),
    _key("env.slot_dt", 2.0, "float", "micro slot length, s"),
    _key("env.stop_on_arrival", True, "bool", "end the micro episode once every selected AUV has arrived"),
    _key("env.eavesdropper", (75.0, 75.0, 5.0), "vector", "eavesdropper position, m"),
    _key("env.cauv_position", (0.0, 0.0, -10.0), "vector", "central AUV position, m"),
    _key("env.max_speed", 5.0, "float", "V_max, m/s"),
    _key("env.max_delta_v", 1.0, "float", "maximum velocity change per slot, m/s"),
    _key("env.power_min", 0.0, "float", "P_min, W"),
    _key("env.power_max", 2.0, "float", "P_max, W"),
    _key("env.cauv_power", 2.0, "float", "central AUV transmit power for task distribution, W"),
    _key("env.energy_init_min", 10000.0, "float", "initial energy lower bound, J"),
    _key("env.energy_init_max", 20000.0, "float", "initial energy upper bound, J"),
    _key("env.drift_displacement", False, "bool", "let the current displace AUVs"),
    _key("env.task_depth_min", -90.0, "float", "deepest task center z, m"),
    _key("env.task_depth_max", -10.0, "float", "shallowest task center z, m"),

    _key("channel.carrier_f", 30.0, "float", "carrier frequency, kHz"),
    _key("channel.bandwidth", 10e6, "float", "bandwidth B, Hz"),
    _key("channel.spreading_chi", 1.5, "float", "spreading factor"),
    _key("channel.shipping_s", 0.5, "float", "shipping activity in [0, 1]"),
    _key("channel.wind_w", 0.0, "float", "wind speed, m/s"),
    _key("channel.use_noise_override", True, "bool", "use channel.noise_override as the band noise power"),
    _key("channel.noise_override", 0.2, "float", "band noise power N_0, W"),
    _key("channel.thorp_variant", ThorpVariant.STANDARD_F2.value, "choice", "absorption formula",
         choices=[v.value for v in ThorpVariant]),
    _key("channel.min_distance", 1.0, "float", "path loss distance floor, m"),
    _key("channel.sound_speed", 1500.0, "float", "acoustic propagation speed, m/s"),

    _key("covert.epsilon", 0.05, "float", "covertness tolerance epsilon"),

    _key("energy.weight", 150.0, "float", "AUV weight G, N"),
    _key("energy.water_density", 1025.0, "float", "water density, kg/m^3"),
    _key("energy.cross_section", 0.1, "float", "cross-section A, m^2"),
    _key("energy.drag_cd", 0.8, "float", "drag coefficient"),
    _key("energy.detect_coeff", 0.5, "float", "detection energy per unit area, J/m^2"),
    _key("energy.acoustic_efficiency", 0.5, "float", "electro-acoustic efficiency"),
    _key("energy.vertical_mode", "descent", "choice", "vertical energy charge", choices=("descent", "absolute")),

    _key("ocean.num_vortices", 3, "int", "vortices in the current field"),
    _key("ocean.core_radius_min", 20.0, "float", "vortex core radius lower bound, m"),
    _key("ocean.core_radius_max", 40.0, "float", "vortex core radius upper bound, m"),
    _key("ocean.circulation_min", 5.0, "float", "vortex circulation lower bound, m^2/s"),
    _key("ocean.circulation_max", 20.0, "float", "vortex circulation upper bound, m^2/s"),
    _key("ocean.vertical_factor", 0.05, "float", "vertical current factor rho"),
    _key("ocean.viscosity", 1e-3, "float", "kinematic viscosity h, m^2/s"),
    _key("ocean.background", (0.1, 0.05, 0.0), "vector", "uniform background current, m/s"),
    _key("ocean.max_speed", 1.5, "float", "current speed clamp, m/s"),

    _key("task.length", 30.0, "float", "task rectangle length l, m"),
    _key("task.width", 30.0, "float", "task rectangle width w, m"),
    _key("task.instruction_bits", 1e6, "float", "instruction payload D, bits"),
    _key("task.sample_density", 1e3, "float", "sample data per unit area phi, bits/m^2"),
    _key("task.sonar_beam", math.pi / 3, "float", "sonar beam angle theta, rad"),
    _key("task.base_radius", 5.0, "float", "base detection radius r_b, m"),
    _key("task.radius_gain", 10.0, "float", "detection radius gain mu"),
    _key("task.compute_ref", 10.0, "float", "reference computing ability C"),
    _key("task.compute_min", 5.0, "float", "AUV computing ability lower bound C_m"),
    _key("task.compute_max", 5.0, "float", "AUV computing ability upper bound C_m"),
    _key("task.placement_attempts", 200, "int", "candidate draws per sub-target"),
    _key("task.inverted_propagation", False, "bool", "use v_s/d propagation terms as printed"),
    _key("task.upload_timeout", 200.0, "float", "upload delay charged when an AUV never transmits, s"),

    _key("reward.xi1", 10.0, "float", "macro weight on coverage"),
    _key("reward.xi2", -0.01, "float", "macro weight on task time"),
    _key("reward.xi3", 1.0, "float", "macro weight on mean micro reward"),
    _key("reward.phi1", 1.0, "float", "micro weight on covertness"),
    _key("reward.phi2", 1.0, "float", "micro weight on task arrival"),
    _key("reward.phi3", 1.0, "float", "micro weight on target guidance"),
    _key("reward.phi4", -1.0, "float", "micro weight on energy deficit"),
    _key("reward.task_bonus", 100.0, "float", "one-time arrival bonus"),
    _key("reward.progress_gain", 1.5, "float", "guidance gain when approaching"),
    _key("reward.regress_gain", 1.5, "float", "guidance gain when receding"),
    _key("reward.relative_deficit", True, "bool", "energy deficit as a fraction of each AUV's initial energy"),

    _key("train.episodes", 2000, "int", "training episodes", hashed=False),

    _key("ppo.clip", 0.2, "float", "clip epsilon"),
    _key("ppo.gamma", 0.99, "float", "discount"),
    _key("ppo.gae_lambda", 0.95, "float", "GAE lambda"),
    _key("ppo.epochs", 8, "int", "epochs per update"),
    _key("ppo.micro_batch", 512, "int", "AUV minibatch size"),
    _key("ppo.macro_batch", 16, "int", "central AUV minibatch size"),
    _key("ppo.micro_update", 2048, "int", "AUV transitions per update"),
    _key("ppo.macro_update", 32, "int", "central AUV transitions per update"),
    _key("ppo.actor_lr", 3e-5, "float", "actor learning rate"),
    _key("ppo.critic_lr", 5e-5, "float", "critic learning rate"),
    _key("ppo.entropy_coef", 0.01, "float", "entropy bonus"),
    _key("ppo.max_grad_norm", 0.5, "float", "global gradient norm clip"),
    _key("ppo.init_log_std", -0.5, "float", "initial Gaussian log-std"),

    _key("net.actor_hidden", 384, "int", "AUV actor hidden width"),
    _key("net.critic_hidden", 512, "int", "centralized critic hidden width"),
    _key("net.macro_hidden", 256, "int", "central AUV hidden width"),
    _key("net.hidden_layers", 2, "int", "hidden layers per network"),
    _key("net.share_actor", True, "bool", "one actor shared by all AUVs"),
    _key("net.per_agent_critic", False, "bool", "one centralized critic per AUV"),

    _key("run.seed", 0, "int", "master seed", hashed=False),
    _key("run.workers", 1, "int", "rollout worker processes", hashed=False),
    _key("run.output_dir", "runs/default", "str", "output directory", hashed=False),
    _key("run.checkpoint_every", 100, "int", "episodes between checkpoints", hashed=False),
    _key("run.dump_trajectories", False, "bool", "write trajectories.jsonl", hashed=False),

    _key("eval.episodes", 20, "int", "evaluation episodes", hashed=False),
    _key("baseline.random_power", False, "bool", "random_V baseline also draws power uniformly", hashed=False),
)

_KEYS_BY_NAME: Dict[str, ConfigKey] = {k.name: k for k in CONFIG_KEYS}
_LINE_PATTERN = re.compile(r"^\s*([A-Za-z0-9_.]+)\s*=\s*(.*)$")
_TRAILING_COMMENT = re.compile(r"(?:^|\s+)#.*$")
_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _coerce(spec: ConfigKey, raw: Any) -> Any:
    try:
        if spec.kind == "int":
            if isinstance(raw, bool):
                raise ValueError("boolean given")
            if isinstance(raw, str):
                return int(raw.strip())
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError("not an integer")
            return int(raw)
        if spec.kind == "float":
            value = float(raw.strip()) if isinstance(raw, str) else float(raw)
            if not math.isfinite(value):
                raise ValueError("not finite")
            return value
        if spec.kind == "bool":
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in _TRUE:
                return True
            if text in _FALSE:
                return False
            raise ValueError("not a boolean")
        if spec.kind == "vector":
            parts = raw.split(",") if isinstance(raw, str) else list(raw)
            values = tuple(float(p) for p in parts)
            if len(values) != len(spec.default):
                raise ValueError(f"expected {len(spec.default)} components")
            return values
        if spec.kind == "choice":
            text = str(raw.value if hasattr(raw, "value") else raw).strip()
            if text not in spec.choices:
                raise ValueError(f"expected one of {', '.join(spec.choices)}")
            return text
        return str(raw).strip()
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{spec.name}: invalid {spec.kind} value {raw!r} ({e})") from e


def parse_properties(content: str, source: str = "<string>") -> Dict[str, str]:
    pairs = {}
    for number, line in enumerate(content.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        match = _LINE_PATTERN.match(stripped)
        if not match:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {stripped!r}")
        key, value = match.groups()
        # a comment starts the value or follows whitespace
        value = _TRAILING_COMMENT.sub("", value).strip()
        pairs[key.strip()] = value
    return pairs


class ExperimentConfig:
    def __init__(self, values: Optional[Mapping[str, Any]] = None):
        self.logger = logging.getLogger(__name__)
        self._values: Dict[str, Any] = {k.name: k.default for k in CONFIG_KEYS}
        self._channel_params: Optional[ChannelParams] = None
        self._energy_params: Optional[EnergyParams] = None
        if values:
            for name, raw in values.items():
                self._set(name, raw)
        self._validate()

    def _set(self, name: str, raw: Any):
        spec = _KEYS_BY_NAME.get(name)
        if spec is None:
            raise ConfigError(f"unknown configuration key '{name}'")
        self._values[name] = _coerce(spec, raw)

    def _validate(self):
        v = self._values

        def require(condition: bool, key: str, message: str):
            if not condition:
                raise ConfigError(f"{key}: {message} (got {v[key]!r})")

        for key in ("arena.length", "arena.width", "arena.depth", "env.slot_dt", "env.max_speed",
                    "env.max_delta_v", "channel.bandwidth", "channel.carrier_f", "channel.noise_override",
                    "channel.min_distance", "channel.sound_speed", "task.length", "task.width",
                    "task.compute_ref", "task.upload_timeout", "ocean.core_radius_min"):
            require(v[key] > 0, key, "must be > 0")
        for key in ("env.num_auvs", "env.macro_steps", "env.micro_steps", "task.placement_attempts",
                    "train.episodes", "ppo.epochs", "ppo.micro_batch", "ppo.macro_batch", "ppo.micro_update",
                    "ppo.macro_update", "net.actor_hidden", "net.critic_hidden", "net.macro_hidden",
                    "net.hidden_layers", "run.workers", "run.checkpoint_every", "eval.episodes"):
            require(v[key] >= 1, key, "must be >= 1")
        require(v["ocean.num_vortices"] >= 0, "ocean.num_vortices", "must be >= 0")
        require(0.0 < v["covert.epsilon"] <= 1.0, "covert.epsilon", "must lie in (0, 1]")
        require(0.0 <= v["env.power_min"] <= v["env.power_max"], "env.power_min", "must satisfy 0 <= P_min <= P_max")
        require(v["env.cauv_power"] > 0.0, "env.cauv_power", "must be > 0")
        require(0.0 < v["env.energy_init_min"] <= v["env.energy_init_max"], "env.energy_init_min",
                "must satisfy 0 < E_min <= E_max")
        require(v["env.task_depth_min"] <= v["env.task_depth_max"] <= 0.0, "env.task_depth_min",
                "must satisfy task_depth_min <= task_depth_max <= 0")
        require(v["env.task_depth_min"] >= -v["arena.depth"], "env.task_depth_min", "must lie inside the arena")
        require(v["task.length"] <= v["arena.length"] and v["task.width"] <= v["arena.width"], "task.length",
                "task rectangle must fit in the arena")
        require(0.0 <= v["task.compute_min"] <= v["task.compute_max"], "task.compute_min",
                "must satisfy 0 <= compute_min <= compute_max")
        require(0.0 < v["task.sonar_beam"] < 2.0 * math.pi, "task.sonar_beam", "must lie in (0, 2 pi)")
        require(v["ocean.core_radius_min"] <= v["ocean.core_radius_max"], "ocean.core_radius_min", "must be <= max")
        require(v["ocean.circulation_min"] <= v["ocean.circulation_max"], "ocean.circulation_min", "must be <= max")
        require(0.0 < v["ppo.clip"] < 1.0, "ppo.clip", "must lie in (0, 1)")
        require(0.0 < v["ppo.gamma"] <= 1.0, "ppo.gamma", "must lie in (0, 1]")
        require(0.0 < v["ppo.gae_lambda"] <= 1.0, "ppo.gae_lambda", "must lie in (0, 1]")
        require(v["ppo.actor_lr"] > 0 and v["ppo.critic_lr"] > 0, "ppo.actor_lr", "learning rates must be > 0")
        require(v["reward.phi4"] <= 0.0, "reward.phi4", "energy deficit weight must be <= 0")
        try:
            self.channel_params()
            self.energy_params()
            self.motion_limits()
        except SimulationError as e:
            raise ConfigError(str(e)) from e

    def __getitem__(self, name: str) -> Any:
        if name not in self._values:
            raise ConfigError(f"unknown configuration key '{name}'")
        return self._values[name]

    def as_dict(self) -> Dict[str, Any]:
        return dict(self._values)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ExperimentConfig":
        merged = self.as_dict()
        merged.update(overrides)
        return ExperimentConfig(merged)

    def __eq__(self, other) -> bool:
        return isinstance(other, ExperimentConfig) and self._values == other._values

    def __repr__(self) -> str:
        changed = {k: v for k, v in self._values.items() if v != _KEYS_BY_NAME[k].default}
        return f"ExperimentConfig({changed})"

    # --- views ---

    @property
    def num_auvs(self) -> int:
        return self._values["env.num_auvs"]

    @property
    def covert_limit(self) -> float:
        return 2.0 * self._values["covert.epsilon"] ** 2

    @property
    def arena_lower(self) -> Tuple[float, float, float]:
        return (0.0, 0.0, -self._values["arena.depth"])

    @property
    def arena_upper(self) -> Tuple[float, float, float]:
        return (self._values["arena.length"], self._values["arena.width"], 0.0)

    def channel_params(self) -> ChannelParams:
        if self._channel_params is None:
            v = self._values
            self._channel_params = ChannelParams(
                carrier_f=v["channel.carrier_f"],
                bandwidth=v["channel.bandwidth"],
                spreading_chi=v["channel.spreading_chi"],
                shipping_s=v["channel.shipping_s"],
                wind_w=v["channel.wind_w"],
                noise_override=v["channel.noise_override"] if v["channel.use_noise_override"] else None,
                thorp_variant=ThorpVariant(v["channel.thorp_variant"]),
                min_distance=v["channel.min_distance"],
            )
        return self._channel_params

    def energy_params(self) -> EnergyParams:
        if self._energy_params is None:
            v = self._values
            self._energy_params = EnergyParams(
                weight=v["energy.weight"],
                water_density=v["energy.water_density"],
                cross_section=v["energy.cross_section"],
                drag_cd=v["energy.drag_cd"],
                detect_coeff=v["energy.detect_coeff"],
                acoustic_efficiency=v["energy.acoustic_efficiency"],
                slot_dt=v["env.slot_dt"],
                vertical_mode=v["energy.vertical_mode"],
            )
        return self._energy_params

    def motion_limits(self) -> MotionLimits:
        v = self._values
        return MotionLimits(power_min=v["env.power_min"], power_max=v["env.power_max"],
                            max_speed=v["env.max_speed"], max_delta_v=v["env.max_delta_v"])

    def reward_weights(self) -> RewardWeights:
        v = self._values
        return RewardWeights(
            xi=(v["reward.xi1"], v["reward.xi2"], v["reward.xi3"]),
            phi=(v["reward.phi1"], v["reward.phi2"], v["reward.phi3"], v["reward.phi4"]),
            task_bonus=v["reward.task_bonus"],
            progress_gain=v["reward.progress_gain"],
            regress_gain=v["reward.regress_gain"],
            relative_deficit=v["reward.relative_deficit"],
        )

    def ppo_config(self, level: str) -> PpoConfig:
        v = self._values
        if level not in ("micro", "macro"):
            raise ConfigError(f"ppo level must be 'micro' or 'macro', got {level!r}")
        return PpoConfig(
            clip=v["ppo.clip"],
            gamma=v["ppo.gamma"],
            gae_lambda=v["ppo.gae_lambda"],
            epochs=v["ppo.epochs"],
            minibatch=v[f"ppo.{level}_batch"],
            update_size=v[f"ppo.{level}_update"],
            actor_lr=v["ppo.actor_lr"],
            critic_lr=v["ppo.critic_lr"],
            entropy_coef=v["ppo.entropy_coef"],
            max_grad_norm=v["ppo.max_grad_norm"],
        )

    # --- persistence ---

    def to_properties(self, keys: Optional[Iterable[ConfigKey]] = None) -> str:
        lines = []
        for spec in (CONFIG_KEYS if keys is None else keys):
            lines.append(f"{spec.name} = {format_value(self._values[spec.name])}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        shaping = [k for k in CONFIG_KEYS if k.hashed]
        return hashlib.sha256(self.to_properties(shaping).encode("utf-8")).hexdigest()

    def write_resolved(self, output_dir: str) -> str:
        os.makedirs(output_dir, exist_ok=True)
        path = os.path.join(output_dir, RESOLVED_CONFIG_FILENAME)
        header = "# resolved configuration\n"
        with open(path, "w", encoding="utf-8") as f:
            f.write(header + self.to_properties())
        self.logger.info(f"Resolved configuration written to {path}")
        return path


def parse_override(text: str) -> Tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def load_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Resolve defaults, then the properties file at `path`, then `overrides`."""
    logger = logging.getLogger(__name__)
    values: Dict[str, Any] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                content = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read configuration file {path}: {e}") from e
        values.update(parse_properties(content, source=path))
        logger.info(f"Loaded {len(values)} configuration values from {path}")
    if overrides:
        values.update(overrides)
    return ExperimentConfig(values)


def overrides_from_args(pairs: List[str]) -> Dict[str, str]:
    return dict(parse_override(p) for p in pairs or [])
