# rl/checkpoint.py

import logging
import os
from typing import Optional

import numpy as np

from app_config import ExperimentConfig
from data_model import ExperimentError, IncompatibleCheckpointError, ShapeError

FORMAT_VERSION = 1

logger = logging.getLogger(__name__)


def save_checkpoint(path: str, macro, micro, config: ExperimentConfig, episode: int) -> str:
    if not path.endswith(".npz"):
        path = path + ".npz"
    arrays = {f"macro.{k}": v for k, v in macro.parameter_arrays().items()}
    arrays.update({f"micro.{k}": v for k, v in micro.parameter_arrays().items()})
    arrays["format_version"] = np.array(FORMAT_VERSION)
    arrays["config_hash"] = np.array(config.config_hash())
    arrays["episode"] = np.array(episode)
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        np.savez(path, **arrays)
    except OSError as e:
        logger.error(f"Could not write checkpoint {path}: {e}", exc_info=True)
        raise ExperimentError(f"cannot write checkpoint {path}: {e}") from e
    logger.info(f"Checkpoint written to {path} (episode {episode})")
    return path


def load_checkpoint(path: str, macro, micro, config: Optional[ExperimentConfig] = None) -> int:
    """Restore parameters and optimizer state in place; returns the stored episode."""
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError) as e:
        raise IncompatibleCheckpointError(f"cannot read checkpoint {path}: {e}") from e

    version = int(arrays.get("format_version", -1))
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpointError(f"{path}: checkpoint format {version}, expected {FORMAT_VERSION}")
    if config is not None:
        stored = str(arrays["config_hash"])
        if stored != config.config_hash():
            raise IncompatibleCheckpointError(
                f"{path}: checkpoint was trained with a different configuration (hash {stored[:12]} "
                f"vs {config.config_hash()[:12]})")
    try:
        macro.load_parameter_arrays({k[6:]: v for k, v in arrays.items() if k.startswith("macro.")})
        micro.load_parameter_arrays({k[6:]: v for k, v in arrays.items() if k.startswith("micro.")})
    except (KeyError, ShapeError) as e:
        raise IncompatibleCheckpointError(f"{path}: parameter arrays do not fit the networks ({e})") from e
    episode = int(arrays["episode"])
    logger.info(f"Loaded checkpoint {path} (episode {episode})")
    return episode
