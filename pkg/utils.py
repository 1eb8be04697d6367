# utils.py

from typing import Any, Iterable, Sequence, Tuple

import numpy as np


def project_to_ball(vector: np.ndarray, radius: float, center: np.ndarray = None) -> Tuple[np.ndarray, bool]:
    vector = np.asarray(vector, dtype=float)
    origin = np.zeros_like(vector) if center is None else np.asarray(center, dtype=float)
    offset = vector - origin
    norm = float(np.linalg.norm(offset))
    if norm <= radius:
        return vector.copy(), False
    return origin + offset * (radius / norm), True


def clamp_to_box(point: np.ndarray, lower: Sequence[float], upper: Sequence[float]) -> np.ndarray:
    return np.minimum(np.maximum(np.asarray(point, dtype=float), np.asarray(lower, dtype=float)), np.asarray(upper, dtype=float))


def distance(a: Iterable[float], b: Iterable[float]) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def derive_seed(seed: int, *stream: int) -> int:
    sequence = np.random.SeedSequence([int(seed), *[int(s) for s in stream]])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def sample_in_ball(rng: np.random.Generator, radius: float, dim: int = 3) -> np.ndarray:
    direction = rng.standard_normal(dim)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        return np.zeros(dim)
    return direction / norm * radius * rng.uniform() ** (1.0 / dim)


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(format_value(float(v)) for v in value)
    return str(value)
