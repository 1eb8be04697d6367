# rl/networks.py

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from data_model import ShapeError


def orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class DenseNet:
    """Fully connected net: tanh hidden layers, linear output.

    Weights are stored as (in, out) matrices so a batch of row vectors is
    propagated with `x @ W + b`.
    """

    def __init__(self, sizes: Sequence[int], rng: Optional[np.random.Generator] = None,
                 output_gain: float = 1.0, hidden_gain: float = math.sqrt(2.0)):
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise ShapeError(f"layer sizes must be >= 1 with at least two layers, got {list(sizes)}")
        self.sizes = [int(s) for s in sizes]
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        last = len(self.sizes) - 2
        for i, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            if rng is None:
                w = np.zeros((n_in, n_out))
            else:
                w = orthogonal(rng, n_in, n_out, output_gain if i == last else hidden_gain)
            self.weights.append(w)
            self.biases.append(np.zeros(n_out))

    @property
    def input_size(self) -> int:
        return self.sizes[0]

    @property
    def output_size(self) -> int:
        return self.sizes[-1]

    @property
    def params(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    @property
    def parameter_count(self) -> int:
        return sum(n_in * n_out + n_out for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]))

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_size:
            raise ShapeError(f"network expects {self.input_size} input features, got {x.shape[-1]}")
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self._check_input(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
        return h

    def forward_with_cache(self, x: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
        h = np.atleast_2d(self._check_input(x))
        activations = [h]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            activations.append(h)
        return h, activations

    def backward(self, activations: List[np.ndarray], grad_out: np.ndarray) -> List[np.ndarray]:
        """Gradients of a scalar loss w.r.t. `params`, given dLoss/dOutput."""
        delta = np.atleast_2d(np.asarray(grad_out, dtype=float))
        grads: List[np.ndarray] = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = activations[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                # activations[i] is tanh output of layer i-1
                delta = (delta @ self.weights[i].T) * (1.0 - activations[i] ** 2)
        return grads


class FeatureScaler:
    def __init__(self, scales: Sequence[float]):
        scales = np.asarray(scales, dtype=float)
        if np.any(scales <= 0):
            raise ShapeError("feature scales must be > 0")
        self.scales = scales

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != len(self.scales):
            raise ShapeError(f"scaler expects {len(self.scales)} features, got {x.shape[-1]}")
        return x / self.scales
