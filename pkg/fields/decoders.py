import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from diffengine import ops

from .errors import InvalidWidth

HIDDEN_ACTIVATIONS = ("softplus", "relu")
OUTPUT_ACTIVATIONS = ("none", "sigmoid")


def _scaled(a: ops.Scalar, b: ops.Scalar) -> ops.Scalar:
    if not isinstance(a, ops.Var) and a == 0.0:
        return 0.0
    return a * b


class MlpDecoder:
    """Fully connected decoder. Weight k has shape (widths[k+1], widths[k])."""

    def __init__(self, name: str, widths: Sequence[int], weights: Sequence[np.ndarray],
                 biases: Sequence[np.ndarray], hidden_activation: str = "softplus",
                 output_activation: str = "none", sharpness: float = 100.0):
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise InvalidWidth(f"decoder {name} has invalid widths {list(widths)}")
        if hidden_activation not in HIDDEN_ACTIVATIONS or output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown activation for decoder {name}")
        if len(weights) != len(widths) - 1 or len(biases) != len(widths) - 1:
            raise InvalidWidth(f"decoder {name} needs {len(widths) - 1} layers")
        for k, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (widths[k + 1], widths[k]) or b.shape != (widths[k + 1],):
                raise InvalidWidth(
                    f"decoder {name} layer {k}: expected {(widths[k + 1], widths[k])}, got {w.shape}/{b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidWidth(f"decoder {name} layer {k} has non-finite weights")
        self.name = name
        self.widths = list(widths)
        self.weights = list(weights)
        self.biases = list(biases)
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.sharpness = sharpness

    @classmethod
    def initialize(cls, name: str, widths: Sequence[int], rng: np.random.Generator,
                   zero_output: bool = False, **kwargs) -> "MlpDecoder":
        """Uniform fan-in init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        if zero_output:
            weights[-1][:] = 0.0
            biases[-1][:] = 0.0
        return cls(name, widths, weights, biases, **kwargs)

    @property
    def layer_count(self) -> int:
        return len(self.weights)

    def weight_name(self, k: int) -> str:
        return f"{self.name}.weight.{k}"

    def bias_name(self, k: int) -> str:
        return f"{self.name}.bias.{k}"

    def parameters(self) -> Dict[str, np.ndarray]:
        out = {}
        for k in range(self.layer_count):
            out[self.weight_name(k)] = self.weights[k]
            out[self.bias_name(k)] = self.biases[k]
        return out

    def _check_input(self, width: int) -> None:
        if width != self.widths[0]:
            raise InvalidWidth(f"decoder {self.name} takes {self.widths[0]} inputs, got {width}")

    def forward(self, bound, inputs: Sequence[ops.Scalar], jets: Optional[Tuple[Sequence[ops.Scalar], ...]] = None):
        """Scalar pass through `bound` parameters; returns (outputs, d output[0] / dx jets or None)."""
        self._check_input(len(inputs))
        h = list(inputs)
        hj = [list(j) for j in jets] if jets is not None else None
        for k in range(self.layer_count):
            w_rows = bound.matrix(self.weight_name(k), self.weights[k])
            bias = bound.vector(self.bias_name(k), self.biases[k])
            last = k == self.layer_count - 1
            pre = [ops.dot(w_rows[r], h) + bias[r] for r in range(len(w_rows))]
            if hj is not None:
                rows = [0] if last else range(len(w_rows))
                pre_j = [[ops.dot(w_rows[r], hj[d]) for r in rows] for d in range(len(hj))]
            if last:
                if self.output_activation == "sigmoid":
                    pre = [ops.sigmoid(p) for p in pre]
                out_j = tuple(pj[0] for pj in pre_j) if hj is not None else None
                return pre, out_j
            if self.hidden_activation == "softplus":
                h = [ops.softplus(p, self.sharpness) for p in pre]
                if hj is not None:
                    slope = [ops.sigmoid(p * self.sharpness) for p in pre]
                    hj = [[_scaled(pj[r], slope[r]) for r in range(len(pre))] for pj in pre_j]
            else:
                h = [ops.relu(p) for p in pre]
                if hj is not None:
                    slope = [1.0 if ops.value(p) > 0.0 else 0.0 for p in pre]
                    hj = [[_scaled(pj[r], slope[r]) for r in range(len(pre))] for pj in pre_j]
        raise InvalidWidth(f"decoder {self.name} has no layers")

    def _hidden(self, pre: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self.hidden_activation == "softplus":
            k = self.sharpness
            return np.logaddexp(0.0, k * pre) / k, expit(k * pre)
        return np.maximum(pre, 0.0), (pre > 0.0).astype(np.float64)

    def forward_batch(self, inputs: np.ndarray, jets: Optional[np.ndarray] = None):
        """(N, in) inputs and optional (N, 3, in) jets -> (N, out) outputs and (N, 3) jets of output 0."""
        self._check_input(inputs.shape[1])
        h, hj = inputs, jets
        for k in range(self.layer_count):
            pre = h @ self.weights[k].T + self.biases[k]
            if hj is not None:
                hj = hj @ self.weights[k].T
            if k == self.layer_count - 1:
                out = expit(pre) if self.output_activation == "sigmoid" else pre
                return out, (hj[:, :, 0] if hj is not None else None)
            h, slope = self._hidden(pre)
            if hj is not None:
                hj = hj * slope[:, None, :]
        raise InvalidWidth(f"decoder {self.name} has no layers")

    def regression_gradients(self, inputs: np.ndarray, grad_out: np.ndarray) -> Dict[str, np.ndarray]:
        """Backpropagate d loss / d output through the batch path; used by the sphere pre-fit."""
        self._check_input(inputs.shape[1])
        cache: List[Tuple[np.ndarray, np.ndarray]] = []
        h = inputs
        for k in range(self.layer_count):
            pre = h @ self.weights[k].T + self.biases[k]
            cache.append((h, pre))
            if k < self.layer_count - 1:
                h, _ = self._hidden(pre)
        grads = {}
        g = grad_out
        for k in range(self.layer_count - 1, -1, -1):
            h_in, pre = cache[k]
            if k == self.layer_count - 1:
                if self.output_activation == "sigmoid":
                    s = expit(pre)
                    g = g * s * (1.0 - s)
            else:
                g = g * self._hidden(pre)[1]
            grads[self.weight_name(k)] = g.T @ h_in
            grads[self.bias_name(k)] = g.sum(axis=0)
            g = g @ self.weights[k]
        return grads
