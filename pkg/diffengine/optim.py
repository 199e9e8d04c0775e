from typing import Dict, Hashable, Mapping

import numpy as np


class Adam:
    """Adaptive-moment descent over named numpy arrays.

    Sparse steps only touch the entries that received a gradient; bias correction
    uses the per-array step count.
    """

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.first: Dict[Hashable, np.ndarray] = {}
        self.second: Dict[Hashable, np.ndarray] = {}
        self.steps: Dict[Hashable, int] = {}

    def _state(self, key: Hashable, shape):
        if key not in self.first:
            self.first[key] = np.zeros(shape)
            self.second[key] = np.zeros(shape)
            self.steps[key] = 0
        self.steps[key] += 1
        return self.first[key], self.second[key], self.steps[key]

    def step(self, key: Hashable, param: np.ndarray, grad: np.ndarray, lr: float) -> None:
        """Dense in-place update of `param`."""
        m, v, t = self._state(key, param.shape)
        m *= self.beta1
        m += (1.0 - self.beta1) * grad
        v *= self.beta2
        v += (1.0 - self.beta2) * grad * grad
        m_hat = m / (1.0 - self.beta1 ** t)
        v_hat = v / (1.0 - self.beta2 ** t)
        param -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def step_sparse(self, key: Hashable, param: np.ndarray, grads: Mapping[int, float], lr: float) -> None:
        """In-place update of the flat entries named in `grads`."""
        if not grads:
            return
        index = np.fromiter(sorted(grads), dtype=np.int64, count=len(grads))
        g = np.array([grads[i] for i in index.tolist()])
        m, v, t = self._state(key, param.size)
        m[index] = self.beta1 * m[index] + (1.0 - self.beta1) * g
        v[index] = self.beta2 * v[index] + (1.0 - self.beta2) * g * g
        m_hat = m[index] / (1.0 - self.beta1 ** t)
        v_hat = v[index] / (1.0 - self.beta2 ** t)
        flat = param.reshape(-1)
        flat[index] -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def snapshot(self):
        return ({k: a.copy() for k, a in self.first.items()},
                {k: a.copy() for k, a in self.second.items()},
                dict(self.steps))

    def restore(self, state) -> None:
        first, second, steps = state
        self.first = {k: a.copy() for k, a in first.items()}
        self.second = {k: a.copy() for k, a in second.items()}
        self.steps = dict(steps)
