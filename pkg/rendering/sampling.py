from typing import NamedTuple

import numpy as np

from .errors import InvalidBounds


class SampleSet(NamedTuple):
    t: np.ndarray
    delta: np.ndarray


def _check(near: float, far: float, n: int) -> None:
    if not 0.0 <= near < far or n < 1:
        raise InvalidBounds(f"need 0 <= near < far and N >= 1, got near={near}, far={far}, N={n}")


def spacing(t: np.ndarray, far: float) -> np.ndarray:
    """δ_i = t_{i+1} - t_i, with the last interval running to `far`."""
    return np.diff(t, axis=-1, append=np.full(t.shape[:-1] + (1,), far))


def sample_along_ray(ray, near: float, far: float, n: int, rng: np.random.Generator) -> SampleSet:
    """Stratified depths: one uniform draw in each of N equal bins of [near, far)."""
    _check(near, far, n)
    width = (far - near) / n
    t = near + (np.arange(n) + rng.random(n)) * width
    return SampleSet(t, spacing(t, far))


def sample_many(count: int, near: float, far: float, n: int, rng: np.random.Generator) -> SampleSet:
    """(count, N) stratified depths, the batch form of sample_along_ray."""
    _check(near, far, n)
    width = (far - near) / n
    t = near + (np.arange(n)[None, :] + rng.random((count, n))) * width
    return SampleSet(t, spacing(t, far))
