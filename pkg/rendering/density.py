import math
from typing import Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from diffengine import ops

from .errors import InvalidBeta

BETA_FLOOR = 1e-4


class BetaParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    c0: float = Field(1.208e-2, gt=0)
    c1: float = Field(6.26471e-6, gt=0)
    c2: float = Field(2.3e-3, gt=0)


def sdf_to_density(s: ops.Scalar, beta: ops.Scalar) -> ops.Scalar:
    """Laplace-CDF density, dense where s > 0."""
    if ops.value(beta) <= 0.0:
        raise InvalidBeta(f"beta must be positive, got {ops.value(beta)}")
    inv_beta = ops.reciprocal(beta)
    if ops.value(s) <= 0.0:
        return 0.5 * inv_beta * ops.exp(s * inv_beta)
    return inv_beta * (1.0 - 0.5 * ops.exp(-(s * inv_beta)))


def density_batch(s: np.ndarray, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=np.float64)
    if np.any(beta <= 0.0):
        raise InvalidBeta("beta must be positive")
    scaled = s / beta
    return np.where(s <= 0.0, 0.5 * np.exp(np.minimum(scaled, 0.0)),
                    1.0 - 0.5 * np.exp(-np.maximum(scaled, 0.0))) / beta


class VoxelCounter:
    """Cumulative per-voxel sample counts over the scene cube."""

    def __init__(self, resolution: int = 64, counts: Optional[np.ndarray] = None,
                 domain: Sequence[float] = (-1.0, 1.0)):
        self.resolution = resolution
        self.domain = (float(domain[0]), float(domain[1]))
        shape = (resolution,) * 3
        self.counts = np.zeros(shape, dtype=np.uint64) if counts is None else counts.astype(np.uint64)
        if self.counts.shape != shape:
            raise ValueError(f"counts must have shape {shape}, got {self.counts.shape}")

    def voxel_index(self, points: np.ndarray) -> np.ndarray:
        """(N, 3) indices; a point on a boundary belongs to the voxel starting there."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        scaled = (points - self.domain[0]) / (self.domain[1] - self.domain[0]) * self.resolution
        return np.clip(np.floor(scaled).astype(np.int64), 0, self.resolution - 1)

    def lookup(self, points: np.ndarray) -> np.ndarray:
        idx = self.voxel_index(points)
        return self.counts[idx[:, 0], idx[:, 1], idx[:, 2]]

    def record(self, points: np.ndarray) -> None:
        idx = self.voxel_index(points)
        if len(idx):
            np.add.at(self.counts, (idx[:, 0], idx[:, 1], idx[:, 2]), np.uint64(1))

    def total(self) -> int:
        return int(self.counts.sum())

    def copy(self) -> "VoxelCounter":
        return VoxelCounter(self.resolution, self.counts.copy(), self.domain)


def beta_from_count(count, params: BetaParams):
    return params.c0 * np.exp(-params.c1 * np.asarray(count, dtype=np.float64)) + params.c2


def local_beta(counter: VoxelCounter, x: Sequence[float], params: BetaParams) -> float:
    count = float(counter.lookup(np.asarray([ops.value(c) for c in x]))[0])
    return params.c0 * math.exp(-params.c1 * count) + params.c2


def record_samples(counter: VoxelCounter, samples: Iterable[Sequence[float]]) -> None:
    points = np.asarray([[ops.value(c) for c in p] for p in samples], dtype=np.float64)
    if points.size:
        counter.record(points)


class BetaSchedule:
    """Where β comes from: voxel counts (adaptive), a constant (fixed) or one learned value (global)."""

    def __init__(self, mode: str = "adaptive", params: Optional[BetaParams] = None,
                 counter: Optional[VoxelCounter] = None, fixed_beta: float = 1e-2):
        if mode not in ("adaptive", "fixed", "global"):
            raise ValueError(f"unknown beta mode {mode!r}")
        if mode == "adaptive" and counter is None:
            raise ValueError("adaptive beta needs a voxel counter")
        self.mode = mode
        self.params = params or BetaParams()
        self.counter = counter
        self.fixed_beta = fixed_beta

    @classmethod
    def from_config(cls, rendering, counter: Optional[VoxelCounter]) -> "BetaSchedule":
        params = BetaParams(c0=rendering.beta_c0, c1=rendering.beta_c1, c2=rendering.beta_c2)
        return cls(rendering.beta_mode, params, counter, rendering.fixed_beta)

    def at(self, point: Sequence[ops.Scalar], bound) -> ops.Scalar:
        """β for one sample; only the global mode carries a gradient."""
        if self.mode == "adaptive":
            return local_beta(self.counter, point, self.params)
        if self.mode == "global":
            beta = bound.beta()
            if beta is not None:
                return ops.clamp(beta, BETA_FLOOR, 1.0)
        return self.fixed_beta

    def batch(self, points: np.ndarray, field) -> np.ndarray:
        if self.mode == "adaptive":
            return beta_from_count(self.counter.lookup(points), self.params)
        value = self.fixed_beta
        if self.mode == "global" and getattr(field, "beta", None) is not None:
            value = min(max(float(field.beta[0]), BETA_FLOOR), 1.0)
        return np.full(len(points), value)
