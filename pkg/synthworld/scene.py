"""Analytic scenes: primitives, union, procedural texture and sphere tracing.

Primitives report the free-space-positive distance (positive outside matter);
`AnalyticScene.sdf` flips it into the model's inside-positive convention.
"""
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from diffengine import ops

from .errors import InvalidScene


class Sphere(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["sphere"] = "sphere"
    center: Tuple[float, float, float]
    radius: float = Field(gt=0)

    def distance(self, x: Sequence[ops.Scalar]) -> ops.Scalar:
        return ops.norm([x[i] - self.center[i] for i in range(3)]) - self.radius

    def distance_batch(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points - np.asarray(self.center), axis=1) - self.radius

    def gradient_batch(self, points: np.ndarray) -> np.ndarray:
        offset = points - np.asarray(self.center)
        length = np.linalg.norm(offset, axis=1, keepdims=True)
        return offset / np.where(length > 0.0, length, 1.0)


class Box(BaseModel):
    """Solid axis-aligned box."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["box"] = "box"
    center: Tuple[float, float, float]
    half_extents: Tuple[float, float, float]

    def distance(self, x: Sequence[ops.Scalar]) -> ops.Scalar:
        q = [ops.absolute(x[i] - self.center[i]) - self.half_extents[i] for i in range(3)]
        outside = [c for c in q if ops.value(c) > 0.0]
        if outside:
            return ops.norm(outside)
        return ops.maximum(ops.maximum(q[0], q[1]), q[2])

    def distance_batch(self, points: np.ndarray) -> np.ndarray:
        q = np.abs(points - np.asarray(self.center)) - np.asarray(self.half_extents)
        return np.linalg.norm(np.maximum(q, 0.0), axis=1) + np.minimum(q.max(axis=1), 0.0)

    def gradient_batch(self, points: np.ndarray) -> np.ndarray:
        offset = points - np.asarray(self.center)
        sign = np.where(offset >= 0.0, 1.0, -1.0)
        q = np.abs(offset) - np.asarray(self.half_extents)
        positive = np.maximum(q, 0.0)
        length = np.linalg.norm(positive, axis=1, keepdims=True)
        outside = sign * positive / np.where(length > 0.0, length, 1.0)
        inside = np.zeros_like(points)
        axis = np.argmax(q, axis=1)
        inside[np.arange(len(points)), axis] = sign[np.arange(len(points)), axis]
        return np.where(length > 0.0, outside, inside)


class Room(BaseModel):
    """Hollow box: free space inside, matter outside."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["room"] = "room"
    center: Tuple[float, float, float]
    half_extents: Tuple[float, float, float]

    def _box(self) -> Box:
        return Box(center=self.center, half_extents=self.half_extents)

    def distance(self, x: Sequence[ops.Scalar]) -> ops.Scalar:
        return -self._box().distance(x)

    def distance_batch(self, points: np.ndarray) -> np.ndarray:
        return -self._box().distance_batch(points)

    def gradient_batch(self, points: np.ndarray) -> np.ndarray:
        return -self._box().gradient_batch(points)


Primitive = Union[Sphere, Box, Room]


class ValueNoiseTexture:
    """Seeded 3-octave value noise mapped to RGB in [0.1, 0.9]."""

    def __init__(self, seed: int = 7, base_frequency: float = 4.0, octaves: int = 3):
        rng = np.random.default_rng(seed)
        self.perm = rng.permutation(256)
        self.lattice = rng.random((256, 3))
        self.base_frequency = base_frequency
        self.octaves = octaves

    def _hash(self, i: np.ndarray, j: np.ndarray, k: np.ndarray) -> np.ndarray:
        return self.perm[(self.perm[(self.perm[i % 256] + j) % 256] + k) % 256]

    def _octave(self, points: np.ndarray) -> np.ndarray:
        cell = np.floor(points).astype(np.int64)
        frac = points - cell
        smooth = frac * frac * (3.0 - 2.0 * frac)
        out = np.zeros((len(points), 3))
        for dx in (0, 1):
            wx = smooth[:, 0] if dx else 1.0 - smooth[:, 0]
            for dy in (0, 1):
                wy = smooth[:, 1] if dy else 1.0 - smooth[:, 1]
                for dz in (0, 1):
                    wz = smooth[:, 2] if dz else 1.0 - smooth[:, 2]
                    corner = self._hash(cell[:, 0] + dx, cell[:, 1] + dy, cell[:, 2] + dz)
                    out += (wx * wy * wz)[:, None] * self.lattice[corner]
        return out

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        total = np.zeros((len(points), 3))
        norm = 0.0
        for octave in range(self.octaves):
            amplitude = 0.5 ** octave
            total += amplitude * self._octave(points * self.base_frequency * 2 ** octave + 17.0 * octave)
            norm += amplitude
        return 0.1 + 0.8 * total / norm


class AnalyticScene:
    def __init__(self, primitives: Sequence[Primitive], texture_seed: int = 7,
                 sign_convention: str = "inside-positive"):
        if not primitives:
            raise InvalidScene("scene needs at least one primitive")
        self.primitives: List[Primitive] = list(primitives)
        self.texture = ValueNoiseTexture(texture_seed)
        self.sign_convention = sign_convention

    def distance(self, x: Sequence[ops.Scalar]) -> ops.Scalar:
        """Union of matter: minimum free-space distance."""
        best = self.primitives[0].distance(x)
        for primitive in self.primitives[1:]:
            best = ops.minimum(best, primitive.distance(x))
        return best

    def sdf(self, x: Sequence[ops.Scalar]) -> ops.Scalar:
        d = self.distance(x)
        return -d if self.sign_convention == "inside-positive" else d

    def distance_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return np.min(np.stack([p.distance_batch(points) for p in self.primitives]), axis=0)

    def sdf_batch(self, points: np.ndarray) -> np.ndarray:
        d = self.distance_batch(points)
        return -d if self.sign_convention == "inside-positive" else d

    def distance_gradient_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        distances = np.stack([p.distance_batch(points) for p in self.primitives])
        owner = np.argmin(distances, axis=0)
        grads = np.stack([p.gradient_batch(points) for p in self.primitives])
        return grads[owner, np.arange(len(points))]

    def sdf_gradient_batch(self, points: np.ndarray) -> np.ndarray:
        g = self.distance_gradient_batch(points)
        return -g if self.sign_convention == "inside-positive" else g

    def color_batch(self, points: np.ndarray) -> np.ndarray:
        return self.texture(points)


def scene_sdf(scene: AnalyticScene, x: Sequence[ops.Scalar]) -> ops.Scalar:
    return scene.sdf(x)


def sphere_trace(scene: AnalyticScene, origin: Sequence[float], direction: Sequence[float],
                 t_max: float, max_steps: int = 512) -> Optional[float]:
    """First surface hit along the ray, or None."""
    hits = sphere_trace_batch(scene, np.asarray([origin], dtype=np.float64),
                              np.asarray([direction], dtype=np.float64), t_max, max_steps)
    return None if np.isnan(hits[0]) else float(hits[0])


def sphere_trace_batch(scene: AnalyticScene, origins: np.ndarray, directions: np.ndarray,
                       t_max: float, max_steps: int = 512, tolerance: float = 1e-5) -> np.ndarray:
    """Hit distance per ray, NaN for a miss. Steps by |distance| so rays starting inside matter also converge."""
    t = np.zeros(len(origins))
    active = np.ones(len(origins), dtype=bool)
    hit = np.zeros(len(origins), dtype=bool)
    for _ in range(max_steps):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        d = scene.distance_batch(origins[idx] + directions[idx] * t[idx, None])
        converged = np.abs(d) < tolerance
        hit[idx[converged]] = True
        active[idx[converged]] = False
        moving = idx[~converged]
        t[moving] += np.abs(d[~converged])
        active[moving[t[moving] > t_max]] = False
    return np.where(hit, t, np.nan)


def desk_scene(room_half_extent: float = 0.8, texture_seed: int = 7,
               sign_convention: str = "inside-positive") -> AnalyticScene:
    """Room interior with one sphere and one box in front of the origin."""
    h = room_half_extent
    return AnalyticScene(
        [
            Room(center=(0.0, 0.0, 0.0), half_extents=(h, h, h)),
            Sphere(center=(-0.15, 0.05, 0.45), radius=0.18),
            Box(center=(0.2, 0.1, 0.5), half_extents=(0.1, 0.15, 0.1)),
        ],
        texture_seed=texture_seed,
        sign_convention=sign_convention,
    )
