from collections import defaultdict
from typing import Dict, Iterator, List, Mapping, NamedTuple, Sequence, Tuple, Union

import numpy as np

from fields.model import Stage
from rendering.camera import Camera, Ray, cast_ray
from rendering.density import BetaSchedule
from rendering.renderer import RenderResult, render_ray
from rendering.sampling import sample_along_ray
from utils.geometry import DiffPose, PoseEstimate

Pose = Union[PoseEstimate, DiffPose]


class PixelSample(NamedTuple):
    frame: int
    pixel: Tuple[int, int]
    color: np.ndarray
    ray: Ray
    render: RenderResult


class PixelBatch:
    """Rendered pixels drawn from one or more frames."""

    def __init__(self, samples: Sequence[PixelSample]):
        self.samples: List[PixelSample] = list(samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[PixelSample]:
        return iter(self.samples)

    def frames(self) -> List[int]:
        return sorted({s.frame for s in self.samples})

    def by_frame(self) -> Dict[int, List[PixelSample]]:
        groups: Dict[int, List[PixelSample]] = defaultdict(list)
        for sample in self.samples:
            groups[sample.frame].append(sample)
        return dict(sorted(groups.items()))

    def points(self) -> np.ndarray:
        """Every sample position of every ray, for the voxel counter."""
        rows = [p for s in self.samples for p in s.render.points]
        return np.asarray(rows, dtype=np.float64).reshape(-1, 3)

    def surface_points(self) -> np.ndarray:
        """Ray points at the rendered depth."""
        rows = []
        for s in self.samples:
            depth = float(s.render.depth)
            rows.append([float(s.ray.origin[i]) + float(s.ray.direction[i]) * depth for i in range(3)])
        return np.asarray(rows, dtype=np.float64).reshape(-1, 3)


def as_diff_pose(pose: Pose) -> DiffPose:
    return pose if isinstance(pose, DiffPose) else DiffPose.constant(pose)


def sample_pixels(frame_ids: Sequence[int], count: int, camera: Camera,
                  rng: np.random.Generator) -> List[Tuple[int, int, int]]:
    """`count` (frame, u, v) triples drawn uniformly over all pixels of all listed frames."""
    frames = rng.integers(0, len(frame_ids), size=count)
    us = rng.integers(0, camera.width, size=count)
    vs = rng.integers(0, camera.height, size=count)
    return [(int(frame_ids[f]), int(u), int(v)) for f, u, v in zip(frames, us, vs)]


def render_batch(field, pixels: Sequence[Tuple[int, int, int]], images: Mapping[int, np.ndarray],
                 poses: Mapping[int, Pose], camera: Camera, schedule: BetaSchedule, stage: Stage,
                 near: float, far: float, n_samples: int, rng: np.random.Generator,
                 with_color: bool = True) -> PixelBatch:
    samples = []
    for frame, u, v in pixels:
        ray = cast_ray(camera, as_diff_pose(poses[frame]), (u, v))
        depths = sample_along_ray(ray, near, far, n_samples, rng)
        render = render_ray(field, ray, depths, schedule, stage, with_color=with_color)
        samples.append(PixelSample(frame, (u, v), np.asarray(images[frame][v, u], dtype=np.float64), ray, render))
    return PixelBatch(samples)
