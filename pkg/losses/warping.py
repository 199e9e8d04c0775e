import math
from typing import List, NamedTuple, Tuple

import numpy as np

from diffengine import ops
from rendering.camera import Camera

from .batch import Pose, as_diff_pose


class Warp(NamedTuple):
    u: ops.Scalar
    v: ops.Scalar
    valid: bool


def warp_pixel(pixel: Tuple[int, int], rendered_depth: ops.Scalar, pose_m: Pose, pose_n: Pose,
               camera: Camera) -> Warp:
    """Reproject pixel of frame m, at `rendered_depth` along its ray, into frame n."""
    if ops.value(rendered_depth) <= 0.0:
        return Warp(float(pixel[0]), float(pixel[1]), False)
    direction = camera.direction(*pixel).tolist()
    point = [d * rendered_depth for d in direction]
    world = as_diff_pose(pose_m).transform(point)
    local = as_diff_pose(pose_n).inverse_transform(world)
    if ops.value(local[2]) <= 1e-6:
        return Warp(float(pixel[0]), float(pixel[1]), False)
    u, v = camera.project(local)
    return Warp(u, v, camera.in_bounds(ops.value(u), ops.value(v)))


def _cell(x: float, size: int) -> Tuple[int, int]:
    i0 = min(max(int(math.floor(x)), 0), max(size - 2, 0))
    return i0, min(i0 + 1, size - 1)


def bilinear_sample(image: np.ndarray, u: ops.Scalar, v: ops.Scalar) -> List[ops.Scalar]:
    """Per-channel value at continuous (u, v); differentiable in u and v."""
    height, width = image.shape[:2]
    i0, i1 = _cell(ops.value(u), width)
    j0, j1 = _cell(ops.value(v), height)
    fu = u - i0
    fv = v - j0
    out = []
    for c in range(image.shape[2]):
        c00, c10 = float(image[j0, i0, c]), float(image[j0, i1, c])
        c01, c11 = float(image[j1, i0, c]), float(image[j1, i1, c])
        top = c00 + fu * (c10 - c00)
        bottom = c01 + fu * (c11 - c01)
        out.append(top + fv * (bottom - top))
    return out
