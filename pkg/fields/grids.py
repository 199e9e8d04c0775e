import math
from typing import List, Sequence, Tuple

import numpy as np

from diffengine import ops

from .errors import InvalidLevelCount, InvalidRange

DOMAIN = (-1.0, 1.0)


def grid_resolutions(r_min: int, r_max: int, levels: int) -> List[int]:
    """Geometrically spaced per-level resolutions, R_0 = r_min and R_{L-1} = r_max."""
    if levels < 2:
        raise InvalidLevelCount(f"need at least 2 levels, got {levels}")
    if not 2 <= r_min <= r_max:
        raise InvalidRange(f"invalid resolution range [{r_min}, {r_max}]")
    growth = math.exp((math.log(r_max) - math.log(r_min)) / (levels - 1))
    out = [int(math.floor(r_min * growth ** level + 1e-9)) for level in range(levels)]
    out[0], out[-1] = r_min, r_max
    return out


class DenseGrid:
    """Cube of feature vectors with corners spanning the domain inclusively."""

    def __init__(self, name: str, values: np.ndarray, domain: Tuple[float, float] = DOMAIN):
        if values.ndim != 4 or not values.shape[0] == values.shape[1] == values.shape[2]:
            raise InvalidRange(f"grid {name} must be resolution^3 x feature_dim, got {values.shape}")
        if values.shape[0] < 2:
            raise InvalidRange(f"grid {name} resolution must be at least 2")
        self.name = name
        self.values = values
        self.domain = domain

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.values.shape[3]

    @property
    def scale(self) -> float:
        return (self.resolution - 1) / (self.domain[1] - self.domain[0])


class MultiResGrid:
    def __init__(self, levels: Sequence[DenseGrid]):
        resolutions = [g.resolution for g in levels]
        if any(b < a for a, b in zip(resolutions, resolutions[1:])):
            raise InvalidRange(f"level resolutions must be non-decreasing: {resolutions}")
        self.levels = list(levels)

    @property
    def level_count(self) -> int:
        return len(self.levels)

    @property
    def feature_dim(self) -> int:
        return sum(g.feature_dim for g in self.levels)


def _corner_weights(fracs):
    """Trilinear corner weights and their derivatives along each axis."""
    fx, fy, fz = fracs
    gx, gy, gz = 1.0 - fx, 1.0 - fy, 1.0 - fz
    weights, d_weights = [], ([], [], [])
    for bx in (0, 1):
        wx = fx if bx else gx
        sx = 1.0 if bx else -1.0
        for by in (0, 1):
            wy = fy if by else gy
            sy = 1.0 if by else -1.0
            for bz in (0, 1):
                wz = fz if bz else gz
                sz = 1.0 if bz else -1.0
                wyz = wy * wz
                weights.append(wx * wyz)
                d_weights[0].append(sx * wyz)
                d_weights[1].append(sy * (wx * wz))
                d_weights[2].append(sz * (wx * wy))
    return weights, d_weights


def trilinear_interp(grid: DenseGrid, x: Sequence[ops.Scalar], bound=None, with_jet: bool = False):
    """Blend of the 8 surrounding voxel features; out-of-domain coordinates clamp.

    `bound` supplies grid values (tape parameters or floats); without it the grid's
    array is read directly. With `with_jet` also returns d feature / d x as 3 lists.
    """
    res = grid.resolution
    low = grid.domain[0]
    cell, fracs, slopes = [], [], []
    for d in range(3):
        u = (x[d] - low) * grid.scale
        u_val = ops.value(u)
        if u_val <= 0.0:
            u, slope = 0.0, 0.0
        elif u_val >= res - 1:
            u, slope = float(res - 1), 0.0
        else:
            slope = grid.scale
        i0 = min(int(math.floor(ops.value(u))), res - 2)
        cell.append(i0)
        fracs.append(u - i0)
        slopes.append(slope)
    weights, d_weights = _corner_weights(fracs)
    corners = []
    for bx in (0, 1):
        for by in (0, 1):
            for bz in (0, 1):
                i, j, k = cell[0] + bx, cell[1] + by, cell[2] + bz
                if bound is None:
                    corners.append(grid.values[i, j, k].tolist())
                else:
                    corners.append(bound.grid_features(grid, i, j, k))
    features = []
    jets = ([], [], [])
    for f in range(grid.feature_dim):
        column = [c[f] for c in corners]
        features.append(ops.dot(weights, column))
        if with_jet:
            for d in range(3):
                jets[d].append(ops.dot(d_weights[d], column) * slopes[d] if slopes[d] else 0.0)
    if with_jet:
        return features, jets
    return features


def trilinear_batch(grid_values: np.ndarray, points: np.ndarray, domain=DOMAIN, with_jet: bool = False):
    """Vectorised trilinear lookup: features (N, F) and optionally jets (N, 3, F)."""
    res = grid_values.shape[0]
    scale = (res - 1) / (domain[1] - domain[0])
    u = (points - domain[0]) * scale
    inside = (u > 0.0) & (u < res - 1)
    u = np.clip(u, 0.0, res - 1)
    cell = np.minimum(np.floor(u).astype(np.int64), res - 2)
    frac = u - cell
    slope = np.where(inside, scale, 0.0)
    n, feat = points.shape[0], grid_values.shape[3]
    out = np.zeros((n, feat))
    jets = np.zeros((n, 3, feat)) if with_jet else None
    for bx in (0, 1):
        wx = frac[:, 0] if bx else 1.0 - frac[:, 0]
        sx = 1.0 if bx else -1.0
        for by in (0, 1):
            wy = frac[:, 1] if by else 1.0 - frac[:, 1]
            sy = 1.0 if by else -1.0
            for bz in (0, 1):
                wz = frac[:, 2] if bz else 1.0 - frac[:, 2]
                sz = 1.0 if bz else -1.0
                corner = grid_values[cell[:, 0] + bx, cell[:, 1] + by, cell[:, 2] + bz]
                out += (wx * wy * wz)[:, None] * corner
                if with_jet:
                    jets[:, 0] += (sx * wy * wz * slope[:, 0])[:, None] * corner
                    jets[:, 1] += (sy * wx * wz * slope[:, 1])[:, None] * corner
                    jets[:, 2] += (sz * wx * wy * slope[:, 2])[:, None] * corner
    if with_jet:
        return out, jets
    return out
