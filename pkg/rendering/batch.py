from typing import Dict

import numpy as np

from fields.batch import normals_from_gradient
from fields.model import Stage
from utils.geometry import PoseEstimate

from .camera import Camera
from .density import BetaSchedule, density_batch
from .sampling import SampleSet, sample_many


def composite(sigma: np.ndarray, delta: np.ndarray):
    """Per-sample (weights, transmittance) for (R, N) densities."""
    alpha = 1.0 - np.exp(-sigma * delta)
    survive = np.cumprod(1.0 - alpha, axis=1)
    transmittance = np.concatenate([np.ones((len(sigma), 1)), survive[:, :-1]], axis=1)
    return transmittance * alpha, transmittance


def render_rays(field, origins: np.ndarray, directions: np.ndarray, samples: SampleSet,
                schedule: BetaSchedule, stage: Stage = Stage.FULL, with_color: bool = True) -> Dict[str, np.ndarray]:
    """Vectorised counterpart of render_ray over R rays with (R, N) samples."""
    rays, n = samples.t.shape
    points = origins[:, None, :] + directions[:, None, :] * samples.t[:, :, None]
    flat = points.reshape(-1, 3)
    view = np.repeat(directions, n, axis=0)
    s, grad, colors = field.shade_batch(flat, view, stage, with_color)
    normals, _ = normals_from_gradient(grad, field.sign_convention)
    sigma = density_batch(s, schedule.batch(flat, field)).reshape(rays, n)
    weights, transmittance = composite(sigma, samples.delta)
    out = {
        "depth": np.sum(weights * samples.t, axis=1),
        "normal": np.einsum("rn,rnk->rk", weights, normals.reshape(rays, n, 3)),
        "opacity": weights.sum(axis=1),
        "weights": weights,
        "transmittance": transmittance,
    }
    if with_color:
        out["color"] = np.einsum("rn,rnk->rk", weights, colors.reshape(rays, n, 3))
    return out


def render_image(field, camera: Camera, pose: PoseEstimate, schedule: BetaSchedule, stage: Stage,
                 n_samples: int, near: float, far: float, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Render every pixel of one view; arrays come back as (H, W[, 3])."""
    pixels = camera.pixel_grid()
    directions = camera.directions(pixels) @ pose.rotation_matrix.T
    origins = np.broadcast_to(pose.translation, directions.shape)
    samples = sample_many(len(pixels), near, far, n_samples, rng)
    out = render_rays(field, origins, directions, samples, schedule, stage)
    shape = (camera.height, camera.width)
    return {
        "color": np.clip(out["color"], 0.0, 1.0).reshape(shape + (3,)),
        "depth": out["depth"].reshape(shape),
        "normal": out["normal"].reshape(shape + (3,)),
        "opacity": out["opacity"].reshape(shape),
    }
