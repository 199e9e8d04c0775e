import logging
import math
from typing import NamedTuple, Sequence

import numpy as np

from diffengine import Adam, Tape, Var, backward, ops
from fields.model import SceneModel, Stage
from losses.batch import render_batch, sample_pixels
from losses.terms import loss_rgb
from rendering.camera import Camera
from rendering.density import BetaSchedule, VoxelCounter
from utils.geometry import DiffPose, PoseEstimate

from .errors import TrackingDiverged


class TrackingOutcome(NamedTuple):
    pose: PoseEstimate
    loss: float
    initial_loss: float


def constant_velocity(previous: Sequence[PoseEstimate]) -> PoseEstimate:
    """Extrapolate the last relative motion; a single prior is copied."""
    if len(previous) >= 2:
        last, before = previous[-1], previous[-2]
        return last.compose(before.inverse().compose(last))
    return previous[-1].copy()


def pose_gradient(grads, frame_id: int) -> np.ndarray:
    return np.array([grads[("pose", frame_id, k)] for k in range(6)])


def track_frame(model: SceneModel, counter: VoxelCounter, frame_id: int, image: np.ndarray,
                previous: Sequence[PoseEstimate], camera: Camera, config, rng: np.random.Generator,
                stage: Stage = Stage.FULL) -> TrackingOutcome:
    """Pose of one frame from the RGB loss alone; the model and counter are only read."""
    tracking, rendering = config.tracking, config.rendering
    initial = constant_velocity(previous)
    schedule = BetaSchedule.from_config(rendering, counter)
    optimizer = Adam(config.mapping.adam_beta1, config.mapping.adam_beta2, config.mapping.adam_eps)
    pose = initial
    best_loss, best_pose, initial_loss = math.inf, initial, math.nan
    for _ in range(tracking.iterations):
        tape = Tape()
        bound = model.bind(tape)
        diff = DiffPose.on_tape(tape, pose, frame_id)
        pixels = sample_pixels([frame_id], tracking.pixels, camera, rng)
        batch = render_batch(bound, pixels, {frame_id: image}, {frame_id: diff}, camera, schedule, stage,
                             rendering.near, rendering.far, rendering.samples_per_ray, rng)
        loss = loss_rgb(batch)
        value = ops.value(loss)
        if not math.isfinite(value):
            raise TrackingDiverged(frame_id, initial, f"loss {value}")
        if math.isnan(initial_loss):
            initial_loss = value
        if value < best_loss:
            best_loss, best_pose = value, pose
        if not isinstance(loss, Var):
            break
        increment = np.zeros(6)
        optimizer.step("pose", increment, pose_gradient(backward(tape, loss), frame_id), tracking.lr)
        pose = pose.fold(increment)
    logging.info(f"Tracked frame {frame_id}: loss {initial_loss:.4f} -> {best_loss:.4f}")
    return TrackingOutcome(best_pose, best_loss, initial_loss)
