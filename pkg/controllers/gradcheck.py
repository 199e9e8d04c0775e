"""Finite-difference check of every loss term against reverse-mode gradients on a micro scene."""
import logging
from typing import Callable, Dict, Hashable, List, NamedTuple, Tuple

import numpy as np

from config.settings import RunConfig, build_config
from diffengine import Tape, Var, backward, check_gradients, check_parameter_gradients, ops
from fields.model import SceneModel, Stage, init_model, param_group
from losses.batch import render_batch, sample_pixels
from losses.combine import LossWeights, mapping_loss
from losses.terms import eikonal_points, loss_depth, loss_eikonal, loss_flow, loss_normal, loss_rgb, loss_warp
from rendering.camera import Camera
from rendering.density import BetaSchedule, VoxelCounter, sdf_to_density
from slam.mapping import STAGE_GROUPS
from utils.geometry import DiffPose

from .synth import build_dataset

TOLERANCE = 1e-4
HANDLES_PER_GROUP = 3
CHECK_FRAMES = (0, 1)
MOVED_FRAME = 1


class CheckResult(NamedTuple):
    name: str
    error: float

    @property
    def passed(self) -> bool:
        return self.error < TOLERANCE

    def line(self) -> str:
        return f"{self.name} {self.error:.3e} {'PASS' if self.passed else 'FAIL'}"


class CheckStore:
    """Model parameters plus the pose increment of the moving frame, behind one get/set."""

    def __init__(self, model: SceneModel, increment: np.ndarray):
        self.model = model
        self.increment = increment

    def get(self, handle: Hashable) -> float:
        if handle[0] == "pose":
            return float(self.increment[handle[2]])
        return self.model.get(handle)

    def set(self, handle: Hashable, new_value: float) -> None:
        if handle[0] == "pose":
            self.increment[handle[2]] = new_value
        else:
            self.model.set(handle, new_value)


def _primitives(tape: Tape, x) -> Var:
    a, b, c = x
    smooth = ops.sigmoid(a) * ops.softplus(b, 10.0) + ops.exp(c) * ops.reciprocal(1.0 + a * a)
    trig = ops.sin(c) * ops.cos(a) + ops.log(ops.sqrt(b * b + 1.0)) + ops.power(b * b + 0.5, 1.5)
    return smooth + trig + ops.norm([a, b, c]) + sdf_to_density(a, 0.1 + b * b) + sdf_to_density(-c, 0.2)


def micro_config(seed: int) -> RunConfig:
    return build_config({}, preset="micro", seed=seed)


def _largest(grads, count: int) -> List[Hashable]:
    """The `count` model handles with the largest |gradient| in every parameter group."""
    by_group: Dict[str, List[Tuple[float, Hashable]]] = {}
    for handle, g in grads.items():
        if handle[0] != "pose":
            by_group.setdefault(param_group(handle[0]), []).append((abs(g), handle))
    chosen = []
    for group in sorted(by_group):
        ranked = sorted(by_group[group], key=lambda item: (-item[0], item[1]))
        chosen += [handle for _, handle in ranked[:count]]
    return chosen


def run_gradcheck(seed: int = 0) -> List[CheckResult]:
    config = micro_config(seed)
    rng = np.random.default_rng([seed, 5])
    results = [CheckResult("primitives", check_gradients(_primitives, list(rng.uniform(0.2, 0.8, size=3))))]

    dataset = build_dataset(config, with_mesh=False)
    camera: Camera = dataset.camera
    model = init_model(config, seed)
    # nudge every parameter off its initial value so zero-initialized paths carry gradient
    for array in model.params.values():
        array += rng.normal(0.0, 0.05, size=array.shape)
    store = CheckStore(model, rng.normal(0.0, 1e-3, size=6))
    schedule = BetaSchedule.from_config(config.rendering, VoxelCounter(config.rendering.counter_resolution))
    trainable = STAGE_GROUPS[3]
    rendering, losses = config.rendering, config.losses
    images = {f: dataset.frames[f].rgb for f in CHECK_FRAMES}
    base = {f: dataset.frames[f].pose_gt for f in CHECK_FRAMES}
    eikonal_at = eikonal_points(rng, losses.eikonal_points, np.zeros((0, 3)), losses.eikonal_surface_std)
    weights = LossWeights.from_config(losses)

    def build(name: str) -> Callable[[Tape], Var]:
        def objective(tape: Tape) -> Var:
            draw = np.random.default_rng([seed, 6])
            bound = model.bind(tape, trainable)
            poses = {f: DiffPose.on_tape(tape, base[f], f, start=store.increment) if f == MOVED_FRAME
                     else DiffPose.constant(base[f]) for f in CHECK_FRAMES}
            pixels = sample_pixels(list(CHECK_FRAMES), config.mapping.pixels, camera, draw)
            batch = render_batch(bound, pixels, images, poses, camera, schedule, Stage.FULL,
                                 rendering.near, rendering.far, rendering.samples_per_ray, draw)
            terms = {
                "rgb": lambda: loss_rgb(batch),
                "warp": lambda: loss_warp(batch, CHECK_FRAMES, images, poses, camera),
                "flow": lambda: loss_flow(batch, CHECK_FRAMES, poses, camera, dataset.cues),
                "depth": lambda: loss_depth(batch, dataset.cues),
                "normal": lambda: loss_normal(batch, dataset.cues, poses),
                "eikonal": lambda: loss_eikonal(bound, eikonal_at, Stage.FULL),
            }
            if name == "total":
                out = mapping_loss({term: make() for term, make in terms.items()}, weights).objective
            else:
                out = terms[name]()
            return out if isinstance(out, Var) else tape.constant(out)
        return objective

    for name in ("rgb", "warp", "flow", "depth", "normal", "eikonal", "total"):
        objective = build(name)
        tape = Tape()
        grads = backward(tape, objective(tape))
        handles = _largest(grads, HANDLES_PER_GROUP) + [("pose", MOVED_FRAME, k) for k in range(6)]
        result = CheckResult(name, check_parameter_gradients(objective, store, handles))
        logging.info(f"Gradient check {result.line()}")
        results.append(result)
    return results
