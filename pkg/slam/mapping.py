"""Map optimization over the selected frames with the three-stage schedule."""
import logging
import math
from collections import Counter
from typing import Dict, List, NamedTuple, Set

import numpy as np

from diffengine import Adam, Tape, Var, backward
from fields.model import SceneModel, Stage, param_group
from losses.batch import PixelBatch, render_batch, sample_pixels
from losses.combine import LossBreakdown, LossWeights, mapping_loss
from losses.cues import CueBundle
from losses.errors import EmptyBatch, NonFiniteLoss
from losses.terms import eikonal_points, loss_depth, loss_eikonal, loss_flow, loss_normal, loss_rgb, loss_warp
from rendering.camera import Camera
from rendering.density import BetaSchedule, VoxelCounter
from utils.geometry import DiffPose

from .frames import FrameStore, select_mapping_frames
from .tracking import pose_gradient

STAGE_GROUPS = {
    1: ("coarse_grid", "decoder_coarse", "decoder_color", "beta"),
    2: ("coarse_grid", "decoder_coarse", "decoder_color", "beta", "fine_grid", "decoder_fine"),
    3: ("coarse_grid", "decoder_coarse", "decoder_color", "beta", "fine_grid", "decoder_fine", "color_grid"),
}


def stage_for(progress: float, mapping) -> int:
    if progress >= mapping.stage3_start:
        return 3
    if progress >= mapping.stage2_start:
        return 2
    return 1


def sdf_stage(stage: int) -> Stage:
    return Stage.COARSE if stage == 1 else Stage.FULL


def ba_frames(selection: List[int], current_id: int) -> List[int]:
    """Frames whose poses move in bundle adjustment: the current one and the nearest half of the rest.

    Ties in temporal distance keep the newer frame; frame 0 never moves.
    """
    others = sorted((f for f in selection if f != current_id), key=lambda f: (abs(f - current_id), -f))
    near = [current_id] + others[:math.ceil(len(others) / 2)]
    return sorted(f for f in near if f != 0)


class MappingOutcome(NamedTuple):
    selection: List[int]
    stage: int
    losses: List[LossBreakdown]
    diagnostics: Counter
    moved_poses: List[int]


class Mapper:
    """Map state that persists across mapping steps: model, voxel counter and optimizer moments."""

    def __init__(self, model: SceneModel, counter: VoxelCounter, camera: Camera, config,
                 total_iterations: int):
        self.model = model
        self.counter = counter
        self.camera = camera
        self.config = config
        self.total_iterations = max(total_iterations, 1)
        mapping = config.mapping
        self.optimizer = Adam(mapping.adam_beta1, mapping.adam_beta2, mapping.adam_eps)
        self.weights = LossWeights.from_config(config.losses)
        self.schedule = BetaSchedule.from_config(config.rendering, counter)
        self.learning_rates = {
            "coarse_grid": mapping.lr_coarse_grid,
            "fine_grid": mapping.lr_fine_grid,
            "color_grid": mapping.lr_color_grid,
            "decoder_coarse": mapping.lr_decoder,
            "decoder_fine": mapping.lr_decoder,
            "decoder_color": mapping.lr_decoder,
            "beta": mapping.lr_beta,
        }

    def terms(self, bound, batch: PixelBatch, selection: List[int], images, poses, cues: CueBundle,
              stage: Stage, bootstrap: bool, rng: np.random.Generator, diagnostics: Counter) -> Dict:
        weights, losses = self.weights, self.config.losses
        terms = {"rgb": loss_rgb(batch)}
        if weights.warp:
            terms["warp"] = loss_warp(batch, selection, images, poses, self.camera, diagnostics)
        if weights.flow:
            terms["flow"] = loss_flow(batch, selection, poses, self.camera, cues, diagnostics, skip_missing=True)
        if weights.depth:
            fixed = (losses.bootstrap_depth_scale, losses.bootstrap_depth_shift) if bootstrap else None
            try:
                terms["depth"] = loss_depth(batch, cues, fixed, diagnostics)
            except EmptyBatch as exc:
                logging.warning(f"Depth loss dropped: {exc}")
                diagnostics["depth_dropped"] += 1
        if weights.normal:
            try:
                terms["normal"] = loss_normal(batch, cues, poses, diagnostics)
            except EmptyBatch as exc:
                logging.warning(f"Normal loss dropped: {exc}")
                diagnostics["normal_dropped"] += 1
        if weights.eikonal and losses.eikonal_points:
            points = eikonal_points(rng, losses.eikonal_points, batch.surface_points(), losses.eikonal_surface_std)
            terms["eikonal"] = loss_eikonal(bound, points, stage)
        return terms

    def apply_gradients(self, grads, trainable: Set[str], moved: List[int], store: FrameStore) -> None:
        for name in sorted(self.model.params):
            group = param_group(name)
            if group in trainable:
                self.optimizer.step_sparse(name, self.model.params[name], grads.group(name),
                                           self.learning_rates[group])
        for frame_id in moved:
            increment = np.zeros(6)
            self.optimizer.step(("pose", frame_id), increment, pose_gradient(grads, frame_id),
                                self.config.mapping.lr_pose)
            store.set_pose(frame_id, store.pose(frame_id).fold(increment))

    def parameters_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.model.params.values())


def mapping_step(mapper: Mapper, store: FrameStore, cues: CueBundle, current_id: int, global_progress: float,
                 rng: np.random.Generator, bootstrap: bool = False, optimize_poses: bool = True) -> MappingOutcome:
    """One mapping round: frame selection then `mapping.iterations` joint steps.

    `global_progress` is the fraction of the run's mapping iterations done before
    this round; the stage advances with it iteration by iteration. The bootstrap
    round stays in stage 1 and uses the fixed depth scale and shift.
    """
    config = mapper.config
    mapping, rendering = config.mapping, config.rendering
    selection = select_mapping_frames(store, current_id, rng, mapping.global_keyframes,
                                      mapping.recent_keyframes, mapping.recent_window)
    images = {f: store.image(f) for f in selection}
    losses: List[LossBreakdown] = []
    diagnostics: Counter = Counter()
    stage, moved_any = 1, set()
    for i in range(mapping.iterations):
        progress = global_progress + i / mapper.total_iterations
        stage = 1 if bootstrap else stage_for(progress, mapping)
        trainable = set(STAGE_GROUPS[stage])
        moved = ba_frames(selection, current_id) if stage == 3 and optimize_poses else []
        snapshot = (mapper.model.arrays(), mapper.optimizer.snapshot(), dict(store.poses))
        tape = Tape()
        bound = mapper.model.bind(tape, trainable)
        poses = {f: (DiffPose.on_tape(tape, store.pose(f), f) if f in moved else DiffPose.constant(store.pose(f)))
                 for f in selection}
        pixels = sample_pixels(selection, mapping.pixels, mapper.camera, rng)
        batch = render_batch(bound, pixels, images, poses, mapper.camera, mapper.schedule, sdf_stage(stage),
                             rendering.near, rendering.far, rendering.samples_per_ray, rng)
        mapper.counter.record(batch.points())
        try:
            terms = mapper.terms(bound, batch, selection, images, poses, cues, sdf_stage(stage), bootstrap,
                                 rng, diagnostics)
            breakdown = mapping_loss(terms, mapper.weights)
        except NonFiniteLoss as exc:
            logging.warning(f"Mapping frame {current_id} iteration {i} skipped: {exc}")
            diagnostics["skipped_iterations"] += 1
            continue
        losses.append(breakdown)
        if isinstance(breakdown.objective, Var):
            mapper.apply_gradients(backward(tape, breakdown.objective), trainable, moved, store)
        if not mapper.parameters_finite():
            logging.warning(f"Mapping frame {current_id} iteration {i}: non-finite parameters, rolled back")
            arrays, state, saved_poses = snapshot
            mapper.model.load_arrays(arrays)
            mapper.optimizer.restore(state)
            store.poses.update(saved_poses)
            diagnostics["rolled_back"] += 1
            continue
        moved_any.update(moved)
    if losses:
        logging.info(f"Mapped frame {current_id} (stage {stage}, {len(selection)} frames): "
                     f"loss {losses[0].total:.4f} -> {losses[-1].total:.4f}")
    return MappingOutcome(selection, stage, losses, diagnostics, sorted(moved_any))
