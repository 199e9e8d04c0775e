import logging
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Union

import numpy as np
from tqdm import tqdm

from fields.model import SceneModel, init_model
from rendering.density import VoxelCounter
from utils.geometry import PoseEstimate

from .errors import TrackingDiverged
from .frames import FrameStore
from .mapping import Mapper, mapping_step, sdf_stage
from .tracking import track_frame

step_logger = logging.getLogger("slam.steps")


class StepRecord(NamedTuple):
    kind: str
    frame: int
    stage: int
    terms: Dict[str, float]
    total: float
    diagnostics: Dict[str, int]

    def line(self) -> str:
        parts = [f"kind={self.kind}", f"frame={self.frame}", f"stage={self.stage}", f"total={self.total:.6g}"]
        parts += [f"{name}={value:.6g}" for name, value in self.terms.items()]
        parts += [f"{name}={count}" for name, count in sorted(self.diagnostics.items())]
        return " ".join(parts)


class SlamResult(NamedTuple):
    trajectory: List[PoseEstimate]
    model: SceneModel
    counter: VoxelCounter
    steps: List[StepRecord]


def attach_step_log(path: Union[str, Path]) -> logging.Handler:
    """Route step records to a plain-text file; the caller removes the handler when done."""
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(message)s"))
    step_logger.addHandler(handler)
    step_logger.setLevel(logging.INFO)
    return handler


def mapping_schedule(frame_count: int, stride: int) -> int:
    """Number of mapping rounds; frame 0 maps first."""
    return (frame_count - 1) // stride + 1


def _emit(steps: List[StepRecord], record: StepRecord) -> None:
    steps.append(record)
    step_logger.info(record.line())


def run_slam(dataset, config, step_log: Optional[Union[str, Path]] = None) -> SlamResult:
    """Track every frame and map every `mapping.stride` frames, starting from frame 0 at identity."""
    if not len(dataset):
        raise ValueError("dataset has no frames")
    handler = attach_step_log(step_log) if step_log is not None else None
    try:
        return _run(dataset, config)
    finally:
        if handler is not None:
            step_logger.removeHandler(handler)
            handler.close()


def _run(dataset, config) -> SlamResult:
    seed = config.run.seed
    rng = np.random.default_rng(seed)
    mapping, tracking = config.mapping, config.tracking
    camera = dataset.camera
    model = init_model(config, seed)
    counter = VoxelCounter(config.rendering.counter_resolution)
    store = FrameStore(mapping.keyframe_interval)
    rounds = mapping_schedule(len(dataset), mapping.stride)
    mapper = Mapper(model, counter, camera, config, rounds * mapping.iterations)
    gt_origin = dataset.frames[0].pose_gt.inverse()
    steps: List[StepRecord] = []
    done, stage = 0, 1
    for frame in tqdm(dataset.frames, desc="SLAM", leave=False):
        t = frame.index
        if t == 0:
            pose = PoseEstimate.identity()
        elif tracking.use_gt_poses:
            pose = gt_origin.compose(frame.pose_gt)
        else:
            try:
                outcome = track_frame(model, counter, t, frame.rgb, store.trajectory(), camera, config, rng,
                                      sdf_stage(stage))
                pose = outcome.pose
                _emit(steps, StepRecord("track", t, stage, {"rgb": outcome.loss}, outcome.loss, {}))
            except TrackingDiverged as exc:
                logging.warning(str(exc))
                pose = exc.pose
                _emit(steps, StepRecord("track", t, stage, {}, float("nan"), {"diverged": 1}))
        store.add(t, frame.rgb, pose)
        if t % mapping.stride == 0:
            outcome = mapping_step(mapper, store, dataset.cues, t, done / mapper.total_iterations, rng,
                                   bootstrap=(t == 0), optimize_poses=not tracking.use_gt_poses)
            done += mapping.iterations
            stage = outcome.stage
            last = outcome.losses[-1] if outcome.losses else None
            _emit(steps, StepRecord("map", t, stage, dict(last.terms) if last else {},
                                    last.total if last else float("nan"), dict(outcome.diagnostics)))
    logging.info(f"SLAM finished: {len(store)} frames, {rounds} mapping rounds, "
                 f"{counter.total()} voxel samples")
    return SlamResult(store.trajectory(), model, counter, steps)
