import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from config.settings import build_config
from controllers.synth import build_dataset
from fields import init_model
from rendering import VoxelCounter
from slam import (
    STAGE_GROUPS,
    FrameStore,
    Mapper,
    StepRecord,
    TrackingDiverged,
    UnknownFrame,
    ba_frames,
    constant_velocity,
    mapping_schedule,
    mapping_step,
    run_slam,
    select_mapping_frames,
    stage_for,
    track_frame,
)
from utils.geometry import PoseEstimate

IMAGE = np.zeros((2, 2, 3))


def _store(count, interval=10):
    store = FrameStore(interval)
    for i in range(count):
        store.add(i, IMAGE, PoseEstimate.identity())
    return store


def test_frame_store_keyframes():
    store = _store(25)
    assert store.keyframes == [0, 10, 20]
    assert len(store) == 25 and store.next_id == 25
    assert 24 in store and 25 not in store


def test_frame_store_rejects_out_of_order_and_unknown():
    store = _store(3)
    with pytest.raises(UnknownFrame):
        store.add(5, IMAGE, PoseEstimate.identity())
    with pytest.raises(UnknownFrame):
        store.pose(7)
    with pytest.raises(UnknownFrame):
        store.image(-1)
    with pytest.raises(UnknownFrame):
        store.set_pose(3, PoseEstimate.identity())


def test_selection_takes_all_keyframes_when_few():
    assert select_mapping_frames(_store(25), 24, np.random.default_rng(0)) == [0, 10, 20, 24]


def test_selection_bounds_and_window():
    store = _store(60, interval=1)
    for seed in range(10):
        chosen = select_mapping_frames(store, 59, np.random.default_rng(seed), 5, 10, 20)
        assert 59 in chosen
        assert len(chosen) <= 16
        assert chosen == sorted(set(chosen))
        assert sum(1 for f in chosen if f >= 40) >= 10


def test_selection_is_seeded():
    store = _store(60, interval=1)
    a = select_mapping_frames(store, 59, np.random.default_rng(3))
    b = select_mapping_frames(store, 59, np.random.default_rng(3))
    assert a == b


def test_selection_rejects_unknown_current():
    with pytest.raises(UnknownFrame):
        select_mapping_frames(_store(3), 3, np.random.default_rng(0))


@pytest.mark.parametrize("selection,current,expected", [
    ([0, 3, 5, 8, 10], 10, [5, 8, 10]),
    ([4, 5, 6], 5, [5, 6]),
    ([0, 1], 1, [1]),
    ([0], 0, []),
])
def test_ba_frames(selection, current, expected):
    assert ba_frames(selection, current) == expected


def test_stage_boundaries():
    mapping = build_config({}).mapping
    assert [stage_for(p, mapping) for p in (0.0, 0.2499, 0.25, 0.74, 0.75, 1.0)] == [1, 1, 2, 2, 3, 3]


def test_stage_groups_grow():
    assert "fine_grid" not in STAGE_GROUPS[1] and "color_grid" not in STAGE_GROUPS[1]
    assert "fine_grid" in STAGE_GROUPS[2] and "color_grid" not in STAGE_GROUPS[2]
    assert set(STAGE_GROUPS[2]) < set(STAGE_GROUPS[3])


def test_constant_velocity_copies_single_prior():
    prior = PoseEstimate(Rotation.from_euler("y", 12, degrees=True).as_quat(), [0.1, 0.2, 0.3])
    predicted = constant_velocity([prior])
    assert predicted == prior
    assert predicted is not prior


def test_constant_velocity_extrapolates():
    first = PoseEstimate(Rotation.from_euler("y", 5, degrees=True).as_quat(), [0.0, 0.0, 0.0])
    second = PoseEstimate(Rotation.from_euler("y", 10, degrees=True).as_quat(), [0.1, 0.0, 0.0])
    predicted = constant_velocity([first, second])
    expected = Rotation.from_euler("y", 15, degrees=True).as_matrix()
    assert predicted.rotation_matrix == pytest.approx(expected, abs=1e-12)
    five = math.radians(5.0)
    assert predicted.translation == pytest.approx([0.1 + 0.1 * math.cos(five), 0.0, -0.1 * math.sin(five)], abs=1e-12)


def test_mapping_schedule():
    assert [mapping_schedule(n, 5) for n in (1, 5, 6, 11)] == [1, 1, 2, 3]


def test_step_record_line():
    record = StepRecord("map", 0, 1, {"rgb": 0.5}, 0.5, {"rolled_back": 1})
    assert record.line() == "kind=map frame=0 stage=1 total=0.5 rgb=0.5 rolled_back=1"


def test_tracking_diverged_carries_initialization():
    pose = PoseEstimate(None, [1.0, 2.0, 3.0])
    error = TrackingDiverged(4, pose, "loss nan")
    assert error.pose == pose and error.frame == 4
    assert str(error) == "tracking diverged on frame 4: loss nan"


def _gt_store(dataset, count):
    origin = dataset.frames[0].pose_gt.inverse()
    store = FrameStore(10)
    for frame in dataset.frames[:count]:
        pose = PoseEstimate.identity() if frame.index == 0 else origin.compose(frame.pose_gt)
        store.add(frame.index, frame.rgb, pose)
    return store


def test_bootstrap_mapping_step_trains_stage_one_only(micro_config, micro_dataset):
    model = init_model(micro_config, 0)
    counter = VoxelCounter(micro_config.rendering.counter_resolution)
    mapper = Mapper(model, counter, micro_dataset.camera, micro_config, 4)
    store = _gt_store(micro_dataset, 1)
    fine_before = {n: a.copy() for n, a in model.params.items() if n.startswith(("fine_grid", "color_grid"))}
    outcome = mapping_step(mapper, store, micro_dataset.cues, 0, 0.0, np.random.default_rng(0), bootstrap=True)
    assert outcome.stage == 1
    assert outcome.selection == [0]
    assert outcome.moved_poses == []
    iterations, pixels, samples = (micro_config.mapping.iterations, micro_config.mapping.pixels,
                                   micro_config.rendering.samples_per_ray)
    assert counter.total() == iterations * pixels * samples
    for name, before in fine_before.items():
        assert np.array_equal(model.params[name], before)
    assert store.pose(0) == PoseEstimate.identity()


def test_late_mapping_step_moves_only_recent_poses(micro_config, micro_dataset):
    model = init_model(micro_config, 0)
    counter = VoxelCounter(micro_config.rendering.counter_resolution)
    mapper = Mapper(model, counter, micro_dataset.camera, micro_config, 4)
    store = _gt_store(micro_dataset, 6)
    outcome = mapping_step(mapper, store, micro_dataset.cues, 5, 0.9, np.random.default_rng(1))
    assert outcome.stage == 3
    assert outcome.selection == [0, 5]
    assert set(outcome.moved_poses) <= {5}
    assert store.pose(0) == PoseEstimate.identity()
    for frame in range(1, 5):
        assert store.pose(frame) == micro_dataset.frames[0].pose_gt.inverse().compose(micro_dataset.frames[frame].pose_gt)


def test_tracking_reads_but_never_writes_the_map(micro_config, micro_dataset):
    model = init_model(micro_config, 0)
    counter = VoxelCounter(micro_config.rendering.counter_resolution)
    before = {n: a.copy() for n, a in model.params.items()}
    frame = micro_dataset.frames[1]
    outcome = track_frame(model, counter, 1, frame.rgb, [PoseEstimate.identity()], micro_dataset.camera,
                          micro_config, np.random.default_rng(2))
    assert math.isfinite(outcome.loss) and math.isfinite(outcome.initial_loss)
    assert outcome.loss <= outcome.initial_loss
    assert counter.total() == 0
    for name, array in before.items():
        assert np.array_equal(model.params[name], array)


def test_run_with_ground_truth_poses(micro_dataset, tmp_path):
    config = build_config({"tracking": {"use_gt_poses": True}}, preset="micro", seed=0)
    result = run_slam(micro_dataset, config, step_log=tmp_path / "steps.log")
    assert len(result.trajectory) == len(micro_dataset)
    assert result.trajectory[0] == PoseEstimate.identity()
    origin = micro_dataset.frames[0].pose_gt.inverse()
    for estimate, frame in zip(result.trajectory[1:], micro_dataset.frames[1:]):
        assert estimate == origin.compose(frame.pose_gt)
    maps = [s for s in result.steps if s.kind == "map"]
    assert [s.frame for s in maps] == [0, 5]
    lines = (tmp_path / "steps.log").read_text().splitlines()
    assert lines[0].startswith("kind=map frame=0 stage=1")
    assert len(lines) == len(result.steps)


def test_run_tracks_every_frame(micro_config, micro_dataset):
    result = run_slam(micro_dataset, micro_config)
    assert len(result.trajectory) == len(micro_dataset)
    assert [s.frame for s in result.steps if s.kind == "track"] == [1, 2, 3, 4, 5]
    for pose in result.trajectory:
        assert np.all(np.isfinite(pose.matrix()))
    assert result.counter.total() > 0


def test_run_rejects_empty_dataset(micro_config, micro_dataset):
    with pytest.raises(ValueError):
        run_slam(micro_dataset.model_copy(update={"frames": []}), micro_config)


def test_run_maps_across_frames_without_flow_cues():
    config = build_config({"synth": {"flow_max_gap": 1}, "tracking": {"use_gt_poses": True}}, preset="micro", seed=0)
    dataset = build_dataset(config, with_mesh=False)
    assert not dataset.cues.has_flow(5, 0)
    result = run_slam(dataset, config)
    assert len(result.trajectory) == len(dataset)
    late = [s for s in result.steps if s.kind == "map" and s.frame == 5]
    assert len(late) == 1
    assert late[0].diagnostics["flow_missing"] > 0
    assert math.isfinite(late[0].total)
