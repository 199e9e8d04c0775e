import math
from collections import Counter

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from config.settings import build_config
from diffengine import Tape, backward, check_gradients, ops
from fields.model import BoundField, SdfEval
from losses import (
    CueBundle,
    DegenerateDepth,
    EmptyBatch,
    LossWeights,
    MissingCue,
    NonFiniteLoss,
    PixelBatch,
    PixelSample,
    bilinear_sample,
    eikonal_points,
    loss_depth,
    loss_eikonal,
    loss_flow,
    loss_normal,
    loss_rgb,
    loss_warp,
    mapping_loss,
    sample_pixels,
    solve_scale_shift,
    warp_pixel,
)
from rendering import Camera, RenderResult, cast_ray
from synthworld import CueNoise, TrajectorySpec, desk_scene, generate_dataset
from utils.geometry import PoseEstimate

CAMERA = Camera(fx=12.0, fy=12.0, cx=8.5, cy=6.5, width=16, height=12)
IDENTITY = PoseEstimate.identity()


def _sample(frame, pixel, color=(0.5, 0.5, 0.5), rendered=(0.5, 0.5, 0.5), depth=1.0, normal=(0.0, 0.0, -1.0)):
    render = RenderResult(list(rendered), depth, list(normal), [], [], 1.0, [], 0)
    return PixelSample(frame, pixel, np.asarray(color, dtype=np.float64), cast_ray(CAMERA, IDENTITY, pixel), render)


class GradientField(BoundField):
    def __init__(self, grad):
        self.grad = list(grad)

    def sdf(self, x, stage, with_grad=False):
        return SdfEval(0.0, list(self.grad), [], None)


def test_rgb_is_mean_l1():
    batch = PixelBatch([_sample(0, (1, 1), color=(0.4, 0.6, 0.5)), _sample(0, (2, 2), color=(0.5, 0.5, 0.7))])
    assert loss_rgb(batch) == pytest.approx(0.2)


def test_rgb_unchanged_by_duplicated_batch():
    samples = [_sample(0, (1, 1), color=(0.1, 0.9, 0.3)), _sample(1, (4, 2), rendered=(0.2, 0.2, 0.2))]
    assert loss_rgb(PixelBatch(samples * 2)) == pytest.approx(loss_rgb(PixelBatch(samples)), rel=1e-12)


def test_rgb_rejects_empty_batch():
    with pytest.raises(EmptyBatch):
        loss_rgb(PixelBatch([]))


def test_scale_shift_recovers_affine_map():
    w, q = solve_scale_shift([1.0, 2.0, 3.0], [3.0, 5.0, 7.0])
    assert (w, q) == pytest.approx((2.0, 1.0))


@pytest.mark.parametrize("rendered,observed", [([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]), ([2.0], [1.0])])
def test_scale_shift_degenerate(rendered, observed):
    with pytest.raises(DegenerateDepth):
        solve_scale_shift(rendered, observed)


def _depth_cue(pixels, values):
    cue = np.zeros((CAMERA.height, CAMERA.width))
    for (u, v), value in zip(pixels, values):
        cue[v, u] = value
    return cue


def test_depth_loss_vanishes_for_affine_cue():
    pixels, depths = [(1, 1), (2, 3), (5, 4)], [1.0, 1.5, 2.5]
    cues = CueBundle(depth={0: _depth_cue(pixels, [2.0 * d + 0.5 for d in depths])})
    batch = PixelBatch([_sample(0, p, depth=d) for p, d in zip(pixels, depths)])
    assert loss_depth(batch, cues) == pytest.approx(0.0, abs=1e-20)


def test_depth_loss_ignores_invalid_cue_pixels():
    pixels, depths = [(1, 1), (2, 3), (5, 4), (7, 7)], [1.0, 1.5, 2.5, 9.0]
    cues = CueBundle(depth={0: _depth_cue(pixels, [3.0, 4.0, 6.0, 0.0])})
    batch = PixelBatch([_sample(0, p, depth=d) for p, d in zip(pixels, depths)])
    assert loss_depth(batch, cues) == pytest.approx(0.0, abs=1e-20)


def test_depth_loss_skips_flat_frame():
    good, flat = [(1, 1), (2, 3), (5, 4)], [(3, 3), (4, 4)]
    cues = CueBundle(depth={0: _depth_cue(good, [1.0, 2.0, 4.0]), 1: _depth_cue(flat, [1.0, 2.0])})
    batch = PixelBatch([_sample(0, p, depth=d) for p, d in zip(good, [1.0, 2.0, 4.0])]
                       + [_sample(1, p, depth=1.0) for p in flat])
    diagnostics = Counter()
    assert loss_depth(batch, cues, diagnostics=diagnostics) == pytest.approx(0.0, abs=1e-20)
    assert diagnostics["depth_skipped"] == 1
    with pytest.raises(EmptyBatch):
        loss_depth(PixelBatch([_sample(1, p, depth=1.0) for p in flat]), cues)


def test_depth_loss_fixed_affine():
    pixels = [(1, 1), (2, 3)]
    cues = CueBundle(depth={0: _depth_cue(pixels, [2.0, 3.0])})
    batch = PixelBatch([_sample(0, p, depth=1.0) for p in pixels])
    assert loss_depth(batch, cues, fixed_affine=(1.0, 0.0)) == pytest.approx(0.5 * (1.0 + 4.0))


def test_depth_gradient_with_detached_alignment():
    pixels = [(1, 1), (2, 3), (5, 4), (9, 2)]
    cues = CueBundle(depth={0: _depth_cue(pixels, [2.9, 3.8, 5.3, 6.6])})

    def program(tape, x):
        return loss_depth(PixelBatch([_sample(0, p, depth=d) for p, d in zip(pixels, x)]), cues)

    assert check_gradients(program, [1.0, 1.7, 2.2, 3.1]) < 1e-6


def test_depth_gradient_scales_with_squared_cue_scale():
    pixels, depths = [(1, 1), (2, 3), (5, 4), (9, 2)], [1.0, 1.7, 2.2, 3.1]
    observed = np.array([2.9, 3.8, 5.3, 6.6])
    a, b = 3.0, 0.4

    def loss_and_grads(values):
        tape = Tape()
        leaves = [tape.parameter(("depth", i), d) for i, d in enumerate(depths)]
        batch = PixelBatch([_sample(0, p, depth=d) for p, d in zip(pixels, leaves)])
        loss = loss_depth(batch, CueBundle(depth={0: _depth_cue(pixels, values)}))
        grads = backward(tape, loss)
        return ops.value(loss), np.array([grads[("depth", i)] for i in range(len(depths))])

    base_loss, base_grads = loss_and_grads(observed)
    scaled_loss, scaled_grads = loss_and_grads(a * observed + b)
    assert np.all(np.abs(base_grads) > 1e-6)
    assert scaled_loss == pytest.approx(a * a * base_loss, rel=1e-8)
    assert scaled_grads == pytest.approx(a * a * base_grads, rel=1e-8)


def test_missing_cue():
    with pytest.raises(MissingCue):
        loss_depth(PixelBatch([_sample(3, (1, 1))]), CueBundle())


def test_warp_returns_to_same_pixel_for_same_pose():
    warp = warp_pixel((3, 4), 1.7, IDENTITY, IDENTITY, CAMERA)
    assert warp.valid
    assert (warp.u, warp.v) == pytest.approx((3.0, 4.0), abs=1e-12)


def test_warp_shifts_with_baseline():
    warp = warp_pixel((8, 6), 2.0, IDENTITY, PoseEstimate(None, [0.5, 0.0, 0.0]), CAMERA)
    assert warp.valid
    assert (warp.u, warp.v) == pytest.approx((5.0, 6.0), abs=1e-12)


def test_warp_invalid_cases():
    assert not warp_pixel((8, 6), 0.0, IDENTITY, IDENTITY, CAMERA).valid
    assert not warp_pixel((8, 6), 2.0, IDENTITY, PoseEstimate(None, [0.0, 0.0, 3.0]), CAMERA).valid
    assert not warp_pixel((8, 6), 2.0, IDENTITY, PoseEstimate(None, [5.0, 0.0, 0.0]), CAMERA).valid


def test_bilinear_reproduces_linear_image():
    v, u = np.mgrid[0:12, 0:16].astype(np.float64)
    image = np.stack([u + 10.0 * v, 2.0 * u, -v], axis=-1)
    assert bilinear_sample(image, 2.25, 3.5) == pytest.approx([37.25, 4.5, -3.5])
    assert bilinear_sample(image, 15.0, 11.0) == pytest.approx([125.0, 30.0, -11.0])


def test_bilinear_is_differentiable():
    image = np.random.default_rng(5).uniform(size=(12, 16, 3))
    for c in range(3):
        assert check_gradients(lambda tape, x: bilinear_sample(image, x[0], x[1])[c], [4.3, 7.6]) < 1e-6


def test_warp_loss_zero_for_consistent_views(rng):
    image = rng.uniform(size=(12, 16, 3))
    images = {0: image, 1: image.copy()}
    poses = {0: IDENTITY, 1: IDENTITY}
    pixels = [(2, 3), (10, 7), (15, 11)]
    batch = PixelBatch([_sample(0, p, color=image[p[1], p[0]], depth=1.5) for p in pixels])
    assert loss_warp(batch, [0, 1], images, poses, CAMERA) == pytest.approx(0.0, abs=1e-12)


def test_warp_loss_counts_invalid_warps(rng):
    image = rng.uniform(size=(12, 16, 3))
    diagnostics = Counter()
    batch = PixelBatch([_sample(0, (4, 4), depth=0.0)])
    out = loss_warp(batch, [0, 1], {0: image, 1: image}, {0: IDENTITY, 1: IDENTITY}, CAMERA, diagnostics)
    assert out == 0.0
    assert diagnostics["warp_invalid"] == 1


def test_flow_loss_measures_displacement_error():
    flow = np.zeros((12, 16, 3))
    flow[..., 0] = 1.0
    flow[..., 2] = 1.0
    cues = CueBundle(flow={(0, 1): flow})
    batch = PixelBatch([_sample(0, (3, 3), depth=1.2), _sample(0, (9, 5), depth=2.0)])
    assert loss_flow(batch, [0, 1], {0: IDENTITY, 1: IDENTITY}, CAMERA, cues) == pytest.approx(1.0, abs=1e-9)


def test_flow_loss_skips_invalid_flow():
    cues = CueBundle(flow={(0, 1): np.zeros((12, 16, 3))})
    diagnostics = Counter()
    batch = PixelBatch([_sample(0, (3, 3), depth=1.2)])
    assert loss_flow(batch, [0, 1], {0: IDENTITY, 1: IDENTITY}, CAMERA, cues, diagnostics) == 0.0
    assert diagnostics["flow_invalid"] == 1


def test_flow_loss_skips_pairs_without_cue_when_asked():
    flow = np.zeros((12, 16, 3))
    flow[..., 0] = 1.0
    flow[..., 2] = 1.0
    cues = CueBundle(flow={(0, 1): flow})
    poses = {0: IDENTITY, 1: IDENTITY, 7: IDENTITY}
    batch = PixelBatch([_sample(0, (3, 3), depth=1.2)])
    with pytest.raises(MissingCue):
        loss_flow(batch, [0, 1, 7], poses, CAMERA, cues)
    diagnostics = Counter()
    out = loss_flow(batch, [0, 1, 7], poses, CAMERA, cues, diagnostics, skip_missing=True)
    assert out == pytest.approx(1.0, abs=1e-9)
    assert diagnostics["flow_missing"] == 1
    assert diagnostics["flow_invalid"] == 0


def _normal_cue(pixel, normal):
    cue = np.zeros((CAMERA.height, CAMERA.width, 3))
    cue[pixel[1], pixel[0]] = normal
    return cue


def test_normal_loss_in_camera_frame():
    cues = CueBundle(normal={0: _normal_cue((2, 2), [0.0, 0.0, -1.0])})
    same = PixelBatch([_sample(0, (2, 2), normal=(0.0, 0.0, -1.0))])
    flipped = PixelBatch([_sample(0, (2, 2), normal=(0.0, 0.0, 1.0))])
    assert loss_normal(same, cues, {0: IDENTITY}) == pytest.approx(0.0, abs=1e-12)
    assert loss_normal(flipped, cues, {0: IDENTITY}) == pytest.approx(4.0)


def test_normal_loss_rotates_world_normal_into_camera():
    pose = PoseEstimate(Rotation.from_euler("y", 90, degrees=True).as_quat())
    cues = CueBundle(normal={0: _normal_cue((2, 2), [0.0, 0.0, 1.0])})
    batch = PixelBatch([_sample(0, (2, 2), normal=(1.0, 0.0, 0.0))])
    assert loss_normal(batch, cues, {0: pose}) == pytest.approx(0.0, abs=1e-12)


def test_normal_loss_skips_missing_and_degenerate():
    cues = CueBundle(normal={0: _normal_cue((2, 2), [0.0, 0.0, -1.0])})
    diagnostics = Counter()
    batch = PixelBatch([_sample(0, (5, 5)), _sample(0, (2, 2), normal=(0.0, 0.0, 0.0))])
    with pytest.raises(EmptyBatch):
        loss_normal(batch, cues, {0: IDENTITY}, diagnostics)
    assert diagnostics["normal_skipped"] == 2


def test_eikonal_loss():
    points = np.zeros((4, 3))
    assert loss_eikonal(GradientField([0.6, 0.8, 0.0]), points) == pytest.approx(0.0, abs=1e-15)
    assert loss_eikonal(GradientField([0.0, 0.0, 2.0]), points) == pytest.approx(1.0)
    assert loss_eikonal(GradientField([0.0, 0.0, 2.0]), np.zeros((0, 3))) == 0.0


def test_eikonal_points(rng):
    uniform = eikonal_points(rng, 8, np.zeros((0, 3)), 0.05)
    assert uniform.shape == (8, 3)
    assert np.all(np.abs(uniform) <= 1.0)
    mixed = eikonal_points(rng, 9, np.array([[0.99, 0.0, 0.0]]), 0.05)
    assert mixed.shape == (9, 3)
    assert np.all(np.abs(mixed) <= 1.0)
    assert np.all(np.abs(mixed[5:, 0] - 0.99) < 0.5)


def test_mapping_loss_weights_and_missing_terms():
    breakdown = mapping_loss({"rgb": 0.2, "depth": 1.0}, LossWeights())
    assert breakdown.total == pytest.approx(0.3)
    assert breakdown.terms["warp"] == 0.0
    assert breakdown.objective == pytest.approx(0.3)
    assert breakdown.line().startswith("total=0.3 rgb=0.2")


def test_zero_weight_drops_term_from_objective():
    tape = Tape()
    rgb, depth = tape.parameter("rgb", 0.2), tape.parameter("depth", 1.0)
    breakdown = mapping_loss({"rgb": rgb, "depth": depth}, LossWeights.rgb_only())
    grads = backward(tape, breakdown.objective)
    assert grads["rgb"] == 1.0
    assert grads["depth"] == 0.0


def test_non_finite_term_is_reported():
    with pytest.raises(NonFiniteLoss) as info:
        mapping_loss({"rgb": 0.1, "depth": math.nan}, LossWeights())
    assert info.value.term == "depth"


def test_sample_pixels_in_range(rng):
    pixels = sample_pixels([3, 7], 200, CAMERA, rng)
    assert len(pixels) == 200
    assert {f for f, _, _ in pixels} == {3, 7}
    assert all(0 <= u < 16 and 0 <= v < 12 for _, u, v in pixels)


def _oracle_dataset(preset):
    synth = build_config({}, preset=preset, seed=0).synth
    scene = desk_scene(synth.room_half_extent, synth.texture_seed)
    path = TrajectorySpec.from_config(synth)
    return generate_dataset(scene, path, Camera.from_config(synth), CueNoise.zero(), np.random.default_rng(0))


def _oracle_batch(dataset, frames):
    """Every valid pixel rendered with its ground-truth colour, depth and world normal."""
    samples = []
    for f in frames:
        frame = dataset.frames[f]
        for v, u in zip(*np.nonzero(frame.valid)):
            normal = frame.pose_gt.rotation_matrix @ frame.normal_gt[v, u]
            render = RenderResult(list(frame.rgb[v, u]), float(frame.depth_gt[v, u]), list(normal), [], [], 1.0, [], 0)
            samples.append(PixelSample(f, (int(u), int(v)), frame.rgb[v, u],
                                       cast_ray(dataset.camera, frame.pose_gt, (int(u), int(v))), render))
    return PixelBatch(samples)


@pytest.fixture(scope="module")
def oracle():
    dataset = _oracle_dataset("micro")
    return dataset, _oracle_batch(dataset, [0, 1, 2]), {f.index: f.pose_gt for f in dataset.frames}


def test_oracle_cues_zero_flow_normal_and_depth(oracle):
    dataset, batch, poses = oracle
    diagnostics = Counter()
    assert loss_flow(batch, [0, 1, 2], poses, dataset.camera, dataset.cues, diagnostics) < 1e-6
    assert diagnostics["flow_invalid"] < 2 * len(batch)
    assert loss_normal(batch, dataset.cues, poses) < 1e-6
    assert loss_depth(batch, dataset.cues) < 1e-12


@pytest.mark.slow
def test_oracle_cues_warp_below_resampling_floor():
    dataset = _oracle_dataset("desk")
    batch = _oracle_batch(dataset, [0, 1, 2])
    poses = {f.index: f.pose_gt for f in dataset.frames}
    images = {f.index: f.rgb for f in dataset.frames}
    assert loss_warp(batch, [0, 1, 2], images, poses, dataset.camera) < 0.02
