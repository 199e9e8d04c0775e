import math
from collections import Counter

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from diffengine import Tape, check_gradients, check_parameter_gradients, ops
from fields import Stage, build_model
from fields.model import BoundField, SdfEval
from rendering import (
    BetaParams,
    BetaSchedule,
    Camera,
    InvalidBeta,
    InvalidBounds,
    PixelOutOfRange,
    VoxelCounter,
    cast_ray,
    local_beta,
    record_samples,
    render_ray,
    render_rays,
    sample_along_ray,
    sample_many,
    sdf_to_density,
)
from rendering.batch import composite
from rendering.density import density_batch
from rendering.sampling import SampleSet
from utils.geometry import DiffPose, PoseEstimate

CAMERA = Camera(fx=12.0, fy=12.0, cx=8.5, cy=6.5, width=16, height=12)


class ConstantField(BoundField):
    def __init__(self, sdf, color=(0.2, 0.4, 0.6)):
        self.value = sdf
        self.rgb = list(color)

    def sdf(self, x, stage, with_grad=False):
        return SdfEval(self.value, [0.0, 0.0, 1.0] if with_grad else None, [], None)

    def color(self, x, normal, view_dir, evaluated, stage):
        return list(self.rgb)


@pytest.fixture
def model(micro_config):
    built = build_model(micro_config, seed=2)
    rng = np.random.default_rng(4)
    for array in built.params.values():
        array += rng.normal(0.0, 0.05, size=array.shape)
    return built


def test_camera_rejects_principal_point_outside_image():
    with pytest.raises(ValueError):
        Camera(fx=10.0, fy=10.0, cx=20.0, cy=5.0, width=16, height=12)


def test_principal_ray_looks_forward():
    ray = cast_ray(CAMERA, PoseEstimate.identity(), (8, 6))
    assert ray.direction == pytest.approx([0.0, 0.0, 1.0])
    assert ray.origin == [0.0, 0.0, 0.0]


def test_translation_moves_origin_only():
    plain = cast_ray(CAMERA, PoseEstimate.identity(), (3, 4))
    moved = cast_ray(CAMERA, PoseEstimate(None, [0.1, -0.2, 0.3]), (3, 4))
    assert moved.origin == pytest.approx([0.1, -0.2, 0.3])
    assert moved.direction == pytest.approx(plain.direction)


def test_yaw_rotates_direction():
    pose = PoseEstimate(Rotation.from_euler("y", 90, degrees=True).as_quat())
    ray = cast_ray(CAMERA, pose, (8, 6))
    assert ray.direction == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)
    assert math.sqrt(sum(d * d for d in cast_ray(CAMERA, pose, (0, 0)).direction)) == pytest.approx(1.0, abs=1e-9)


def test_pixel_out_of_range():
    with pytest.raises(PixelOutOfRange):
        cast_ray(CAMERA, PoseEstimate.identity(), (16, 0))
    with pytest.raises(PixelOutOfRange):
        cast_ray(CAMERA, PoseEstimate.identity(), (0, -1))


def test_projection_inverts_unprojection(rng):
    pixels = np.stack([rng.integers(0, 16, 20), rng.integers(0, 12, 20)], axis=1)
    points = CAMERA.unproject_batch(pixels, rng.uniform(0.5, 2.0, 20))
    assert CAMERA.project_batch(points) == pytest.approx(pixels.astype(float), abs=1e-9)


def test_stratified_bins(rng):
    ray = cast_ray(CAMERA, PoseEstimate.identity(), (0, 0))
    samples = sample_along_ray(ray, 0.0, 1.0, 4, rng)
    for i, t in enumerate(samples.t):
        assert i * 0.25 <= t < (i + 1) * 0.25
    assert samples.delta[:-1] == pytest.approx(np.diff(samples.t))
    assert samples.delta[-1] == pytest.approx(1.0 - samples.t[-1])


def test_single_sample_runs_to_far(rng):
    ray = cast_ray(CAMERA, PoseEstimate.identity(), (0, 0))
    samples = sample_along_ray(ray, 0.5, 2.0, 1, rng)
    assert 0.5 <= samples.t[0] < 2.0
    assert samples.delta[0] == pytest.approx(2.0 - samples.t[0])


def test_sampling_is_seeded():
    ray = cast_ray(CAMERA, PoseEstimate.identity(), (0, 0))
    a = sample_along_ray(ray, 0.1, 3.0, 16, np.random.default_rng(7))
    b = sample_along_ray(ray, 0.1, 3.0, 16, np.random.default_rng(7))
    assert np.array_equal(a.t, b.t) and np.array_equal(a.delta, b.delta)


@pytest.mark.parametrize("near,far,n", [(-0.1, 1.0, 4), (1.0, 1.0, 4), (0.0, 1.0, 0)])
def test_invalid_sampling_bounds(near, far, n, rng):
    with pytest.raises(InvalidBounds):
        sample_many(3, near, far, n, rng)


def test_density_at_zero_from_both_sides():
    beta = 0.02
    assert sdf_to_density(0.0, beta) == pytest.approx(1.0 / (2 * beta), abs=1e-12)
    assert abs(sdf_to_density(1e-15, beta) - sdf_to_density(-1e-15, beta)) < 1e-12


def test_density_value_and_limits():
    assert sdf_to_density(0.01, 0.01) == pytest.approx(100.0 * (1.0 - 0.5 * math.exp(-1.0)), abs=1e-9)
    assert sdf_to_density(50.0, 0.01) == pytest.approx(100.0)
    assert sdf_to_density(-50.0, 0.01) == pytest.approx(0.0, abs=1e-300)


def test_density_strictly_increasing():
    s = np.linspace(-0.2, 0.2, 10000)
    sigma = density_batch(s, 0.05)
    assert np.all(np.diff(sigma) > 0.0)
    assert sigma[5000] == pytest.approx(sdf_to_density(float(s[5000]), 0.05), rel=1e-12)


def test_density_rejects_non_positive_beta():
    with pytest.raises(InvalidBeta):
        sdf_to_density(0.1, 0.0)


def test_density_gradient_in_sdf_and_beta():
    for s in (0.013, -0.013):
        assert check_gradients(lambda tape, x: sdf_to_density(x[0], x[1]), [s, 0.02]) < 1e-6


def test_local_beta_schedule():
    params = BetaParams()
    counter = VoxelCounter(8)
    x = [0.1, 0.1, 0.1]
    assert local_beta(counter, x, params) == pytest.approx(0.01438, abs=1e-12)
    index = tuple(counter.voxel_index(np.array(x))[0])
    counter.counts[index] = 110644
    assert local_beta(counter, x, params) == pytest.approx(0.00834, abs=1e-6)
    counter.counts[index] = 10 ** 9
    assert local_beta(counter, x, params) == pytest.approx(params.c2, abs=1e-12)


def test_local_beta_bounded_and_decreasing():
    params = BetaParams()
    counts = np.arange(0, 2_000_000, 1000)
    values = params.c0 * np.exp(-params.c1 * counts) + params.c2
    assert np.all(np.diff(values) < 0.0)
    assert np.all((values > params.c2) & (values <= params.c0 + params.c2))


def test_counter_records_and_owns_lower_boundary():
    counter = VoxelCounter(64)
    record_samples(counter, [[0.01, 0.01, 0.01]] * 10)
    assert counter.lookup(np.array([[0.01, 0.01, 0.01]]))[0] == 10
    assert tuple(counter.voxel_index(np.array([0.0, 0.0, 0.0]))[0]) == (32, 32, 32)
    before = counter.total()
    record_samples(counter, [])
    assert counter.total() == before


def test_transparent_ray_is_black():
    ray = cast_ray(CAMERA, PoseEstimate.identity(), (4, 4))
    samples = sample_along_ray(ray, 0.0, 2.0, 6, np.random.default_rng(0))
    result = render_ray(ConstantField(-1e3), ray, samples, BetaSchedule("fixed", fixed_beta=0.01), Stage.FULL)
    assert result.color == [0.0, 0.0, 0.0]
    assert result.depth == 0.0
    assert all(w == 0.0 for w in result.weights)


def test_opaque_single_sample():
    ray = cast_ray(CAMERA, PoseEstimate.identity(), (4, 4))
    samples = SampleSet(np.array([0.5]), np.array([0.5]))
    field = ConstantField(10.0)
    result = render_ray(field, ray, samples, BetaSchedule("fixed", fixed_beta=0.01), Stage.FULL)
    assert result.color == pytest.approx(field.rgb, abs=1e-12)
    assert result.depth == pytest.approx(0.5, abs=1e-12)
    assert result.normal == pytest.approx([0.0, 0.0, -1.0], abs=1e-12)


def test_weights_match_direct_quadrature(model, rng):
    counter = VoxelCounter(8)
    counter.record(rng.uniform(-1.0, 1.0, size=(5000, 3)))
    schedule = BetaSchedule("adaptive", BetaParams(), counter)
    pose = PoseEstimate(Rotation.from_euler("xyz", [5, -10, 3], degrees=True).as_quat(), [0.05, -0.1, -0.6])
    ray = cast_ray(CAMERA, pose, (5, 7))
    samples = sample_along_ray(ray, 0.05, 2.0 * math.sqrt(3.0), 12, rng)
    result = render_ray(model, ray, samples, schedule, Stage.FULL)
    transmittance, expected = 1.0, []
    for t, delta in zip(samples.t, samples.delta):
        x = [ray.origin[i] + ray.direction[i] * t for i in range(3)]
        s = model.sdf_batch(np.array([x]))[0]
        beta = local_beta(counter, x, schedule.params)
        alpha = 1.0 - math.exp(-sdf_to_density(s, beta) * delta)
        expected.append(transmittance * alpha)
        transmittance *= 1.0 - alpha
    assert result.weights == pytest.approx(expected, abs=1e-12)


def test_batch_renderer_matches_scalar_renderer(model, rng):
    schedule = BetaSchedule("fixed", fixed_beta=0.05)
    pose = PoseEstimate(None, [0.0, 0.0, -0.5])
    pixels = [(1, 2), (8, 6), (15, 11)]
    samples = sample_many(len(pixels), 0.05, 3.0, 8, rng)
    directions = CAMERA.directions(np.array(pixels)) @ pose.rotation_matrix.T
    batch = render_rays(model, np.broadcast_to(pose.translation, directions.shape), directions, samples,
                        schedule, Stage.FULL)
    for r, pixel in enumerate(pixels):
        ray = cast_ray(CAMERA, pose, pixel)
        single = render_ray(model, ray, SampleSet(samples.t[r], samples.delta[r]), schedule, Stage.FULL)
        assert batch["color"][r] == pytest.approx(single.color, abs=1e-9)
        assert batch["depth"][r] == pytest.approx(single.depth, abs=1e-9)
        assert batch["normal"][r] == pytest.approx(single.normal, abs=1e-9)


def test_batch_renderer_evaluates_geometry_once(model, rng, monkeypatch):
    calls = Counter()
    for name in ["decoder_coarse", "decoder_fine", "decoder_color"]:
        decoder = getattr(model, name)

        def counted(inputs, jets=None, _forward=decoder.forward_batch, _name=name):
            calls[_name] += 1
            return _forward(inputs, jets)

        monkeypatch.setattr(decoder, "forward_batch", counted)
    directions = CAMERA.directions(np.array([(1, 2), (8, 6), (15, 11)]))
    samples = sample_many(3, 0.05, 3.0, 8, rng)
    out = render_rays(model, np.zeros((3, 3)), directions, samples, BetaSchedule("fixed", fixed_beta=0.05), Stage.FULL)
    assert calls == Counter(decoder_coarse=1, decoder_fine=1, decoder_color=1)
    assert np.all(np.isfinite(out["color"]))


def test_weights_conserve_mass(model):
    rng = np.random.default_rng(21)
    count = 10_000
    directions = rng.normal(size=(count, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    origins = rng.uniform(-0.5, 0.5, size=(count, 3))
    samples = sample_many(count, 0.05, 2.0 * math.sqrt(3.0), 8, rng)
    out = render_rays(model, origins, directions, samples, BetaSchedule("fixed", fixed_beta=0.01),
                      Stage.FULL, with_color=False)
    total = out["weights"].sum(axis=1)
    assert np.all((total >= 0.0) & (total <= 1.0 + 1e-9))
    assert np.all(np.diff(out["transmittance"], axis=1) <= 0.0)


def test_composite_of_zero_density():
    weights, transmittance = composite(np.zeros((2, 3)), np.ones((2, 3)))
    assert np.all(weights == 0.0)
    assert np.all(transmittance == 1.0)


class PoseStore:
    def __init__(self, model, increment):
        self.model = model
        self.increment = increment

    def get(self, handle):
        return float(self.increment[handle[2]]) if handle[0] == "pose" else self.model.get(handle)

    def set(self, handle, value):
        if handle[0] == "pose":
            self.increment[handle[2]] = value
        else:
            self.model.set(handle, value)


def test_render_gradients_match_finite_differences(model):
    store = PoseStore(model, np.array([2e-3, -1e-3, 3e-3, 1e-2, -2e-2, 5e-3]))
    base = PoseEstimate(None, [0.0, 0.0, -0.5])
    schedule = BetaSchedule("fixed", fixed_beta=0.05)
    trainable = ("coarse_grid", "fine_grid", "color_grid", "decoder_coarse", "decoder_fine", "decoder_color")

    def objective(tape):
        pose = DiffPose.on_tape(tape, base, 0, start=store.increment)
        ray = cast_ray(CAMERA, pose, (6, 5))
        samples = sample_along_ray(ray, 0.05, 3.0, 8, np.random.default_rng(3))
        result = render_ray(model.bind(tape, trainable), ray, samples, schedule, Stage.FULL)
        return ops.total(result.color) + result.depth

    tape = Tape()
    objective(tape)
    handles = [("pose", 0, k) for k in range(6)] + [h for h in tape.registry if h[0] != "pose"][::11]
    assert check_parameter_gradients(objective, store, handles) < 1e-4
