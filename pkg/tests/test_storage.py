import struct
import zlib

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from config.settings import dump_config
from evalkit import Mesh, MetricReport, Trajectory
from fields import init_model
from rendering import VoxelCounter
from storage import (
    CheckpointState,
    CorruptCheckpoint,
    NotACheckpoint,
    ParseError,
    UnsupportedVersion,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    load_dataset,
    read_camera,
    read_pfm,
    read_ply,
    read_ppm,
    read_report,
    read_trajectory,
    save_checkpoint,
    write_dataset,
    write_pfm,
    write_ply,
    write_ppm,
    write_report,
    write_trajectory,
)
from storage.formats import format_pose_line
from utils.geometry import PoseEstimate


@pytest.fixture
def checkpoint_state(micro_config):
    model = init_model(micro_config, 0)
    counter = VoxelCounter(micro_config.rendering.counter_resolution)
    counter.record(np.array([[0.1, 0.2, 0.3], [0.1, 0.2, 0.3], [-0.5, 0.4, 0.0]]))
    trajectory = [PoseEstimate.identity(),
                  PoseEstimate(Rotation.from_euler("y", 7, degrees=True).as_quat(), [0.05, -0.01, 0.02])]
    return CheckpointState(micro_config, model.arrays(), counter, trajectory)


def test_identity_pose_line():
    assert format_pose_line(0, PoseEstimate.identity()) == "0 0 0 0 0 0 0 1"


def test_trajectory_file_is_exact(tmp_path):
    poses = [PoseEstimate(Rotation.from_euler("xyz", [i, 2 * i, -i], degrees=True).as_quat(), [0.1 * i, 1 / 3, -i])
             for i in range(4)]
    write_trajectory(tmp_path / "poses.txt", Trajectory([0, 2, 5, 9], poses))
    loaded = read_trajectory(tmp_path / "poses.txt")
    assert loaded.ids == [0, 2, 5, 9]
    assert all(a == b for a, b in zip(loaded.poses, poses))


@pytest.mark.parametrize("text,line", [
    ("0 0 0 0 0 0 0 1\n1 0 0 0 0 0 1\n", 2),
    ("# header\n3 0 0 0 0 0 0 1\n3 0 0 0 0 0 0 1\n", 3),
    ("0 0 0 x 0 0 0 1\n", 1),
])
def test_bad_trajectory_lines(tmp_path, text, line):
    path = tmp_path / "poses.txt"
    path.write_text(text)
    with pytest.raises(ParseError) as info:
        read_trajectory(path)
    assert info.value.line == line


def test_checkpoint_preserves_state(checkpoint_state, tmp_path):
    save_checkpoint(checkpoint_state, tmp_path / "run.ckpt")
    loaded = load_checkpoint(tmp_path / "run.ckpt")
    assert dump_config(loaded.config) == dump_config(checkpoint_state.config)
    assert loaded.config.preset == "micro"
    assert sorted(loaded.arrays) == sorted(checkpoint_state.arrays)
    for name, array in checkpoint_state.arrays.items():
        if "grid" in name:
            assert np.array_equal(loaded.arrays[name], array.astype(np.float32).astype(np.float64))
        else:
            assert np.array_equal(loaded.arrays[name], array)
    assert np.array_equal(loaded.counter.counts, checkpoint_state.counter.counts)
    assert loaded.counter.total() == 3
    assert all(a == b for a, b in zip(loaded.trajectory, checkpoint_state.trajectory))
    assert loaded.model().params.keys() == checkpoint_state.arrays.keys()


def test_checkpoint_corruption_detected(checkpoint_state):
    data = bytearray(encode_checkpoint(checkpoint_state))
    data[len(data) // 2] ^= 0xFF
    with pytest.raises(CorruptCheckpoint):
        decode_checkpoint(bytes(data))
    with pytest.raises(CorruptCheckpoint):
        decode_checkpoint(bytes(data[:10]))


def test_checkpoint_header_checks(checkpoint_state):
    data = encode_checkpoint(checkpoint_state)
    with pytest.raises(NotACheckpoint):
        decode_checkpoint(b"PLY!" + data[4:])
    body = data[:4] + struct.pack("<I", 2) + data[8:-4]
    with pytest.raises(UnsupportedVersion):
        decode_checkpoint(body + struct.pack("<I", zlib.crc32(body)))


def test_checkpoint_rejects_trailing_bytes(checkpoint_state):
    body = encode_checkpoint(checkpoint_state)[:-4] + b"\x00\x00"
    with pytest.raises(CorruptCheckpoint):
        decode_checkpoint(body + struct.pack("<I", zlib.crc32(body)))


def test_ppm_quantizes_to_eight_bits(tmp_path, rng):
    image = rng.uniform(-0.2, 1.2, size=(5, 7, 3))
    write_ppm(tmp_path / "a.ppm", image)
    loaded = read_ppm(tmp_path / "a.ppm")
    assert loaded.shape == (5, 7, 3)
    assert np.abs(loaded - np.clip(image, 0.0, 1.0)).max() <= 0.5 / 255 + 1e-12


def test_pfm_keeps_row_order(tmp_path):
    depth = np.arange(12.0).reshape(3, 4)
    write_pfm(tmp_path / "d.pfm", depth)
    assert np.array_equal(read_pfm(tmp_path / "d.pfm"), depth)
    normals = np.stack([depth, -depth, depth / 2], axis=-1)
    write_pfm(tmp_path / "n.pfm", normals)
    assert np.array_equal(read_pfm(tmp_path / "n.pfm"), normals)
    assert (tmp_path / "d.pfm").read_bytes().startswith(b"Pf\n4 3\n-1.0\n")
    with pytest.raises(ValueError):
        write_pfm(tmp_path / "bad.pfm", np.zeros((2, 2, 2)))


def test_ply_keeps_mesh(tmp_path):
    mesh = Mesh([[0.0, 0.0, 0.1], [1.0, 0.0, 0.1], [1.0, 1.0, 0.1], [0.0, 1.0, 0.1]], [[0, 1, 2], [0, 2, 3]])
    write_ply(tmp_path / "m.ply", mesh)
    loaded = read_ply(tmp_path / "m.ply")
    assert np.array_equal(loaded.vertices, mesh.vertices)
    assert np.array_equal(loaded.faces, mesh.faces)
    assert np.array_equal(loaded.normals, mesh.normals)


def test_ply_errors(tmp_path):
    path = tmp_path / "m.ply"
    path.write_text("not a mesh\n")
    with pytest.raises(ParseError):
        read_ply(path)
    path.write_text("ply\nformat binary_little_endian 1.0\nend_header\n")
    with pytest.raises(ParseError):
        read_ply(path)
    path.write_text("ply\nformat ascii 1.0\nelement vertex 1\n")
    with pytest.raises(ParseError):
        read_ply(path)


def test_report_file(tmp_path):
    report = MetricReport(ate_rmse=0.0123, psnr=27.5)
    write_report(tmp_path / "r.txt", report)
    assert (tmp_path / "r.txt").read_text() == "ate_rmse=0.0123\npsnr=27.5\n"
    assert read_report(tmp_path / "r.txt").values() == report.values()
    (tmp_path / "r.txt").write_text("speed=3\n")
    with pytest.raises(ParseError):
        read_report(tmp_path / "r.txt")


def test_dataset_directory(micro_dataset, tmp_path):
    root = write_dataset(micro_dataset, tmp_path / "data")
    assert read_camera(root / "camera.txt") == micro_dataset.camera
    loaded = load_dataset(root)
    assert len(loaded) == len(micro_dataset)
    for mine, theirs in zip(loaded.frames, micro_dataset.frames):
        assert mine.index == theirs.index
        assert mine.pose_gt == theirs.pose_gt
        assert np.array_equal(mine.valid, theirs.valid)
        assert mine.depth_gt == pytest.approx(theirs.depth_gt, rel=1e-6)
        assert np.abs(mine.rgb - theirs.rgb).max() <= 0.5 / 255 + 1e-12
    assert sorted(loaded.cues.pairs()) == sorted(micro_dataset.cues.pairs())
    assert loaded.cues.depth_map(0) == pytest.approx(micro_dataset.cues.depth_map(0), rel=1e-6)
    assert len(loaded.heldout_rgb) == len(micro_dataset.heldout_rgb)
    assert loaded.mesh_gt is None


def test_missing_dataset(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path)
