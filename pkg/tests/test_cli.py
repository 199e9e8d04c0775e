import pytest

from src.app import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from storage import read_ply, read_ppm, read_report, read_trajectory


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--preset", "micro", "--out", str(root / "data")]) == EXIT_OK
    assert main(["run", str(root / "data"), "--preset", "micro", "--out", str(root / "run")]) == EXIT_OK
    return root


def test_usage_errors_exit_one(capsys):
    assert main(["teleport"]) == EXIT_USAGE
    assert main(["run"]) == EXIT_USAGE
    assert main(["synth", "--preset", "huge"]) == EXIT_USAGE
    assert "Usage" in capsys.readouterr().err


def test_runtime_errors_exit_two(tmp_path, capsys):
    assert main(["run", str(tmp_path), "--preset", "micro", "--out", str(tmp_path / "out")]) == EXIT_RUNTIME
    assert "FileNotFoundError" in capsys.readouterr().err
    config = tmp_path / "bad.ini"
    config.write_text("[rendering]\nsamples_per_ray = many\n")
    assert main(["synth", "--config", str(config), "--out", str(tmp_path / "data")]) == EXIT_RUNTIME
    assert "BadValue" in capsys.readouterr().err


def test_synth_writes_dataset(workspace):
    data = workspace / "data"
    assert (data / "camera.txt").read_text().split()[-2:] == ["16", "12"]
    assert len(read_trajectory(data / "poses_gt.txt")) == 6
    assert read_ppm(data / "rgb" / "0005.ppm").shape == (12, 16, 3)
    assert (data / "cues" / "flow" / "0000_0001.pfm").exists()
    assert len(read_ply(data / "mesh_gt.ply")) > 0


def test_run_writes_outputs(workspace):
    run = workspace / "run"
    assert (run / "checkpoint.bin").read_bytes()[:4] == b"NICR"
    trajectory = read_trajectory(run / "trajectory.txt")
    assert trajectory.ids == list(range(6))
    report = read_report(run / "report.txt")
    assert report.ate_rmse is not None and report.ate_rmse >= 0.0
    lines = (run / "run.log").read_text().splitlines()
    assert lines[0].startswith("kind=map frame=0")


def test_run_is_deterministic(workspace, tmp_path):
    again = tmp_path / "run"
    assert main(["run", str(workspace / "data"), "--preset", "micro", "--out", str(again)]) == EXIT_OK
    for name in ["checkpoint.bin", "trajectory.txt", "run.log", "report.txt"]:
        assert (again / name).read_bytes() == (workspace / "run" / name).read_bytes(), name


def test_eval_traj_matches_run_report(workspace, capsys):
    capsys.readouterr()
    code = main(["eval-traj", str(workspace / "run" / "trajectory.txt"), str(workspace / "data"),
                 "--preset", "micro"])
    assert code == EXIT_OK
    printed = capsys.readouterr().out.strip()
    expected = read_report(workspace / "run" / "report.txt").ate_rmse
    assert printed == f"ate_rmse={expected!r}"


def test_mesh_and_eval_mesh(workspace, capsys):
    out = workspace / "mesh.ply"
    assert main(["mesh", str(workspace / "run" / "checkpoint.bin"), "--out", str(out), "--resolution", "16"]) == EXIT_OK
    assert len(read_ply(out)) > 0
    capsys.readouterr()
    code = main(["eval-mesh", str(out), str(workspace / "run" / "trajectory.txt"), str(workspace / "data"),
                 "--preset", "micro"])
    assert code == EXIT_OK
    keys = [line.split("=")[0] for line in capsys.readouterr().out.split()]
    assert keys == ["accuracy", "completion", "completion_ratio", "normal_consistency"]


def test_render_from_checkpoint(workspace):
    out = workspace / "renders"
    code = main(["render", str(workspace / "run" / "checkpoint.bin"), str(workspace / "data" / "heldout" / "poses.txt"),
                 "--out", str(out), "--depth"])
    assert code == EXIT_OK
    assert read_ppm(out / "0001.ppm").shape == (12, 16, 3)
    assert (out / "0000_depth.pfm").exists()


def test_eval_render(workspace, capsys):
    capsys.readouterr()
    assert main(["eval-render", str(workspace / "run" / "checkpoint.bin"), str(workspace / "data")]) == EXIT_OK
    keys = [line.split("=")[0] for line in capsys.readouterr().out.split()]
    assert keys == ["psnr", "ssim"]


@pytest.mark.slow
def test_gradcheck_passes(capsys):
    assert main(["gradcheck"]) == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out
