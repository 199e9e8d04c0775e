import logging
from pathlib import Path

from config.settings import RunConfig
from evalkit.errors import EmptyMesh
from evalkit.mesh import extract_mesh
from evalkit.report import MetricReport
from evalkit.trajectory import Trajectory
from fields.model import Stage
from rendering.camera import Camera
from slam import run_slam
from storage import CheckpointState, load_checkpoint, load_dataset, save_checkpoint, write_report, write_trajectory

from .evaluation import full_report

CHECKPOINT = "checkpoint.bin"
TRAJECTORY = "trajectory.txt"
REPORT = "report.txt"


def with_camera(config: RunConfig, camera: Camera) -> RunConfig:
    """Copy of `config` whose synth camera matches the dataset, so a checkpoint renders on its own."""
    synth = config.synth.model_copy(update=dict(fx=camera.fx, fy=camera.fy, cx=camera.cx, cy=camera.cy,
                                                width=camera.width, height=camera.height))
    return config.model_copy(update={"synth": synth})


def run(config: RunConfig, dataset_path: Path, out: Path) -> MetricReport:
    dataset = load_dataset(dataset_path)
    config = with_camera(config, dataset.camera)
    out.mkdir(parents=True, exist_ok=True)
    logging.info(f"Running SLAM on {len(dataset)} frames from {dataset_path} (preset {config.preset})")

    result = run_slam(dataset, config, step_log=out / config.run.log_file)
    save_checkpoint(CheckpointState(config, result.model.arrays(), result.counter, result.trajectory),
                    out / CHECKPOINT)
    write_trajectory(out / TRAJECTORY, Trajectory.from_poses(result.trajectory))

    # metrics come from the reloaded checkpoint so the standalone eval commands agree exactly
    state = load_checkpoint(out / CHECKPOINT)
    model = state.model()
    try:
        mesh = extract_mesh(model, state.config.eval.mesh_resolution, Stage.FULL)
    except EmptyMesh as exc:
        logging.warning(f"No surface to evaluate: {exc}")
        mesh = None
    report = full_report(model, state.counter, state.trajectory, dataset, mesh, state.config)
    write_report(out / REPORT, report)
    logging.info(f"Wrote {CHECKPOINT}, {TRAJECTORY} and {REPORT} to {out}")
    return report
