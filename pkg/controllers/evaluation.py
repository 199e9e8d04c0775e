import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from config.settings import RunConfig
from evalkit import EmptyMesh, Mesh, MetricReport, Trajectory, align_umeyama, ate_rmse, image_metrics, mesh_metrics
from evalkit.errors import DegenerateGeometry, InsufficientMatches
from evalkit.trajectory import Sim3Transform
from fields.model import SceneModel, Stage
from rendering.batch import render_image
from rendering.camera import Camera
from rendering.density import BetaSchedule, VoxelCounter
from storage import load_checkpoint, load_dataset, read_ply, read_trajectory
from synthworld.dataset import SyntheticDataset
from utils.geometry import PoseEstimate


def trajectory_report(est: Trajectory, gt: Trajectory, config: RunConfig) -> MetricReport:
    return MetricReport(ate_rmse=ate_rmse(est, gt, config.eval.align_scale))


def mesh_report(mesh: Mesh, mesh_gt: Mesh, est: Trajectory, gt: Trajectory, config: RunConfig) -> MetricReport:
    """Mesh metrics after moving the estimate into the ground-truth frame with the trajectory alignment."""
    transform = align_umeyama(est, gt, config.eval.align_scale)
    rng = np.random.default_rng([config.run.seed, 4])
    metrics = mesh_metrics(mesh.transformed(transform), mesh_gt, config.eval.completion_threshold,
                           config.eval.mesh_samples, rng)
    return MetricReport(**metrics._asdict())


def render_report(model: SceneModel, counter: VoxelCounter, camera: Camera, heldout_poses: List[PoseEstimate],
                  heldout_rgb: List[np.ndarray], transform: Sim3Transform, config: RunConfig) -> MetricReport:
    """Mean PSNR and SSIM over held-out views, their poses mapped into the estimated frame."""
    if not heldout_poses:
        return MetricReport()
    to_estimate = transform.inverse()
    schedule = BetaSchedule.from_config(config.rendering, counter)
    rng = np.random.default_rng([config.run.seed, 3])
    scores = []
    for pose, target in zip(heldout_poses, heldout_rgb):
        image = render_image(model, camera, to_estimate.apply_pose(pose), schedule, Stage.FULL,
                             config.rendering.samples_per_ray, config.rendering.near, config.rendering.far, rng)
        scores.append(image_metrics(image["color"], target))
    psnr, ssim = np.mean(scores, axis=0)
    return MetricReport(psnr=float(psnr), ssim=float(ssim))


def full_report(model: SceneModel, counter: VoxelCounter, trajectory: List[PoseEstimate], dataset: SyntheticDataset,
                mesh: Optional[Mesh], config: RunConfig) -> MetricReport:
    """Everything `run` reports; a metric that cannot be computed is logged and left out."""
    est = Trajectory.from_poses(trajectory)
    gt = Trajectory.from_poses(dataset.gt_trajectory())
    report = MetricReport()
    try:
        transform = align_umeyama(est, gt, config.eval.align_scale)
        report = report.merged(trajectory_report(est, gt, config))
    except (InsufficientMatches, DegenerateGeometry) as exc:
        logging.warning(f"Skipping trajectory-dependent metrics: {exc}")
        return report
    if mesh is not None and dataset.mesh_gt is not None:
        try:
            report = report.merged(mesh_report(mesh, dataset.mesh_gt, est, gt, config))
        except EmptyMesh as exc:
            logging.warning(f"Skipping mesh metrics: {exc}")
    report = report.merged(render_report(model, counter, dataset.camera, dataset.heldout_poses,
                                         dataset.heldout_rgb, transform, config))
    logging.info(f"Report: {report.values()}")
    return report


def _load_ground_truth(dataset_path: Path) -> Tuple[SyntheticDataset, Trajectory]:
    dataset = load_dataset(dataset_path)
    return dataset, Trajectory.from_poses(dataset.gt_trajectory())


def evaluate_trajectory(config: RunConfig, trajectory_path: Path, dataset_path: Path) -> MetricReport:
    _, gt = _load_ground_truth(dataset_path)
    return trajectory_report(read_trajectory(trajectory_path), gt, config)


def evaluate_mesh(config: RunConfig, mesh_path: Path, trajectory_path: Path, dataset_path: Path) -> MetricReport:
    dataset, gt = _load_ground_truth(dataset_path)
    if dataset.mesh_gt is None:
        raise FileNotFoundError(f"{dataset_path} has no mesh_gt.ply")
    return mesh_report(read_ply(mesh_path), dataset.mesh_gt, read_trajectory(trajectory_path), gt, config)


def evaluate_render(checkpoint_path: Path, dataset_path: Path) -> MetricReport:
    """Held-out views rendered from a checkpoint; its own config drives rendering and alignment."""
    dataset, gt = _load_ground_truth(dataset_path)
    state = load_checkpoint(checkpoint_path)
    est = Trajectory.from_poses(state.trajectory)
    transform = align_umeyama(est, gt, state.config.eval.align_scale)
    return render_report(state.model(), state.counter, dataset.camera, dataset.heldout_poses,
                         dataset.heldout_rgb, transform, state.config)
