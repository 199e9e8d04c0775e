from pathlib import Path
from typing import Optional

import click

from .common import config_options, echo_report, existing, resolve_config

router = click.Group()


@router.command("eval-traj")
@click.argument("trajectory", type=existing("file"))
@click.argument("dataset", type=existing("dir"))
@config_options
def eval_traj(trajectory: Path, dataset: Path, config_path: Optional[Path], preset: str,
              seed: Optional[int]) -> None:
    """ATE RMSE of TRAJECTORY against DATASET's ground truth after Sim(3) alignment."""
    from controllers.evaluation import evaluate_trajectory

    echo_report(evaluate_trajectory(resolve_config(config_path, preset, seed), trajectory, dataset))


@router.command("eval-mesh")
@click.argument("mesh", type=existing("file"))
@click.argument("trajectory", type=existing("file"))
@click.argument("dataset", type=existing("dir"))
@config_options
def eval_mesh(mesh: Path, trajectory: Path, dataset: Path, config_path: Optional[Path], preset: str,
              seed: Optional[int]) -> None:
    """
    Accuracy, completion, completion ratio and normal consistency of MESH, moved into
    the ground-truth frame by the alignment of TRAJECTORY.
    """
    from controllers.evaluation import evaluate_mesh

    echo_report(evaluate_mesh(resolve_config(config_path, preset, seed), mesh, trajectory, dataset))


@router.command("eval-render")
@click.argument("checkpoint", type=existing("file"))
@click.argument("dataset", type=existing("dir"))
def eval_render(checkpoint: Path, dataset: Path) -> None:
    """Mean PSNR and SSIM of CHECKPOINT's renders at DATASET's held-out poses."""
    from controllers.evaluation import evaluate_render

    echo_report(evaluate_render(checkpoint, dataset))
