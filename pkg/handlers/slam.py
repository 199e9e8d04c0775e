from pathlib import Path
from typing import Optional

import click

from .common import config_options, echo_report, existing, out_option, resolve_config

router = click.Group()


@router.command("run")
@click.argument("dataset", type=existing("dir"))
@config_options
@out_option("runs/desk")
def run(dataset: Path, config_path: Optional[Path], preset: str, seed: Optional[int], out: Path) -> None:
    """
    Track and map every frame of DATASET, then write checkpoint.bin, trajectory.txt,
    the step log and report.txt to --out.
    """
    from controllers.slam_run import run as run_controller

    report = run_controller(resolve_config(config_path, preset, seed), dataset, out)
    echo_report(report)
