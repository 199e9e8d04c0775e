from pathlib import Path
from typing import Optional

import click

from .common import config_options, out_option, resolve_config

router = click.Group()


@router.command("synth")
@config_options
@out_option("data/desk")
def synth(config_path: Optional[Path], preset: str, seed: Optional[int], out: Path) -> None:
    """
    Generate a synthetic desk-room dataset: RGB frames, ground truth, monocular cues
    and held-out views.
    """
    from controllers.synth import synthesize

    dataset = synthesize(resolve_config(config_path, preset, seed), out)
    click.echo(f"{len(dataset)} frames written to {out}")
