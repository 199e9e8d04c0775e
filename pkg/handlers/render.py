from pathlib import Path

import click

from .common import existing, out_option

router = click.Group()


@router.command("render")
@click.argument("checkpoint", type=existing("file"))
@click.argument("poses", type=existing("file"))
@out_option("renders")
@click.option("--depth/--no-depth", default=False, help="Also write rendered depth as PFM.")
def render(checkpoint: Path, poses: Path, out: Path, depth: bool) -> None:
    """Render one PPM per pose line of POSES from CHECKPOINT alone."""
    from controllers.render import render_views

    written = render_views(checkpoint, poses, out, with_depth=depth)
    click.echo(f"{len(written)} views written to {out}")
