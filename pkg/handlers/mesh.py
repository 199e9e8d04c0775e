from pathlib import Path

import click

from .common import existing, out_option

router = click.Group()


@router.command("mesh")
@click.argument("checkpoint", type=existing("file"))
@out_option("mesh.ply")
@click.option("--resolution", type=click.IntRange(min=16), default=None,
              help="Marching-cubes resolution; defaults to the checkpoint's eval.mesh_resolution.")
def mesh(checkpoint: Path, out: Path, resolution) -> None:
    """Extract the zero level set of CHECKPOINT's field as an ASCII PLY mesh."""
    from controllers.mesh import export_mesh

    result = export_mesh(checkpoint, out, resolution or 0)
    click.echo(f"{len(result.vertices)} vertices, {len(result.faces)} triangles written to {out}")
