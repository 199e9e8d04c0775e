import logging
from pathlib import Path

from evalkit.mesh import Mesh, extract_mesh
from fields.model import Stage
from storage import load_checkpoint, write_ply


def export_mesh(checkpoint_path: Path, out: Path, resolution: int = 0) -> Mesh:
    """Marching-cubes mesh of a checkpoint's field; resolution 0 keeps the checkpoint's `eval.mesh_resolution`."""
    state = load_checkpoint(checkpoint_path)
    mesh = extract_mesh(state.model(), resolution or state.config.eval.mesh_resolution, Stage.FULL)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ply(out, mesh)
    logging.info(f"Wrote mesh to {out}")
    return mesh
