import logging
from pathlib import Path
from typing import List

import numpy as np
from tqdm import tqdm

from fields.model import Stage
from rendering.batch import render_image
from rendering.camera import Camera
from rendering.density import BetaSchedule
from storage import load_checkpoint, read_trajectory, write_pfm, write_ppm


def render_views(checkpoint_path: Path, poses_path: Path, out: Path, with_depth: bool = False) -> List[Path]:
    """One PPM per pose in `poses_path`, named by its frame id; the checkpoint alone defines the scene."""
    state = load_checkpoint(checkpoint_path)
    config = state.config
    model = state.model()
    camera = Camera.from_config(config.synth)
    schedule = BetaSchedule.from_config(config.rendering, state.counter)
    poses = read_trajectory(poses_path)
    rng = np.random.default_rng([config.run.seed, 3])
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for frame_id, pose in tqdm(list(zip(poses.ids, poses.poses)), desc="Rendering", leave=False):
        image = render_image(model, camera, pose, schedule, Stage.FULL, config.rendering.samples_per_ray,
                             config.rendering.near, config.rendering.far, rng)
        path = out / f"{frame_id:04d}.ppm"
        write_ppm(path, image["color"])
        if with_depth:
            write_pfm(out / f"{frame_id:04d}_depth.pfm", image["depth"])
        written.append(path)
    logging.info(f"Rendered {len(written)} views to {out}")
    return written
