import logging
from pathlib import Path

import numpy as np

from config.settings import RunConfig
from evalkit.mesh import extract_mesh
from rendering.camera import Camera
from storage.dataset_io import write_dataset
from synthworld import AnalyticField, CueNoise, SyntheticDataset, TrajectorySpec, desk_scene, generate_dataset


def build_dataset(config: RunConfig, with_mesh: bool = True) -> SyntheticDataset:
    """Desk scene, trajectory and cues from the `synth` section, seeded by `run.seed`."""
    synth = config.synth
    scene = desk_scene(synth.room_half_extent, synth.texture_seed, config.model.sign_convention)
    dataset = generate_dataset(scene, TrajectorySpec.from_config(synth), Camera.from_config(synth),
                               CueNoise.from_config(synth), np.random.default_rng([config.run.seed, 2]),
                               t_max=config.rendering.far, heldout_views=synth.heldout_views)
    if with_mesh:
        dataset.mesh_gt = extract_mesh(AnalyticField(scene), config.eval.mesh_resolution)
    return dataset


def synthesize(config: RunConfig, out: Path) -> SyntheticDataset:
    dataset = build_dataset(config)
    write_dataset(dataset, out, dataset.mesh_gt)
    logging.info(f"Synthetic dataset ready at {out}")
    return dataset
