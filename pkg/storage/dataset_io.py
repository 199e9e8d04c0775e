"""Dataset directory layout written by `synth` and read by every other command."""
import logging
import re
from pathlib import Path
from typing import Optional, Union

import numpy as np

from evalkit.mesh import Mesh
from evalkit.trajectory import Trajectory
from losses.cues import CueBundle
from rendering.camera import Camera
from synthworld.dataset import FrameData, SyntheticDataset

from .formats import read_pfm, read_ply, read_ppm, read_trajectory, write_pfm, write_ply, write_ppm, write_trajectory

FLOW_NAME = re.compile(r"^(\d{4,})_(\d{4,})\.pfm$")


def _name(index: int, suffix: str) -> str:
    return f"{index:04d}.{suffix}"


def write_dataset(dataset: SyntheticDataset, root: Union[str, Path], mesh_gt: Optional[Mesh] = None) -> Path:
    root = Path(root)
    for sub in ("rgb", "depth_gt", "normal_gt", "cues/depth", "cues/normal", "cues/flow", "heldout/rgb"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    (root / "camera.txt").write_text(dataset.camera.line() + "\n", encoding="utf-8")
    write_trajectory(root / "poses_gt.txt", Trajectory.from_poses(dataset.gt_trajectory()))
    for frame in dataset.frames:
        i = frame.index
        write_ppm(root / "rgb" / _name(i, "ppm"), frame.rgb)
        write_pfm(root / "depth_gt" / _name(i, "pfm"), frame.depth_gt)
        write_pfm(root / "normal_gt" / _name(i, "pfm"), frame.normal_gt)
    for i, depth in dataset.cues.depth.items():
        write_pfm(root / "cues" / "depth" / _name(i, "pfm"), depth)
    for i, normal in dataset.cues.normal.items():
        write_pfm(root / "cues" / "normal" / _name(i, "pfm"), normal)
    for (m, n), flow in dataset.cues.flow.items():
        write_pfm(root / "cues" / "flow" / f"{m:04d}_{n:04d}.pfm", flow)
    write_trajectory(root / "heldout" / "poses.txt", Trajectory.from_poses(dataset.heldout_poses))
    for i, rgb in enumerate(dataset.heldout_rgb):
        write_ppm(root / "heldout" / "rgb" / _name(i, "ppm"), rgb)
    if mesh_gt is not None:
        write_ply(root / "mesh_gt.ply", mesh_gt)
    logging.info(f"Wrote dataset with {len(dataset)} frames to {root}")
    return root


def read_camera(path: Union[str, Path]) -> Camera:
    fx, fy, cx, cy, width, height = Path(path).read_text(encoding="utf-8").split()
    return Camera(fx=float(fx), fy=float(fy), cx=float(cx), cy=float(cy), width=int(width), height=int(height))


def load_dataset(root: Union[str, Path]) -> SyntheticDataset:
    root = Path(root)
    if not (root / "camera.txt").exists():
        raise FileNotFoundError(f"{root} is not a dataset directory (no camera.txt)")
    camera = read_camera(root / "camera.txt")
    gt = read_trajectory(root / "poses_gt.txt")
    frames = []
    for i, pose in zip(gt.ids, gt.poses):
        depth = read_pfm(root / "depth_gt" / _name(i, "pfm"))
        frames.append(FrameData(index=i, rgb=read_ppm(root / "rgb" / _name(i, "ppm")), pose_gt=pose,
                                depth_gt=depth, normal_gt=read_pfm(root / "normal_gt" / _name(i, "pfm")),
                                valid=depth > 0.0))
    cues = CueBundle()
    for path in sorted((root / "cues" / "depth").glob("*.pfm")):
        cues.depth[int(path.stem)] = read_pfm(path)
    for path in sorted((root / "cues" / "normal").glob("*.pfm")):
        cues.normal[int(path.stem)] = read_pfm(path)
    for path in sorted((root / "cues" / "flow").glob("*.pfm")):
        match = FLOW_NAME.match(path.name)
        if match:
            cues.flow[(int(match.group(1)), int(match.group(2)))] = read_pfm(path)
    heldout_poses, heldout_rgb = [], []
    if (root / "heldout" / "poses.txt").exists():
        heldout = read_trajectory(root / "heldout" / "poses.txt")
        heldout_poses = heldout.poses
        heldout_rgb = [read_ppm(root / "heldout" / "rgb" / _name(i, "ppm")) for i in heldout.ids]
    mesh_gt = read_ply(root / "mesh_gt.ply") if (root / "mesh_gt.ply").exists() else None
    return SyntheticDataset(camera=camera, frames=frames, cues=cues, heldout_poses=heldout_poses,
                            heldout_rgb=heldout_rgb, mesh_gt=mesh_gt)
