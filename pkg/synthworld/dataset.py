import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.transform import Rotation
from tqdm import tqdm

from losses.cues import CueBundle
from rendering.camera import Camera
from utils.geometry import PoseEstimate

from .scene import AnalyticScene, sphere_trace_batch
from .trajectory import TrajectorySpec


class CueNoise(BaseModel):
    depth_scale_min: float = Field(0.5, gt=0)
    depth_scale_max: float = Field(2.0, gt=0)
    depth_shift_max: float = Field(0.1, ge=0)
    normal_noise_deg: float = Field(3.0, ge=0)
    flow_max_gap: int = Field(20, ge=1)

    @classmethod
    def from_config(cls, synth) -> "CueNoise":
        return cls(depth_scale_min=synth.depth_scale_min, depth_scale_max=synth.depth_scale_max,
                   depth_shift_max=synth.depth_shift_max, normal_noise_deg=synth.normal_noise_deg,
                   flow_max_gap=synth.flow_max_gap)

    @classmethod
    def zero(cls, flow_max_gap: int = 20) -> "CueNoise":
        return cls(depth_scale_min=1.0, depth_scale_max=1.0, depth_shift_max=0.0, normal_noise_deg=0.0,
                   flow_max_gap=flow_max_gap)


class FrameData(BaseModel):
    """One input view. Normals are unit vectors in the camera frame; invalid pixels are zero."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int
    rgb: np.ndarray
    pose_gt: PoseEstimate
    depth_gt: Optional[np.ndarray] = None
    normal_gt: Optional[np.ndarray] = None
    valid: Optional[np.ndarray] = None


class SyntheticDataset(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    camera: Camera
    frames: List[FrameData]
    cues: CueBundle
    heldout_poses: List[PoseEstimate] = Field(default_factory=list)
    heldout_rgb: List[np.ndarray] = Field(default_factory=list)
    depth_affine: Dict[int, Tuple[float, float]] = Field(default_factory=dict)
    mesh_gt: Optional[object] = None

    def __len__(self) -> int:
        return len(self.frames)

    def gt_trajectory(self) -> List[PoseEstimate]:
        return [f.pose_gt for f in self.frames]


def render_view(scene: AnalyticScene, camera: Camera, pose: PoseEstimate, t_max: float):
    """(rgb, depth, camera-frame normals, valid) by sphere tracing with headlight shading."""
    pixels = camera.pixel_grid()
    directions = camera.directions(pixels) @ pose.rotation_matrix.T
    origins = np.broadcast_to(pose.translation, directions.shape).copy()
    t = sphere_trace_batch(scene, origins, directions, t_max)
    valid = np.isfinite(t)
    depth = np.where(valid, t, 0.0)
    points = origins + directions * depth[:, None]
    normals_world = scene.distance_gradient_batch(points)
    normals_world /= np.maximum(np.linalg.norm(normals_world, axis=1, keepdims=True), 1e-12)
    shading = np.maximum(0.0, -np.sum(normals_world * directions, axis=1))
    rgb = scene.color_batch(points) * shading[:, None]
    rgb[~valid] = 0.0
    normals_cam = normals_world @ pose.rotation_matrix
    normals_cam[~valid] = 0.0
    shape = (camera.height, camera.width)
    return (np.clip(rgb, 0.0, 1.0).reshape(shape + (3,)), depth.reshape(shape),
            normals_cam.reshape(shape + (3,)), valid.reshape(shape))


def exact_flow(camera: Camera, depth: np.ndarray, valid: np.ndarray, pose_m: PoseEstimate,
               pose_n: PoseEstimate) -> np.ndarray:
    """Displacement of each pixel of frame m into frame n, with a validity channel."""
    pixels = camera.pixel_grid()
    points_m = camera.unproject_batch(pixels, depth.reshape(-1))
    relative = pose_n.inverse().compose(pose_m)
    points_n = relative.transform_points(points_m)
    ahead = points_n[:, 2] > 1e-6
    projected = camera.project_batch(np.where(ahead[:, None], points_n, 1.0))
    inside = ((projected[:, 0] >= 0.0) & (projected[:, 0] <= camera.width - 1)
              & (projected[:, 1] >= 0.0) & (projected[:, 1] <= camera.height - 1))
    ok = valid.reshape(-1) & ahead & inside
    flow = np.zeros((len(pixels), 3))
    flow[ok, :2] = projected[ok] - pixels[ok]
    flow[ok, 2] = 1.0
    return flow.reshape(camera.height, camera.width, 3)


def perturb_normals(normals: np.ndarray, valid: np.ndarray, sigma_deg: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Rotate each valid normal about a random axis by an angle drawn from N(0, sigma)."""
    if sigma_deg == 0.0:
        return normals.copy()
    flat = normals.reshape(-1, 3)
    axes = rng.normal(size=flat.shape)
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = np.radians(rng.normal(0.0, sigma_deg, size=len(flat)))
    out = Rotation.from_rotvec(axes * angles[:, None]).apply(flat)
    out /= np.maximum(np.linalg.norm(out, axis=1, keepdims=True), 1e-12)
    out[~valid.reshape(-1)] = 0.0
    return out.reshape(normals.shape)


def generate_dataset(scene: AnalyticScene, trajectory: TrajectorySpec, camera: Camera, noise: CueNoise,
                     rng: np.random.Generator, t_max: float = 2.0 * np.sqrt(3.0),
                     heldout_views: int = 0) -> SyntheticDataset:
    frames: List[FrameData] = []
    cues = CueBundle()
    affine: Dict[int, Tuple[float, float]] = {}
    for index, pose in enumerate(tqdm(trajectory.poses(), desc="Rendering frames", leave=False)):
        rgb, depth, normals, valid = render_view(scene, camera, pose, t_max)
        if not valid.all():
            logging.warning(f"Frame {index}: {int((~valid).sum())} pixels missed the scene")
        frames.append(FrameData(index=index, rgb=rgb, pose_gt=pose, depth_gt=depth, normal_gt=normals, valid=valid))
        scale = float(rng.uniform(noise.depth_scale_min, noise.depth_scale_max))
        shift = float(rng.uniform(-noise.depth_shift_max, noise.depth_shift_max)) if noise.depth_shift_max else 0.0
        affine[index] = (scale, shift)
        if scale == 1.0 and shift == 0.0:
            cues.depth[index] = depth.copy()
        else:
            cues.depth[index] = np.where(valid, scale * depth + shift, 0.0)
        cues.normal[index] = perturb_normals(normals, valid, noise.normal_noise_deg, rng)
    for m, frame_m in enumerate(frames):
        for n, frame_n in enumerate(frames):
            if m != n and abs(m - n) <= noise.flow_max_gap:
                cues.flow[(m, n)] = exact_flow(camera, frame_m.depth_gt, frame_m.valid,
                                               frame_m.pose_gt, frame_n.pose_gt)
    heldout_poses = trajectory.heldout_poses(heldout_views)
    heldout_rgb = [render_view(scene, camera, pose, t_max)[0] for pose in heldout_poses]
    logging.info(f"Generated {len(frames)} frames, {len(cues.flow)} flow fields, {len(heldout_poses)} held-out views")
    return SyntheticDataset(camera=camera, frames=frames, cues=cues, heldout_poses=heldout_poses,
                            heldout_rgb=heldout_rgb, depth_affine=affine)
