from .dataset import CueNoise, FrameData, SyntheticDataset, exact_flow, generate_dataset, render_view
from .errors import InvalidScene
from .field import AnalyticField
from .scene import AnalyticScene, Box, Room, Sphere, desk_scene, scene_sdf, sphere_trace, sphere_trace_batch
from .trajectory import TrajectorySpec

__all__ = [
    "AnalyticField",
    "AnalyticScene",
    "Box",
    "CueNoise",
    "FrameData",
    "InvalidScene",
    "Room",
    "Sphere",
    "SyntheticDataset",
    "TrajectorySpec",
    "desk_scene",
    "exact_flow",
    "generate_dataset",
    "render_view",
    "scene_sdf",
    "sphere_trace",
    "sphere_trace_batch",
]
