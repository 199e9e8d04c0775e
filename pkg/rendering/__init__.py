from .batch import render_image, render_rays
from .camera import Camera, Ray, cast_ray
from .density import BetaParams, BetaSchedule, VoxelCounter, local_beta, record_samples, sdf_to_density
from .errors import InvalidBeta, InvalidBounds, PixelOutOfRange
from .renderer import RenderResult, render_ray
from .sampling import SampleSet, sample_along_ray, sample_many

__all__ = [
    "BetaParams",
    "BetaSchedule",
    "Camera",
    "InvalidBeta",
    "InvalidBounds",
    "PixelOutOfRange",
    "Ray",
    "RenderResult",
    "SampleSet",
    "VoxelCounter",
    "cast_ray",
    "local_beta",
    "record_samples",
    "render_image",
    "render_ray",
    "render_rays",
    "sample_along_ray",
    "sample_many",
    "sdf_to_density",
]
