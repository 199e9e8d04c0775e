from typing import List, NamedTuple, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from diffengine import ops
from utils.geometry import DiffPose, PoseEstimate

from .errors import PixelOutOfRange


class Camera(BaseModel):
    """Pinhole intrinsics in pixels; +z forward, x right, y down."""

    model_config = ConfigDict(frozen=True)

    fx: float = Field(gt=0)
    fy: float = Field(gt=0)
    cx: float
    cy: float
    width: int = Field(ge=1)
    height: int = Field(ge=1)

    @model_validator(mode="after")
    def check_principal_point(self):
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError(f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height}")
        return self

    @classmethod
    def from_config(cls, synth) -> "Camera":
        return cls(fx=synth.fx, fy=synth.fy, cx=synth.cx, cy=synth.cy, width=synth.width, height=synth.height)

    def contains(self, u: float, v: float) -> bool:
        return 0 <= u < self.width and 0 <= v < self.height

    def direction(self, u: float, v: float) -> np.ndarray:
        """Unit camera-frame direction through the pixel centre."""
        d = np.array([(u + 0.5 - self.cx) / self.fx, (v + 0.5 - self.cy) / self.fy, 1.0])
        return d / np.linalg.norm(d)

    def directions(self, pixels: np.ndarray) -> np.ndarray:
        pixels = np.asarray(pixels, dtype=np.float64)
        d = np.stack([(pixels[:, 0] + 0.5 - self.cx) / self.fx, (pixels[:, 1] + 0.5 - self.cy) / self.fy,
                      np.ones(len(pixels))], axis=1)
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    def pixel_grid(self) -> np.ndarray:
        """(H*W, 2) integer (u, v) pairs in row-major order."""
        v, u = np.mgrid[0:self.height, 0:self.width]
        return np.stack([u.ravel(), v.ravel()], axis=1)

    def project(self, p: Sequence[ops.Scalar]) -> Tuple[ops.Scalar, ops.Scalar]:
        """Camera-frame point to continuous pixel coordinates (pixel centres at integers)."""
        inv_z = ops.reciprocal(p[2])
        return p[0] * inv_z * self.fx + (self.cx - 0.5), p[1] * inv_z * self.fy + (self.cy - 0.5)

    def project_batch(self, points: np.ndarray) -> np.ndarray:
        return np.stack([self.fx * points[:, 0] / points[:, 2] + self.cx - 0.5,
                         self.fy * points[:, 1] / points[:, 2] + self.cy - 0.5], axis=1)

    def unproject_batch(self, pixels: np.ndarray, depth: np.ndarray) -> np.ndarray:
        """Camera-frame points at `depth` along the unit ray of each pixel."""
        return self.directions(pixels) * np.asarray(depth, dtype=np.float64).reshape(-1, 1)

    def in_bounds(self, u: float, v: float) -> bool:
        """Continuous coordinate inside the image, pixel centres spanning [0, size-1]."""
        return 0.0 <= u <= self.width - 1 and 0.0 <= v <= self.height - 1

    def line(self) -> str:
        return f"{self.fx!r} {self.fy!r} {self.cx!r} {self.cy!r} {self.width} {self.height}"


class Ray(NamedTuple):
    origin: List[ops.Scalar]
    direction: List[ops.Scalar]

    def at(self, t: float) -> List[ops.Scalar]:
        return [self.origin[i] + self.direction[i] * t for i in range(3)]


def cast_ray(camera: Camera, pose: Union[PoseEstimate, DiffPose], pixel: Tuple[float, float]) -> Ray:
    u, v = pixel
    if not camera.contains(u, v):
        raise PixelOutOfRange(f"pixel ({u}, {v}) outside {camera.width}x{camera.height}")
    if isinstance(pose, PoseEstimate):
        pose = DiffPose.constant(pose)
    direction = pose.rotate(camera.direction(u, v).tolist())
    return Ray(list(pose.trans), direction)
