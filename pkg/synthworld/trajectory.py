import math
from typing import List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, Field

from utils.geometry import PoseEstimate, look_at, matrix_to_quat


class TrajectorySpec(BaseModel):
    """Camera path around a look-at target; phase 0 sits at target + (0, height, -radius)."""

    kind: Literal["circle", "lemniscate"] = "circle"
    radius: float = Field(0.45, gt=0)
    height: float = 0.0
    frames: int = Field(20, ge=1)
    arc_degrees: float = Field(60.0, gt=0)
    target: Tuple[float, float, float] = (0.0, 0.0, 0.45)

    @classmethod
    def from_config(cls, synth) -> "TrajectorySpec":
        return cls(kind=synth.trajectory, radius=synth.trajectory_radius, height=synth.trajectory_height,
                   frames=synth.frames, arc_degrees=synth.trajectory_arc_degrees,
                   target=(synth.target_x, synth.target_y, synth.target_z))

    def eye(self, phase: float) -> np.ndarray:
        """Camera centre at `phase` in [0, 1] along the path."""
        sweep = math.radians(self.arc_degrees) * phase
        target = np.asarray(self.target)
        if self.kind == "circle":
            offset = np.array([-self.radius * math.sin(sweep), self.height, -self.radius * math.cos(sweep)])
        else:
            # figure-eight in the plane facing the target
            offset = np.array([0.5 * self.radius * math.sin(2.0 * sweep),
                               self.height + 0.25 * self.radius * math.sin(4.0 * sweep), -self.radius])
        return target + offset

    def pose(self, phase: float) -> PoseEstimate:
        eye = self.eye(phase)
        return PoseEstimate(matrix_to_quat(look_at(eye, self.target)), eye)

    def phases(self) -> List[float]:
        if self.frames == 1:
            return [0.0]
        return [i / (self.frames - 1) for i in range(self.frames)]

    def poses(self) -> List[PoseEstimate]:
        return [self.pose(p) for p in self.phases()]

    def heldout_poses(self, count: int) -> List[PoseEstimate]:
        """Views halfway between consecutive frames, spread along the path."""
        if count <= 0:
            return []
        gaps = max(self.frames - 1, 1)
        phases = [(math.floor((i + 0.5) * gaps / count) + 0.5) / gaps for i in range(count)]
        return [self.pose(p) for p in phases]
