from typing import Optional

from utils.errors import SlamError
from utils.geometry import PoseEstimate


class TrackingDiverged(SlamError):
    """Carries the initialization so the caller can keep going."""

    def __init__(self, frame: int, pose: PoseEstimate, detail: Optional[str] = None):
        super().__init__(f"tracking diverged on frame {frame}" + (f": {detail}" if detail else ""))
        self.frame = frame
        self.pose = pose


class UnknownFrame(SlamError):
    pass
