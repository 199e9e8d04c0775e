from typing import Dict, List, Sequence

import numpy as np

from utils.geometry import PoseEstimate

from .errors import UnknownFrame


class FrameStore:
    """Input images and current pose estimates, with a keyframe every `keyframe_interval` frames."""

    def __init__(self, keyframe_interval: int = 10):
        self.keyframe_interval = keyframe_interval
        self.images: Dict[int, np.ndarray] = {}
        self.poses: Dict[int, PoseEstimate] = {}
        self.keyframes: List[int] = []

    def __len__(self) -> int:
        return len(self.images)

    def __contains__(self, frame_id: int) -> bool:
        return frame_id in self.images

    @property
    def next_id(self) -> int:
        return len(self.images)

    def add(self, frame_id: int, image: np.ndarray, pose: PoseEstimate) -> None:
        if frame_id != self.next_id:
            raise UnknownFrame(f"expected frame {self.next_id}, got {frame_id}")
        self.images[frame_id] = image
        self.poses[frame_id] = pose
        if frame_id % self.keyframe_interval == 0:
            self.keyframes.append(frame_id)

    def image(self, frame_id: int) -> np.ndarray:
        if frame_id not in self.images:
            raise UnknownFrame(f"frame {frame_id} is not registered")
        return self.images[frame_id]

    def pose(self, frame_id: int) -> PoseEstimate:
        if frame_id not in self.poses:
            raise UnknownFrame(f"frame {frame_id} is not registered")
        return self.poses[frame_id]

    def set_pose(self, frame_id: int, pose: PoseEstimate) -> None:
        if frame_id not in self.poses:
            raise UnknownFrame(f"frame {frame_id} is not registered")
        self.poses[frame_id] = pose

    def trajectory(self) -> List[PoseEstimate]:
        return [self.poses[i] for i in range(len(self.poses))]


def _draw(pool: Sequence[int], count: int, rng: np.random.Generator) -> List[int]:
    if len(pool) <= count:
        return list(pool)
    return [int(pool[i]) for i in rng.choice(len(pool), size=count, replace=False)]


def select_mapping_frames(store: FrameStore, current_id: int, rng: np.random.Generator,
                          global_count: int = 5, recent_count: int = 10, recent_window: int = 20) -> List[int]:
    """Keyframes drawn from the whole list and from the latest window, plus the current frame."""
    if current_id not in store:
        raise UnknownFrame(f"frame {current_id} is not registered")
    chosen = _draw(store.keyframes, global_count, rng)
    chosen += _draw(store.keyframes[-recent_window:], recent_count, rng)
    return sorted(set(chosen) | {current_id})
