from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import MissingCue


class CueBundle(BaseModel):
    """Monocular depth/normal maps per frame and flow fields per ordered frame pair.

    Depth is 0 where invalid. Normals are unit vectors in the camera frame.
    Flow maps are (H, W, 3): displacement du, dv and a 0/1 validity channel.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    depth: Dict[int, np.ndarray] = Field(default_factory=dict)
    normal: Dict[int, np.ndarray] = Field(default_factory=dict)
    flow: Dict[Tuple[int, int], np.ndarray] = Field(default_factory=dict)

    def depth_map(self, frame: int) -> np.ndarray:
        if frame not in self.depth:
            raise MissingCue(f"no depth cue for frame {frame}")
        return self.depth[frame]

    def normal_map(self, frame: int) -> np.ndarray:
        if frame not in self.normal:
            raise MissingCue(f"no normal cue for frame {frame}")
        return self.normal[frame]

    def has_flow(self, source: int, target: int) -> bool:
        return (source, target) in self.flow

    def flow_map(self, source: int, target: int) -> np.ndarray:
        if (source, target) not in self.flow:
            raise MissingCue(f"no flow cue for frame pair {source}->{target}")
        return self.flow[(source, target)]

    def pairs(self) -> List[Tuple[int, int]]:
        return sorted(self.flow)
