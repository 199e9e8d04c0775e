from .errors import TrackingDiverged, UnknownFrame
from .frames import FrameStore, select_mapping_frames
from .mapping import STAGE_GROUPS, Mapper, MappingOutcome, ba_frames, mapping_step, stage_for
from .pipeline import SlamResult, StepRecord, attach_step_log, mapping_schedule, run_slam
from .tracking import TrackingOutcome, constant_velocity, track_frame

__all__ = [
    "FrameStore",
    "Mapper",
    "MappingOutcome",
    "STAGE_GROUPS",
    "SlamResult",
    "StepRecord",
    "TrackingDiverged",
    "TrackingOutcome",
    "UnknownFrame",
    "attach_step_log",
    "ba_frames",
    "constant_velocity",
    "mapping_schedule",
    "mapping_step",
    "run_slam",
    "select_mapping_frames",
    "stage_for",
    "track_frame",
]
