from .checkpoint import CheckpointState, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .dataset_io import load_dataset, read_camera, write_dataset
from .errors import CorruptCheckpoint, NotACheckpoint, ParseError, UnsupportedVersion
from .formats import (
    read_pfm,
    read_ply,
    read_ppm,
    read_report,
    read_trajectory,
    write_pfm,
    write_ply,
    write_ppm,
    write_report,
    write_trajectory,
)

__all__ = [
    "CheckpointState",
    "CorruptCheckpoint",
    "NotACheckpoint",
    "ParseError",
    "UnsupportedVersion",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_checkpoint",
    "load_dataset",
    "read_camera",
    "read_pfm",
    "read_ply",
    "read_ppm",
    "read_report",
    "read_trajectory",
    "save_checkpoint",
    "write_dataset",
    "write_pfm",
    "write_ply",
    "write_ppm",
    "write_report",
    "write_trajectory",
]
