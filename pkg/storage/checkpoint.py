"""Binary checkpoint: magic, version, config, grids, tensors, voxel counts, trajectory, CRC32.

All integers are little-endian. Grids are stored as 32-bit floats, every other
tensor as 64-bit floats.
"""
import logging
import struct
import zlib
from pathlib import Path
from typing import Dict, List, NamedTuple, Union

import numpy as np

from config.settings import RunConfig, build_config, dump_config, parse_config_text
from fields.model import SceneModel, param_group
from rendering.density import VoxelCounter
from utils.geometry import PoseEstimate

from .errors import CorruptCheckpoint, NotACheckpoint, UnsupportedVersion

MAGIC = b"NICR"
VERSION = 1
GRID_GROUPS = ("coarse_grid", "fine_grid", "color_grid")


class CheckpointState(NamedTuple):
    config: RunConfig
    arrays: Dict[str, np.ndarray]
    counter: VoxelCounter
    trajectory: List[PoseEstimate]

    def model(self) -> SceneModel:
        return SceneModel.from_arrays(self.config, self.arrays)


def _text(value: str) -> bytes:
    raw = value.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def encode_checkpoint(state: CheckpointState) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION), _text(state.config.preset), _text(dump_config(state.config))]
    names = sorted(state.arrays)
    grids = [n for n in names if param_group(n) in GRID_GROUPS]
    tensors = [n for n in names if param_group(n) not in GRID_GROUPS]
    parts.append(struct.pack("<I", len(grids)))
    for name in grids:
        array = state.arrays[name]
        parts += [_text(name), struct.pack("<II", array.shape[0], array.shape[-1]), array.astype("<f4").tobytes()]
    parts.append(struct.pack("<I", len(tensors)))
    for name in tensors:
        array = state.arrays[name]
        parts += [_text(name), struct.pack("<I", array.ndim), struct.pack(f"<{array.ndim}I", *array.shape),
                  array.astype("<f8").tobytes()]
    counts = state.counter.counts
    parts += [struct.pack("<I", state.counter.resolution), counts.astype("<u8").tobytes()]
    parts.append(struct.pack("<I", len(state.trajectory)))
    for pose in state.trajectory:
        parts.append(np.concatenate([pose.translation, pose.rotation]).astype("<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes, offset: int):
        self.data = data
        self.offset = offset

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise CorruptCheckpoint(f"truncated at byte {self.offset}, wanted {size} more")
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptCheckpoint(f"bad text section: {exc}") from exc

    def array(self, dtype: str, shape) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.take(count * np.dtype(dtype).itemsize), dtype=dtype).reshape(shape)


def decode_checkpoint(data: bytes) -> CheckpointState:
    if data[:4] != MAGIC:
        raise NotACheckpoint("missing NICR magic")
    if len(data) < 12:
        raise CorruptCheckpoint("checkpoint is truncated")
    version = struct.unpack("<I", data[4:8])[0]
    if version != VERSION:
        raise UnsupportedVersion(f"checkpoint version {version}, expected {VERSION}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptCheckpoint("CRC32 mismatch")
    reader = _Reader(body, 8)
    preset = reader.text()
    config = build_config(parse_config_text(reader.text()), preset=preset)
    arrays = {}
    for _ in range(reader.u32()):
        name = reader.text()
        resolution, dim = struct.unpack("<II", reader.take(8))
        arrays[name] = reader.array("<f4", (resolution,) * 3 + (dim,)).astype(np.float64)
    for _ in range(reader.u32()):
        name = reader.text()
        ndim = reader.u32()
        shape = struct.unpack(f"<{ndim}I", reader.take(4 * ndim))
        arrays[name] = reader.array("<f8", shape).astype(np.float64)
    resolution = reader.u32()
    counter = VoxelCounter(resolution, reader.array("<u8", (resolution,) * 3).astype(np.uint64))
    trajectory = []
    for _ in range(reader.u32()):
        values = reader.array("<f8", (7,))
        trajectory.append(PoseEstimate(values[3:].copy(), values[:3].copy()))
    if reader.offset != len(body):
        raise CorruptCheckpoint(f"{len(body) - reader.offset} trailing bytes")
    return CheckpointState(config, arrays, counter, trajectory)


def save_checkpoint(state: CheckpointState, path: Union[str, Path]) -> None:
    data = encode_checkpoint(state)
    Path(path).write_bytes(data)
    logging.info(f"Saved checkpoint {path} ({len(data)} bytes)")


def load_checkpoint(path: Union[str, Path]) -> CheckpointState:
    return decode_checkpoint(Path(path).read_bytes())
