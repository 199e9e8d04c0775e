"""Text and image codecs: PPM, PFM, ASCII PLY, trajectories and key=value reports."""
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from evalkit.mesh import Mesh
from evalkit.report import FIELDS, MetricReport
from evalkit.trajectory import Trajectory
from utils.geometry import PoseEstimate

from .errors import ParseError

PathLike = Union[str, Path]


def _header_tokens(data: bytes, count: int) -> Tuple[List[bytes], int]:
    """First `count` whitespace-separated tokens, skipping # comments; returns the offset after them."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos)
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated image header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def write_ppm(path: PathLike, image: np.ndarray) -> None:
    """8-bit binary P6 from floats in [0, 1]."""
    pixels = np.round(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    height, width = pixels.shape[:2]
    Path(path).write_bytes(f"P6\n{width} {height}\n255\n".encode("ascii") + pixels.reshape(-1).tobytes())


def read_ppm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, width, height, maxval), offset = _header_tokens(data, 4)
    if magic != b"P6" or int(maxval) != 255:
        raise ValueError(f"{path}: not an 8-bit P6 image")
    width, height = int(width), int(height)
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height * 3, offset=offset)
    return pixels.reshape(height, width, 3).astype(np.float64) / 255.0


def write_pfm(path: PathLike, array: np.ndarray) -> None:
    """Little-endian PFM (scale -1.0), rows stored bottom to top; 1 or 3 channels."""
    array = np.asarray(array, dtype=np.float64)
    color = array.ndim == 3
    if color and array.shape[2] != 3:
        raise ValueError(f"PFM holds 1 or 3 channels, got {array.shape[2]}")
    height, width = array.shape[:2]
    header = f"{'PF' if color else 'Pf'}\n{width} {height}\n-1.0\n".encode("ascii")
    Path(path).write_bytes(header + np.flipud(array).astype("<f4").tobytes())


def read_pfm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, width, height, scale), offset = _header_tokens(data, 4)
    if magic not in (b"PF", b"Pf"):
        raise ValueError(f"{path}: not a PFM image")
    channels = 3 if magic == b"PF" else 1
    width, height = int(width), int(height)
    dtype = "<f4" if float(scale) < 0 else ">f4"
    values = np.frombuffer(data, dtype=dtype, count=width * height * channels, offset=offset)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return np.flipud(values.reshape(shape)).astype(np.float64)


def write_ply(path: PathLike, mesh: Mesh) -> None:
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(mesh.vertices)}",
        "property double x", "property double y", "property double z",
        "property double nx", "property double ny", "property double nz",
        f"element face {len(mesh.faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for v, n in zip(mesh.vertices.tolist(), mesh.normals.tolist()):
        lines.append(" ".join(repr(x) for x in v + n))
    for f in mesh.faces.tolist():
        lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_ply(path: PathLike) -> Mesh:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(1, "missing ply magic")
    counts = {}
    body = None
    for number, line in enumerate(lines, start=1):
        parts = line.split()
        if parts[:1] == ["element"]:
            counts[parts[1]] = int(parts[2])
        elif parts[:1] == ["format"] and parts[1] != "ascii":
            raise ParseError(number, f"unsupported PLY format {parts[1]}")
        elif parts[:1] == ["end_header"]:
            body = number
            break
    if body is None:
        raise ParseError(len(lines), "missing end_header")
    n_vertices, n_faces = counts.get("vertex", 0), counts.get("face", 0)
    rows = lines[body:body + n_vertices]
    try:
        vertex_data = np.array([[float(x) for x in row.split()] for row in rows]).reshape(-1, 6)
        faces = np.array([[int(x) for x in row.split()[1:4]]
                          for row in lines[body + n_vertices:body + n_vertices + n_faces]]).reshape(-1, 3)
    except ValueError as exc:
        raise ParseError(body + 1, str(exc)) from exc
    return Mesh(vertex_data[:, :3], faces, vertex_data[:, 3:])


def format_pose_line(frame_id: int, pose: PoseEstimate) -> str:
    values = list(pose.translation) + list(pose.rotation)
    return f"{frame_id} " + " ".join(f"{float(v):.17g}" for v in values)


def write_trajectory(path: PathLike, trajectory: Trajectory) -> None:
    """`frame_id tx ty tz qx qy qz qw` per line."""
    lines = ["# frame_id tx ty tz qx qy qz qw"]
    lines += [format_pose_line(i, p) for i, p in zip(trajectory.ids, trajectory.poses)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trajectory(path: PathLike) -> Trajectory:
    ids, poses = [], []
    for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 8:
            raise ParseError(number, f"expected 8 fields, got {len(fields)}")
        try:
            frame_id = int(fields[0])
            values = [float(x) for x in fields[1:]]
        except ValueError as exc:
            raise ParseError(number, str(exc)) from exc
        if ids and frame_id <= ids[-1]:
            raise ParseError(number, f"frame id {frame_id} is not increasing")
        ids.append(frame_id)
        poses.append(PoseEstimate(values[3:], values[:3]))
    return Trajectory(ids, poses)


def write_report(path: PathLike, report: MetricReport) -> None:
    lines = [f"{name}={value!r}" for name, value in report.values().items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_report(path: PathLike) -> MetricReport:
    values = {}
    for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, raw = line.partition("=")
        if not sep or key.strip() not in FIELDS:
            raise ParseError(number, f"unexpected entry {line!r}")
        try:
            values[key.strip()] = float(raw)
        except ValueError as exc:
            raise ParseError(number, str(exc)) from exc
    return MetricReport(**values)
