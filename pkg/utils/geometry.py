"""Rigid-body helpers shared by rendering, losses, slam and evaluation.

Poses are camera-to-world. Quaternions are stored (x, y, z, w).
"""
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from diffengine import ops
from diffengine.tape import Tape

IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


def quat_to_matrix(quat: Sequence[float]) -> np.ndarray:
    return Rotation.from_quat(np.asarray(quat, dtype=np.float64)).as_matrix()


def matrix_to_quat(matrix: np.ndarray) -> np.ndarray:
    quat = Rotation.from_matrix(np.asarray(matrix, dtype=np.float64)).as_quat()
    # canonical hemisphere keeps text round-trips stable
    return quat if quat[3] >= 0.0 else -quat


def so3_exp_numpy(omega: Sequence[float]) -> np.ndarray:
    return Rotation.from_rotvec(np.asarray(omega, dtype=np.float64)).as_matrix()


def look_at(eye: Sequence[float], target: Sequence[float], up: Sequence[float] = (0.0, -1.0, 0.0)) -> np.ndarray:
    """Camera-to-world rotation with +z toward target, x right and y down.

    World y points down, so the default `up` is -y and a camera looking along +z is the identity.
    """
    eye, target, up = (np.asarray(v, dtype=np.float64) for v in (eye, target, up))
    forward = target - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(-up, forward)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return np.stack([right, down, forward], axis=1)


class PoseEstimate:
    """SE(3) camera-to-world pose; increments are composed on the left then folded in."""

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation: Optional[Sequence[float]] = None, translation: Optional[Sequence[float]] = None):
        quat = IDENTITY_QUAT if rotation is None else np.asarray(rotation, dtype=np.float64)
        norm = np.linalg.norm(quat)
        # unit input is kept bit-for-bit
        self.rotation = quat.copy() if abs(norm - 1.0) < 1e-12 else quat / norm
        self.translation = np.zeros(3) if translation is None else np.array(translation, dtype=np.float64)

    @classmethod
    def identity(cls) -> "PoseEstimate":
        return cls()

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "PoseEstimate":
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(matrix_to_quat(matrix[:3, :3]), matrix[:3, 3])

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation_matrix
        out[:3, 3] = self.translation
        return out

    def compose(self, other: "PoseEstimate") -> "PoseEstimate":
        """self ∘ other."""
        return PoseEstimate.from_matrix(self.matrix() @ other.matrix())

    def inverse(self) -> "PoseEstimate":
        rot = self.rotation_matrix
        out = np.eye(4)
        out[:3, :3] = rot.T
        out[:3, 3] = -rot.T @ self.translation
        return PoseEstimate.from_matrix(out)

    def fold(self, increment: Sequence[float]) -> "PoseEstimate":
        """Apply (axis-angle, translation) increment on the left."""
        increment = np.asarray(increment, dtype=np.float64)
        delta = so3_exp_numpy(increment[:3])
        rot = delta @ self.rotation_matrix
        trans = delta @ self.translation + increment[3:]
        return PoseEstimate(matrix_to_quat(rot), trans)

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation_matrix.T + self.translation

    def copy(self) -> "PoseEstimate":
        return PoseEstimate(self.rotation.copy(), self.translation.copy())

    def rotation_angle_to(self, other: "PoseEstimate") -> float:
        """Geodesic angle in radians between the two rotations."""
        rel = self.rotation_matrix.T @ other.rotation_matrix
        return float(np.arccos(np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0)))

    def __eq__(self, other) -> bool:
        return (isinstance(other, PoseEstimate)
                and np.array_equal(self.rotation, other.rotation)
                and np.array_equal(self.translation, other.translation))

    def __repr__(self) -> str:
        return f"PoseEstimate(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def skew_exp(omega: Sequence[ops.Scalar]) -> List[List[ops.Scalar]]:
    """Rodrigues' formula on scalars; a series branch keeps the derivative finite at zero."""
    theta_sq = ops.dot(omega, omega)
    t2 = ops.value(theta_sq)
    if t2 < 1e-10:
        a = 1.0 - theta_sq * (1.0 / 6.0) + theta_sq * theta_sq * (1.0 / 120.0)
        b = 0.5 - theta_sq * (1.0 / 24.0) + theta_sq * theta_sq * (1.0 / 720.0)
    else:
        theta = ops.sqrt(theta_sq)
        a = ops.sin(theta) / theta
        b = (1.0 - ops.cos(theta)) / theta_sq
    wx, wy, wz = omega
    skew = [[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]]
    diag = 1.0 - b * theta_sq
    rot = []
    for i in range(3):
        row = []
        for j in range(3):
            entry = a * skew[i][j] + b * (omega[i] * omega[j])
            row.append(entry + diag if i == j else entry)
        rot.append(row)
    return rot


class DiffPose:
    """Camera-to-world pose whose entries may be tape variables."""

    __slots__ = ("rot", "trans")

    def __init__(self, rot: List[List[ops.Scalar]], trans: List[ops.Scalar]):
        self.rot = rot
        self.trans = trans

    @classmethod
    def constant(cls, pose: PoseEstimate) -> "DiffPose":
        rot = pose.rotation_matrix
        return cls([[float(rot[i, j]) for j in range(3)] for i in range(3)],
                   [float(t) for t in pose.translation])

    @classmethod
    def on_tape(cls, tape: Tape, pose: PoseEstimate, frame_id: int,
                start: Optional[Sequence[float]] = None) -> "DiffPose":
        """Registers the 6 increment leaves ("pose", frame_id, k), at zero unless `start` is given."""
        start = start if start is not None else (0.0,) * 6
        increment = [tape.parameter(("pose", frame_id, k), start[k]) for k in range(6)]
        delta = skew_exp(increment[:3])
        base = cls.constant(pose)
        rot = [[ops.dot(delta[i], [base.rot[0][j], base.rot[1][j], base.rot[2][j]]) for j in range(3)]
               for i in range(3)]
        trans = [ops.dot(delta[i], base.trans) + increment[3 + i] for i in range(3)]
        return cls(rot, trans)

    def rotate(self, v: Sequence[ops.Scalar]) -> List[ops.Scalar]:
        return [ops.dot(self.rot[i], v) for i in range(3)]

    def transform(self, p: Sequence[ops.Scalar]) -> List[ops.Scalar]:
        return [ops.dot(self.rot[i], p) + self.trans[i] for i in range(3)]

    def inverse_transform(self, p: Sequence[ops.Scalar]) -> List[ops.Scalar]:
        """World point into this camera's frame."""
        d = [p[i] - self.trans[i] for i in range(3)]
        return [ops.dot([self.rot[0][j], self.rot[1][j], self.rot[2][j]], d) for j in range(3)]

    def values(self) -> PoseEstimate:
        rot = np.array([[ops.value(x) for x in row] for row in self.rot])
        return PoseEstimate(matrix_to_quat(rot), [ops.value(t) for t in self.trans])
