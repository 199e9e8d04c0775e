from typing import Optional, Sequence, Tuple

import numpy as np

from utils.geometry import PoseEstimate, matrix_to_quat, quat_to_matrix

from .errors import DegenerateGeometry, InsufficientMatches


class Trajectory:
    """Poses keyed by strictly increasing frame ids."""

    def __init__(self, ids: Sequence[int], poses: Sequence[PoseEstimate]):
        ids = [int(i) for i in ids]
        if len(ids) != len(poses):
            raise ValueError(f"{len(ids)} ids for {len(poses)} poses")
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValueError("trajectory ids must be strictly increasing")
        self.ids = ids
        self.poses = list(poses)

    @classmethod
    def from_poses(cls, poses: Sequence[PoseEstimate]) -> "Trajectory":
        return cls(range(len(poses)), poses)

    def __len__(self) -> int:
        return len(self.ids)

    def positions(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses]).reshape(-1, 3)

    def matched(self, other: "Trajectory") -> Tuple[np.ndarray, np.ndarray]:
        """Positions of both trajectories over their shared frame ids."""
        lookup = dict(zip(other.ids, other.poses))
        shared = [(p, lookup[i]) for i, p in zip(self.ids, self.poses) if i in lookup]
        mine = np.array([a.translation for a, _ in shared]).reshape(-1, 3)
        theirs = np.array([b.translation for _, b in shared]).reshape(-1, 3)
        return mine, theirs


class Sim3Transform:
    """x -> scale * R x + t."""

    def __init__(self, scale: float = 1.0, rotation: Optional[Sequence[float]] = None,
                 translation: Optional[Sequence[float]] = None):
        if scale <= 0.0:
            raise ValueError(f"scale must be positive, got {scale}")
        self.scale = float(scale)
        quat = np.array([0.0, 0.0, 0.0, 1.0]) if rotation is None else np.asarray(rotation, dtype=np.float64)
        self.rotation = quat / np.linalg.norm(quat)
        self.translation = np.zeros(3) if translation is None else np.asarray(translation, dtype=np.float64)

    @classmethod
    def from_matrix(cls, scale: float, rotation: np.ndarray, translation: np.ndarray) -> "Sim3Transform":
        return cls(scale, matrix_to_quat(rotation), translation)

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return self.scale * points @ self.rotation_matrix.T + self.translation

    def apply_pose(self, pose: PoseEstimate) -> PoseEstimate:
        """Camera-to-world pose expressed in the target frame; scale only moves the centre."""
        rot = self.rotation_matrix
        return PoseEstimate(matrix_to_quat(rot @ pose.rotation_matrix), self.apply(pose.translation))

    def inverse(self) -> "Sim3Transform":
        rot_t = self.rotation_matrix.T
        return Sim3Transform.from_matrix(1.0 / self.scale, rot_t, -(rot_t @ self.translation) / self.scale)

    def __repr__(self) -> str:
        return (f"Sim3Transform(scale={self.scale!r}, rotation={self.rotation.tolist()}, "
                f"translation={self.translation.tolist()})")


def align_umeyama(est: Trajectory, gt: Trajectory, with_scale: bool = True) -> Sim3Transform:
    """Least-squares similarity (or rigid) transform taking estimated positions onto ground truth."""
    data, model = est.matched(gt)
    n = len(data)
    if n < 3:
        raise InsufficientMatches(f"need at least 3 shared frames, got {n}")
    mu_model = model.mean(axis=0)
    mu_data = data.mean(axis=0)
    model_c = model - mu_model
    data_c = data - mu_data
    covariance = model_c.T @ data_c / n
    sigma2 = float((data_c ** 2).sum()) / n
    u, d, vt = np.linalg.svd(covariance)
    if sigma2 < 1e-15 or d[1] <= 1e-12 * max(d[0], 1e-300):
        raise DegenerateGeometry("trajectory positions are collinear or coincident")
    s = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[2, 2] = -1.0
    rotation = u @ s @ vt
    scale = float(np.trace(np.diag(d) @ s)) / sigma2 if with_scale else 1.0
    translation = mu_model - scale * rotation @ mu_data
    return Sim3Transform.from_matrix(scale, rotation, translation)


def ate_rmse(est: Trajectory, gt: Trajectory, with_scale: bool = True) -> float:
    transform = align_umeyama(est, gt, with_scale)
    data, model = est.matched(gt)
    residual = transform.apply(data) - model
    return float(np.sqrt(np.mean(np.sum(residual ** 2, axis=1))))
