import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree
from skimage.measure import marching_cubes

from fields.batch import normals_from_gradient
from fields.model import Stage

from .errors import EmptyMesh, InvalidMesh

CHUNK = 1 << 18


class Mesh:
    """Triangle mesh with per-vertex normals pointing into free space."""

    def __init__(self, vertices: np.ndarray, faces: np.ndarray, normals: Optional[np.ndarray] = None):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(self.vertices)):
            raise InvalidMesh("mesh vertices must be finite")
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise InvalidMesh("triangle index out of range")
        if normals is None:
            normals = self.vertex_normals_from_faces()
        self.normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)

    def __len__(self) -> int:
        return len(self.faces)

    def corners(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.vertices[self.faces[:, 0]], self.vertices[self.faces[:, 1]], self.vertices[self.faces[:, 2]]

    def face_cross(self) -> np.ndarray:
        a, b, c = self.corners()
        return np.cross(b - a, c - a)

    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_cross(), axis=1)

    def face_normals(self) -> np.ndarray:
        cross = self.face_cross()
        length = np.linalg.norm(cross, axis=1, keepdims=True)
        return cross / np.where(length > 0.0, length, 1.0)

    def vertex_normals_from_faces(self) -> np.ndarray:
        out = np.zeros_like(self.vertices)
        cross = self.face_cross()
        for k in range(3):
            np.add.at(out, self.faces[:, k], cross)
        length = np.linalg.norm(out, axis=1, keepdims=True)
        return out / np.where(length > 0.0, length, 1.0)

    def sample(self, count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Points uniform by area, with the normal of the triangle each lies on."""
        if not len(self.faces):
            raise EmptyMesh("cannot sample an empty mesh")
        areas = self.areas()
        if areas.sum() <= 0.0:
            raise EmptyMesh("mesh has zero area")
        faces = rng.choice(len(self.faces), size=count, p=areas / areas.sum())
        r1, r2 = rng.random(count), rng.random(count)
        root = np.sqrt(r1)
        a, b, c = (corner[faces] for corner in self.corners())
        points = (1.0 - root)[:, None] * a + (root * (1.0 - r2))[:, None] * b + (root * r2)[:, None] * c
        return points, self.face_normals()[faces]

    def transformed(self, transform) -> "Mesh":
        """Mesh moved by a similarity transform."""
        rot = transform.rotation_matrix
        return Mesh(transform.apply(self.vertices), self.faces, self.normals @ rot.T)


def extract_mesh(field, resolution: int, stage: Stage = Stage.FULL) -> Mesh:
    """Zero level set of the field over [-1, 1]^3, sampled at resolution + 1 points per axis."""
    if resolution < 16:
        raise ValueError(f"mesh resolution must be at least 16, got {resolution}")
    axis = np.linspace(-1.0, 1.0, resolution + 1)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    values = np.concatenate([field.sdf_batch(grid[i:i + CHUNK], stage) for i in range(0, len(grid), CHUNK)])
    values = values.reshape((resolution + 1,) * 3)
    if values.min() >= 0.0 or values.max() <= 0.0:
        raise EmptyMesh("field has no zero crossing in the scene cube")
    spacing = 2.0 / resolution
    vertices, faces, _, _ = marching_cubes(values, level=0.0, spacing=(spacing,) * 3)
    if not len(faces):
        raise EmptyMesh("marching cubes produced no triangles")
    vertices = vertices - 1.0
    normals, _ = normals_from_gradient(field.gradient_batch(vertices, stage), field.sign_convention)
    mesh = Mesh(vertices, faces, normals)
    # wind every triangle so its geometric normal agrees with the field normal
    flip = np.sum(mesh.face_cross() * normals[faces].sum(axis=1), axis=1) < 0.0
    mesh.faces[flip] = mesh.faces[flip][:, ::-1]
    logging.info(f"Extracted mesh with {len(vertices)} vertices and {len(faces)} triangles at resolution {resolution}")
    return mesh


def closest_points_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Row-wise closest point of triangle (a, b, c) to p, by Voronoi region of the triangle."""
    ab, ac = b - a, c - a
    ap, bp, cp = p - a, p - b, p - c
    d1, d2 = np.einsum("ij,ij->i", ab, ap), np.einsum("ij,ij->i", ac, ap)
    d3, d4 = np.einsum("ij,ij->i", ab, bp), np.einsum("ij,ij->i", ac, bp)
    d5, d6 = np.einsum("ij,ij->i", ab, cp), np.einsum("ij,ij->i", ac, cp)
    va, vb, vc = d3 * d6 - d5 * d4, d5 * d2 - d1 * d6, d1 * d4 - d3 * d2

    def ratio(num, den):
        return num / np.where(den != 0.0, den, 1.0)

    denom = ratio(1.0, va + vb + vc)
    out = a + ab * (vb * denom)[:, None] + ac * (vc * denom)[:, None]
    regions = [
        ((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0),
         b + (c - b) * ratio(d4 - d3, (d4 - d3) + (d5 - d6))[:, None]),
        ((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + ac * ratio(d2, d2 - d6)[:, None]),
        ((d6 >= 0) & (d5 <= d6), c),
        ((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + ab * ratio(d1, d1 - d3)[:, None]),
        ((d3 >= 0) & (d4 <= d3), b),
        ((d1 <= 0) & (d2 <= 0), a),
    ]
    # later entries take precedence
    for mask, point in regions:
        out = np.where(mask[:, None], point, out)
    return out


def nearest_on_mesh(points: np.ndarray, mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    """Exact distance from each point to the mesh surface and the index of the closest triangle.

    Centroid distances bound the search: no triangle farther than the best
    centroid distance plus the largest centroid-to-corner radius can be closer.
    """
    a, b, c = mesh.corners()
    centroids = (a + b + c) / 3.0
    radius = float(np.max(np.linalg.norm(np.stack([a, b, c]) - centroids, axis=2)))
    tree = cKDTree(centroids)
    upper, _ = tree.query(points)
    distances = np.empty(len(points))
    nearest = np.empty(len(points), dtype=np.int64)
    for i, (p, bound) in enumerate(zip(points, upper)):
        candidates = np.asarray(tree.query_ball_point(p, bound + radius + 1e-12), dtype=np.int64)
        closest = closest_points_on_triangles(np.broadcast_to(p, (len(candidates), 3)), a[candidates],
                                              b[candidates], c[candidates])
        d = np.linalg.norm(closest - p, axis=1)
        best = int(np.argmin(d))
        distances[i], nearest[i] = d[best], candidates[best]
    return distances, nearest


class MeshMetrics(NamedTuple):
    accuracy: float
    completion: float
    completion_ratio: float
    normal_consistency: float


def mesh_metrics(est: Mesh, gt: Mesh, threshold: float = 0.05, n_samples: int = 20000,
                 rng: Optional[np.random.Generator] = None) -> MeshMetrics:
    """Accuracy, completion, completion ratio (%) and normal consistency from area-uniform samples."""
    if not len(est) or not len(gt):
        raise EmptyMesh("mesh metrics need two non-empty meshes")
    rng = rng if rng is not None else np.random.default_rng(0)
    est_points, est_normals = est.sample(n_samples, rng)
    gt_points, gt_normals = gt.sample(n_samples, rng)
    to_gt, gt_faces = nearest_on_mesh(est_points, gt)
    to_est, est_faces = nearest_on_mesh(gt_points, est)
    cos_est = np.abs(np.sum(est_normals * gt.face_normals()[gt_faces], axis=1))
    cos_gt = np.abs(np.sum(gt_normals * est.face_normals()[est_faces], axis=1))
    return MeshMetrics(
        accuracy=float(to_gt.mean()),
        completion=float(to_est.mean()),
        completion_ratio=float(100.0 * np.mean(to_est < threshold)),
        normal_consistency=float(0.5 * (cos_est.mean() + cos_gt.mean())),
    )
