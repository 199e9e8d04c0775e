from .errors import DegenerateGeometry, DimensionMismatch, EmptyMesh, InsufficientMatches, InvalidMesh
from .images import image_metrics, psnr, ssim
from .mesh import Mesh, MeshMetrics, closest_points_on_triangles, extract_mesh, mesh_metrics, nearest_on_mesh
from .report import MetricReport
from .trajectory import Sim3Transform, Trajectory, align_umeyama, ate_rmse

__all__ = [
    "DegenerateGeometry",
    "DimensionMismatch",
    "EmptyMesh",
    "InsufficientMatches",
    "InvalidMesh",
    "Mesh",
    "MeshMetrics",
    "MetricReport",
    "Sim3Transform",
    "Trajectory",
    "align_umeyama",
    "ate_rmse",
    "closest_points_on_triangles",
    "extract_mesh",
    "image_metrics",
    "mesh_metrics",
    "nearest_on_mesh",
    "psnr",
    "ssim",
]
