"""Vectorised inference over many points, no tape.

Mirrors BoundModel.sdf / BoundModel.color; used for mesh extraction, image
rendering and initialization diagnostics.
"""
from typing import Optional, Tuple

import numpy as np

from .grids import trilinear_batch
from .model import Stage, free_space_sign

CHUNK = 32768


def _features(grid, points: np.ndarray, with_grad: bool):
    if with_grad:
        return trilinear_batch(grid.values, points, grid.domain, with_jet=True)
    return trilinear_batch(grid.values, points, grid.domain), None


def coarse_inputs(model, points: np.ndarray, with_grad: bool = False):
    """Decoder inputs of the coarse branch and their spatial jets (N, 3, width)."""
    if with_grad:
        enc, enc_jets = model.position_encoding.batch(points, with_jet=True)
    else:
        enc, enc_jets = model.position_encoding.batch(points), None
    blocks, jet_blocks = [enc], [enc_jets]
    if model.coarse_grid is not None:
        features, jets = _features(model.coarse_grid, points, with_grad)
        blocks.append(features)
        jet_blocks.append(jets)
    inputs = np.concatenate(blocks, axis=1)
    return inputs, (np.concatenate(jet_blocks, axis=2) if with_grad else None), enc, enc_jets


def _sdf_chunk(model, points: np.ndarray, stage, with_grad: bool):
    inputs, jets, enc, enc_jets = coarse_inputs(model, points, with_grad)
    out, out_jets = model.decoder_coarse.forward_batch(inputs, jets)
    s = out[:, 0].copy()
    grad = out_jets
    z_fine = None
    if stage is Stage.FULL:
        blocks, jet_blocks = [enc], [enc_jets]
        for grid in model.fine_grids.levels:
            features, fjets = _features(grid, points, with_grad)
            blocks.append(features)
            jet_blocks.append(fjets)
        fine_jets = np.concatenate(jet_blocks, axis=2) if with_grad else None
        fine, fine_out_jets = model.decoder_fine.forward_batch(np.concatenate(blocks, axis=1), fine_jets)
        s = s + fine[:, 0]
        z_fine = fine[:, 1:]
        if with_grad:
            grad = grad + fine_out_jets
    return s, grad, out[:, 1:], z_fine


def sdf_batch(model, points: np.ndarray, stage, with_grad: bool = False
              ) -> Tuple[np.ndarray, Optional[np.ndarray], np.ndarray, Optional[np.ndarray]]:
    """(ŝ (N,), ∇ŝ (N, 3) or None, z_coarse (N, G), z_fine (N, G) or None)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    parts = [_sdf_chunk(model, points[i:i + CHUNK], stage, with_grad) for i in range(0, len(points), CHUNK)]
    if not parts:
        geo = model.config.geo_feature_dim
        return np.zeros(0), np.zeros((0, 3)) if with_grad else None, np.zeros((0, geo)), None
    s = np.concatenate([p[0] for p in parts])
    grad = np.concatenate([p[1] for p in parts]) if with_grad else None
    z_coarse = np.concatenate([p[2] for p in parts])
    z_fine = np.concatenate([p[3] for p in parts]) if parts[0][3] is not None else None
    return s, grad, z_coarse, z_fine


def normals_from_gradient(grad: np.ndarray, sign_convention: str) -> Tuple[np.ndarray, np.ndarray]:
    """Unit free-space normals and a mask of degenerate (zeroed) rows."""
    length = np.linalg.norm(grad, axis=1)
    degenerate = length < 1e-9
    safe = np.where(degenerate, 1.0, length)
    normals = grad * (free_space_sign(sign_convention) / safe)[:, None]
    normals[degenerate] = 0.0
    return normals, degenerate


def _color_chunk(model, points: np.ndarray, view_dirs: np.ndarray, grad: np.ndarray, z_coarse: np.ndarray,
                 z_fine: Optional[np.ndarray], stage) -> np.ndarray:
    normals, _ = normals_from_gradient(grad, model.sign_convention)
    if stage is not Stage.FULL or z_fine is None:
        z_fine = np.zeros((len(points), model.config.geo_feature_dim))
    blocks = [points, normals, model.direction_encoding.batch(view_dirs), z_coarse, z_fine]
    if model.color_grids is not None:
        blocks.extend(trilinear_batch(g.values, points, g.domain) for g in model.color_grids.levels)
    return model.decoder_color.forward_batch(np.concatenate(blocks, axis=1))[0]


def color_batch(model, points: np.ndarray, view_dirs: np.ndarray, stage) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    view_dirs = np.asarray(view_dirs, dtype=np.float64).reshape(-1, 3)
    out = np.zeros((len(points), 3))
    for i in range(0, len(points), CHUNK):
        chunk = points[i:i + CHUNK]
        _, grad, z_coarse, z_fine = _sdf_chunk(model, chunk, stage, True)
        out[i:i + CHUNK] = _color_chunk(model, chunk, view_dirs[i:i + CHUNK], grad, z_coarse, z_fine, stage)
    return out


def shade_batch(model, points: np.ndarray, view_dirs: np.ndarray, stage, with_color: bool = True
                ) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """(ŝ (N,), ∇ŝ (N, 3), colour (N, 3) or None) with one geometry pass per point."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    view_dirs = np.asarray(view_dirs, dtype=np.float64).reshape(-1, 3)
    s, grad = np.zeros(len(points)), np.zeros((len(points), 3))
    colors = np.zeros((len(points), 3)) if with_color else None
    for i in range(0, len(points), CHUNK):
        chunk = points[i:i + CHUNK]
        s[i:i + CHUNK], grad[i:i + CHUNK], z_coarse, z_fine = _sdf_chunk(model, chunk, stage, True)
        if with_color:
            colors[i:i + CHUNK] = _color_chunk(model, chunk, view_dirs[i:i + CHUNK], grad[i:i + CHUNK],
                                               z_coarse, z_fine, stage)
    return s, grad, colors
