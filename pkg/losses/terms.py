"""Photometric, geometric and regularization loss terms.

Every term is a mean over its valid contributions, so duplicating a batch leaves
it unchanged. `diagnostics` (a Counter) collects non-fatal skips when given.
"""
import logging
from collections import Counter
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from diffengine import ops
from fields.model import Stage, bind
from rendering.camera import Camera

from .batch import PixelBatch, Pose, as_diff_pose
from .cues import CueBundle
from .errors import DegenerateDepth, EmptyBatch
from .warping import bilinear_sample, warp_pixel


def _mean(terms) -> ops.Scalar:
    return ops.total(terms) * (1.0 / len(terms))


def _count(diagnostics: Optional[Counter], key: str, amount: int = 1) -> None:
    if diagnostics is not None and amount:
        diagnostics[key] += amount


def loss_rgb(batch: PixelBatch) -> ops.Scalar:
    if not len(batch):
        raise EmptyBatch("rgb loss needs at least one pixel")
    return _mean([ops.total([ops.absolute(s.render.color[c] - float(s.color[c])) for c in range(3)])
                  for s in batch])


def loss_warp(batch: PixelBatch, keyframes: Sequence[int], images: Mapping[int, np.ndarray],
              poses: Mapping[int, Pose], camera: Camera, diagnostics: Optional[Counter] = None) -> ops.Scalar:
    """Colour of each pixel against its reprojection into every other keyframe."""
    residuals, invalid = [], 0
    for sample in batch:
        for n in keyframes:
            if n == sample.frame:
                continue
            warp = warp_pixel(sample.pixel, sample.render.depth, poses[sample.frame], poses[n], camera)
            if not warp.valid:
                invalid += 1
                continue
            warped = bilinear_sample(images[n], warp.u, warp.v)
            residuals.append(ops.total([ops.absolute(float(sample.color[c]) - warped[c]) for c in range(3)]))
    _count(diagnostics, "warp_invalid", invalid)
    if not residuals:
        logging.warning(f"Warp loss: all {invalid} warps invalid")
        return 0.0
    return _mean(residuals)


def loss_flow(batch: PixelBatch, keyframes: Sequence[int], poses: Mapping[int, Pose], camera: Camera,
              cues: CueBundle, diagnostics: Optional[Counter] = None, skip_missing: bool = False) -> ops.Scalar:
    """Projected displacement of each pixel against the flow field read at that pixel.

    With `skip_missing`, frame pairs that have no flow field (further apart than the cue
    provider reaches) are skipped and counted instead of raising `MissingCue`.
    """
    residuals, invalid, missing = [], 0, set()
    for sample in batch:
        u, v = sample.pixel
        for n in keyframes:
            if n == sample.frame:
                continue
            if skip_missing and not cues.has_flow(sample.frame, n):
                missing.add((sample.frame, n))
                continue
            du, dv, flow_valid = cues.flow_map(sample.frame, n)[v, u]
            warp = warp_pixel(sample.pixel, sample.render.depth, poses[sample.frame], poses[n], camera)
            if not (warp.valid and flow_valid > 0.5):
                invalid += 1
                continue
            residuals.append(ops.absolute(warp.u - u - float(du)) + ops.absolute(warp.v - v - float(dv)))
    _count(diagnostics, "flow_invalid", invalid)
    _count(diagnostics, "flow_missing", len(missing))
    if missing:
        logging.warning(f"Flow loss: no flow cue for {len(missing)} frame pairs, e.g. {min(missing)}")
    if not residuals:
        logging.warning(f"Flow loss: all {invalid} pairs invalid")
        return 0.0
    return _mean(residuals)


def solve_scale_shift(rendered: Sequence[float], observed: Sequence[float]) -> Tuple[float, float]:
    """Least-squares (w, q) with w * rendered + q ~ observed."""
    x = np.asarray(rendered, dtype=np.float64)
    y = np.asarray(observed, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"depth lists differ in length: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise DegenerateDepth(f"need at least 2 depths, got {len(x)}")
    xc = x - x.mean()
    variance = float(np.dot(xc, xc)) / len(x)
    if variance < 1e-12:
        raise DegenerateDepth(f"rendered depth variance {variance:.3e} below 1e-12")
    w = float(np.dot(xc, y - y.mean())) / (variance * len(x))
    return w, float(y.mean() - w * x.mean())


def loss_depth(batch: PixelBatch, cues: CueBundle, fixed_affine: Optional[Tuple[float, float]] = None,
               diagnostics: Optional[Counter] = None) -> ops.Scalar:
    """Squared residual after aligning rendered depth to the monocular cue per frame.

    `fixed_affine` replaces the per-frame solve with a given (w, q).
    """
    residuals = []
    for frame, samples in batch.by_frame().items():
        cue = cues.depth_map(frame)
        pairs = [(s.render.depth, float(cue[s.pixel[1], s.pixel[0]])) for s in samples]
        pairs = [(d, observed) for d, observed in pairs if observed > 0.0]
        if fixed_affine is not None:
            w, q = fixed_affine
        else:
            try:
                w, q = solve_scale_shift([ops.value(d) for d, _ in pairs], [o for _, o in pairs])
            except DegenerateDepth as exc:
                logging.warning(f"Depth loss: skipping frame {frame}: {exc}")
                _count(diagnostics, "depth_skipped")
                continue
        for d, observed in pairs:
            r = d * w + (q - observed)
            residuals.append(r * r)
    if not residuals:
        raise EmptyBatch("depth loss has no usable frame")
    return _mean(residuals)


def loss_normal(batch: PixelBatch, cues: CueBundle, poses: Mapping[int, Pose],
                diagnostics: Optional[Counter] = None) -> ops.Scalar:
    """L1 plus angular distance between the rendered normal, in camera frame, and the cue."""
    if not len(batch):
        raise EmptyBatch("normal loss needs at least one pixel")
    residuals, skipped = [], 0
    for sample in batch:
        u, v = sample.pixel
        cue = cues.normal_map(sample.frame)[v, u]
        if not np.any(cue):
            skipped += 1
            continue
        pose = as_diff_pose(poses[sample.frame])
        rendered = [ops.dot([pose.rot[0][j], pose.rot[1][j], pose.rot[2][j]], sample.render.normal)
                    for j in range(3)]
        length = ops.norm(rendered)
        if ops.value(length) < 1e-9:
            skipped += 1
            continue
        scale = ops.reciprocal(length)
        n_hat = [c * scale for c in rendered]
        l1 = ops.total([ops.absolute(n_hat[k] - float(cue[k])) for k in range(3)])
        residuals.append(l1 + ops.absolute(1.0 - ops.dot(n_hat, cue.tolist())))
    _count(diagnostics, "normal_skipped", skipped)
    if not residuals:
        raise EmptyBatch("normal loss has no pixel with a usable normal")
    return _mean(residuals)


def eikonal_points(rng: np.random.Generator, count: int, surface: np.ndarray, std: float) -> np.ndarray:
    """Half uniform in the scene cube, half jittered around estimated surface points."""
    near_count = count // 2 if len(surface) else 0
    uniform = rng.uniform(-1.0, 1.0, size=(count - near_count, 3))
    if not near_count:
        return uniform
    anchors = surface[rng.integers(0, len(surface), size=near_count)]
    near = np.clip(anchors + rng.normal(0.0, std, size=anchors.shape), -1.0, 1.0)
    return np.concatenate([uniform, near], axis=0)


def loss_eikonal(field, points: np.ndarray, stage: Stage = Stage.FULL) -> ops.Scalar:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not len(points):
        return 0.0
    bound = bind(field)
    residuals = []
    for x in points.tolist():
        grad = bound.sdf(x, stage, with_grad=True).grad
        r = ops.norm(grad) - 1.0
        residuals.append(r * r)
    return _mean(residuals)
