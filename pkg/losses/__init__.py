from .batch import PixelBatch, PixelSample, as_diff_pose, render_batch, sample_pixels
from .combine import TERMS, LossBreakdown, LossWeights, mapping_loss
from .cues import CueBundle
from .errors import DegenerateDepth, EmptyBatch, MissingCue, NonFiniteLoss
from .terms import (
    eikonal_points,
    loss_depth,
    loss_eikonal,
    loss_flow,
    loss_normal,
    loss_rgb,
    loss_warp,
    solve_scale_shift,
)
from .warping import Warp, bilinear_sample, warp_pixel

__all__ = [
    "CueBundle",
    "DegenerateDepth",
    "EmptyBatch",
    "LossBreakdown",
    "LossWeights",
    "MissingCue",
    "NonFiniteLoss",
    "PixelBatch",
    "PixelSample",
    "TERMS",
    "Warp",
    "as_diff_pose",
    "bilinear_sample",
    "eikonal_points",
    "loss_depth",
    "loss_eikonal",
    "loss_flow",
    "loss_normal",
    "loss_rgb",
    "loss_warp",
    "mapping_loss",
    "render_batch",
    "sample_pixels",
    "solve_scale_shift",
]
