import math
from typing import Tuple

import numpy as np
from skimage.metrics import structural_similarity

from .errors import DimensionMismatch

PSNR_CAP = 99.0


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))
    if mse < 1e-10:
        return PSNR_CAP
    return 10.0 * math.log10(1.0 / mse)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Gaussian-window SSIM (11x11, sigma 1.5) over valid window centres, averaged over channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(structural_similarity(a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                       use_sample_covariance=False, K1=0.01, K2=0.03,
                                       channel_axis=2 if a.ndim == 3 else None))


def image_metrics(a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    """(PSNR in dB, SSIM) of two images with values in [0, 1]."""
    if np.shape(a) != np.shape(b):
        raise DimensionMismatch(f"image shapes differ: {np.shape(a)} vs {np.shape(b)}")
    return psnr(a, b), ssim(a, b)
