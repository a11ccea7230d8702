"""Image quality metrics: MAE, NRMSE, PSNR, and 3D SSIM.

Conventions pinned here (and relied on by tests): NRMSE and PSNR are
normalized by the dynamic range of the ``truth`` argument, and SSIM derives
its stabilization constants from that same range. NRMSE and PSNR are then
invariant under a common affine rescaling of both inputs, SSIM under a common
pure scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.ndimage import uniform_filter

__all__ = ["MetricsReport", "mae", "nrmse", "psnr", "ssim3d", "evaluate"]


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    nrmse: float
    ssim: float
    psnr: float          # dB; meaningless when psnr_infinite is set
    psnr_infinite: bool
    n_voxels: int

    def to_dict(self):
        return asdict(self)


def _check_pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(truth))):
        raise ValueError("non-finite values in metric inputs")
    return pred, truth


def _truth_range(truth):
    r = float(truth.max() - truth.min())
    if r == 0.0:
        raise ValueError("constant truth: range normalization undefined")
    return r


def mae(pred, truth):
    pred, truth = _check_pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def nrmse(pred, truth):
    """RMSE divided by the dynamic range of truth."""
    pred, truth = _check_pair(pred, truth)
    r = _truth_range(truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)) / r)


def psnr(pred, truth):
    """20*log10(range / RMSE) in dB; identical inputs return (inf, True)."""
    pred, truth = _check_pair(pred, truth)
    r = _truth_range(truth)
    rmse = float(np.sqrt(np.mean((pred - truth) ** 2)))
    if rmse == 0.0:
        return float("inf"), True
    return 20.0 * np.log10(r / rmse), False


def ssim3d(pred, truth, window=7, k1=0.01, k2=0.03):
    """Mean SSIM over all valid cubic uniform windows.

    The range entering C1/C2 comes from ``truth``, which makes the score
    asymmetric in its arguments by design.
    """
    pred, truth = _check_pair(pred, truth)
    if pred.ndim != 3:
        raise ValueError(f"ssim3d expects 3D arrays, got {pred.ndim}D")
    if min(pred.shape) < window:
        raise ValueError(f"dims {pred.shape} smaller than window {window}")
    r = _truth_range(truth)
    c1 = (k1 * r) ** 2
    c2 = (k2 * r) ** 2

    # uniform_filter with the same window is an exact windowed mean; crop to
    # windows fully inside the array
    half = window // 2

    def win_mean(a):
        m = uniform_filter(a, size=window, mode="constant")
        sl = tuple(slice(half, n - half) for n in a.shape)
        return m[sl]

    mu_p = win_mean(pred)
    mu_t = win_mean(truth)
    pp = win_mean(pred * pred) - mu_p * mu_p
    tt = win_mean(truth * truth) - mu_t * mu_t
    pt = win_mean(pred * truth) - mu_p * mu_t
    num = (2 * mu_p * mu_t + c1) * (2 * pt + c2)
    den = (mu_p ** 2 + mu_t ** 2 + c1) * (pp + tt + c2)
    return float(np.mean(num / den))


def evaluate(pred, truth, window=7) -> MetricsReport:
    """All four metrics in one report."""
    pred, truth = _check_pair(pred, truth)
    p, inf_flag = psnr(pred, truth)
    return MetricsReport(
        mae=mae(pred, truth),
        nrmse=nrmse(pred, truth),
        ssim=ssim3d(pred, truth, window=window),
        psnr=p,
        psnr_infinite=inf_flag,
        n_voxels=int(pred.size),
    )
