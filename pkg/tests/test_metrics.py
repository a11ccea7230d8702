import math

import numpy as np
import pytest

from gpitomo.metrics import evaluate, mae, nrmse, psnr, ssim3d


def brute_ssim(pred, truth, window=7, k1=0.01, k2=0.03):
    """Direct per-window loop, no filtering tricks."""
    r = truth.max() - truth.min()
    c1, c2 = (k1 * r) ** 2, (k2 * r) ** 2
    nz, ny, nx = pred.shape
    vals = []
    for iz in range(nz - window + 1):
        for iy in range(ny - window + 1):
            for ix in range(nx - window + 1):
                p = pred[iz:iz + window, iy:iy + window, ix:ix + window]
                t = truth[iz:iz + window, iy:iy + window, ix:ix + window]
                mp, mt = p.mean(), t.mean()
                vp = (p * p).mean() - mp * mp
                vt = (t * t).mean() - mt * mt
                cov = (p * t).mean() - mp * mt
                vals.append(((2 * mp * mt + c1) * (2 * cov + c2))
                            / ((mp * mp + mt * mt + c1) * (vp + vt + c2)))
    return float(np.mean(vals))


def test_identical_inputs():
    rng = np.random.default_rng(51)
    a = rng.standard_normal((8, 8, 8))
    assert mae(a, a) == 0.0
    assert nrmse(a, a) == 0.0
    p, inf_flag = psnr(a, a)
    assert inf_flag and math.isinf(p)
    assert ssim3d(a, a) == pytest.approx(1.0, abs=1e-12)


def test_hand_values():
    truth = np.zeros((8, 8, 8))
    truth[0, 0, 0] = 2.0  # range 2
    pred = truth + 0.5
    assert mae(pred, truth) == pytest.approx(0.5)
    assert nrmse(pred, truth) == pytest.approx(0.25)
    p, inf_flag = psnr(pred, truth)
    assert not inf_flag
    assert p == pytest.approx(20 * math.log10(2.0 / 0.5))


def test_constant_truth_rejected():
    a = np.ones((8, 8, 8))
    with pytest.raises(ValueError, match="constant truth"):
        nrmse(a, a)
    with pytest.raises(ValueError, match="constant truth"):
        psnr(a, a)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="shape mismatch"):
        mae(np.zeros((2, 2)), np.zeros((3, 3)))


def test_nonfinite_rejected():
    a = np.zeros((8, 8, 8))
    b = a.copy()
    b[0, 0, 0] = np.inf
    with pytest.raises(ValueError, match="non-finite"):
        mae(b, a)


def test_small_dims_rejected_for_ssim():
    with pytest.raises(ValueError, match="window"):
        ssim3d(np.zeros((5, 8, 8)), np.ones((5, 8, 8)))


def test_affine_rescale_invariance():
    rng = np.random.default_rng(52)
    truth = rng.uniform(0.0, 3.0, size=(10, 10, 10))
    pred = truth + rng.normal(0.0, 0.2, size=truth.shape)
    base = evaluate(pred, truth)
    # NRMSE and PSNR survive any common affine map; SSIM only a pure scale
    # (its luminance term sees the means directly)
    shifted = evaluate(4.0 * pred - 1.0, 4.0 * truth - 1.0)
    assert shifted.nrmse == pytest.approx(base.nrmse, rel=1e-12)
    assert shifted.psnr == pytest.approx(base.psnr, rel=1e-12)
    scaled = evaluate(4.0 * pred, 4.0 * truth)
    assert scaled.ssim == pytest.approx(base.ssim, rel=1e-9)


def test_ssim_against_brute_force():
    rng = np.random.default_rng(53)
    for _ in range(10):
        truth = rng.uniform(-1.0, 1.0, size=(8, 8, 8))
        pred = truth + rng.normal(0.0, 0.3, size=truth.shape)
        got = ssim3d(pred, truth)
        ref = brute_ssim(pred, truth)
        assert got == pytest.approx(ref, abs=1e-9)


def test_evaluate_report_fields():
    rng = np.random.default_rng(54)
    truth = rng.uniform(0.0, 1.0, size=(8, 8, 8))
    pred = truth + 0.01
    rep = evaluate(pred, truth)
    assert rep.n_voxels == 512
    assert rep.mae == pytest.approx(0.01)
    assert not rep.psnr_infinite
    d = rep.to_dict()
    assert set(d) == {"mae", "nrmse", "ssim", "psnr", "psnr_infinite",
                      "n_voxels"}
