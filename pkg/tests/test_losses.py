import math

import numpy as np
import oracles
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from occgeo.camera import rigid_flow
from occgeo.errors import DataError
from occgeo.losses import (FlowScaleParts, LossWeights, RobustLossConfig, consistency_loss, less_than_mean_mask,
                           normalize_disparity, recon_loss_basic, recon_loss_dp, recon_loss_flow, robust_penalty,
                           smoothness_dp, smoothness_flow, ssim_dissim, total_dp_loss, total_flow_loss)
from occgeo.occlusion import occlusion_mask
from occgeo.pipeline import flow_terms
from occgeo.warp import flow_pyramid, mask_pyramid, pyramid, warp_with_flow

CFG = RobustLossConfig()
LAM_EPS = 0.15 * 0.01

# frozen from exact scalar arithmetic: SSIM dissimilarity 1 - c1 / (1 + c1) of
# constant patches 0 and 1, and the combined penalty with the default weights
SSIM_ZERO_ONE = 0.9999000099990001
SIGMA_ZERO_ONE = 0.9999225083116594

images = st.integers(2, 9).flatmap(
    lambda h: st.integers(2, 9).flatmap(
        lambda w: arrays(np.float64, (h, w, 3), elements=st.floats(0, 1))))


def test_config_validation():
    with pytest.raises(ValueError):
        RobustLossConfig(lambda_rho=1.5)
    with pytest.raises(ValueError):
        RobustLossConfig(eps=0.0)
    with pytest.raises(ValueError):
        RobustLossConfig(ssim_window=4)
    with pytest.raises(ValueError):
        LossWeights(w_smooth_dp=-1.0)
    assert (CFG.lambda_rho, CFG.eps, CFG.c1, CFG.c2) == (0.15, 0.01, 1e-4, 9e-4)
    assert LossWeights() == LossWeights(1.0, 0.2, 1.0, 0.1, 0.005)


@settings(max_examples=60, deadline=None)
@given(images)
def test_penalty_of_identical_images(x):
    err = robust_penalty(x, x)
    assert np.max(np.abs(err - LAM_EPS)) <= 1e-12
    assert not ssim_dissim(x, x).any()


@settings(max_examples=60, deadline=None)
@given(images, st.integers(0, 2**31))
def test_penalty_ranges(x, seed):
    y = np.random.default_rng(seed).uniform(size=x.shape)
    d = ssim_dissim(x, y)
    assert np.all(d >= 0) and np.all(d <= 2)
    assert np.all(robust_penalty(x, y) >= 0)


def test_constant_images_zero_and_one():
    x, y = np.zeros((5, 6, 3)), np.ones((5, 6, 3))
    assert 1.0 - CFG.c1 * CFG.c2 / ((1 + CFG.c1) * CFG.c2) == pytest.approx(SSIM_ZERO_ONE, rel=1e-15)
    np.testing.assert_allclose(ssim_dissim(x, y), SSIM_ZERO_ONE, rtol=1e-14)
    np.testing.assert_allclose(robust_penalty(x, y), SIGMA_ZERO_ONE, rtol=1e-14)
    assert recon_loss_basic(np.zeros((1, 1)), np.ones((1, 1))) == pytest.approx(SIGMA_ZERO_ONE, rel=1e-14)


def test_pure_charbonnier():
    cfg = RobustLossConfig(lambda_rho=1.0)
    err = robust_penalty(np.zeros((3, 3)), np.full((3, 3), 0.03), cfg)
    np.testing.assert_allclose(err, 0.01 * math.sqrt(10), rtol=1e-14)


def test_ssim_continuity():
    x = np.random.default_rng(0).uniform(0.1, 0.9, (8, 8, 3))
    assert ssim_dissim(x, x + 1e-6).max() < 1e-3


def test_shape_mismatch():
    with pytest.raises(DataError):
        robust_penalty(np.zeros((3, 3)), np.zeros((3, 4)))


def test_less_than_mean_examples():
    np.testing.assert_array_equal(less_than_mean_mask([[1, 1], [1, 5]], np.ones((2, 2))), [[1, 1], [1, 0]])
    np.testing.assert_array_equal(less_than_mean_mask(np.full((2, 2), 0.7), np.ones((2, 2))), 0)
    np.testing.assert_array_equal(less_than_mean_mask([[2, 2], [4, 4]], [[1, 1], [0, 0]]), 0)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 5), elements=st.floats(0, 10)))
def test_less_than_mean_masks_the_maximum(err):
    lm = less_than_mean_mask(err, np.ones((4, 5)))
    if err.max() > err.min():
        assert lm.min() == 0
        assert lm.flat[np.argmax(err)] == 0


def test_recon_basic_examples():
    x = np.random.default_rng(1).uniform(size=(6, 7, 3))
    assert recon_loss_basic(x, x) == pytest.approx(6 * 7 * LAM_EPS, rel=1e-12)
    y = np.random.default_rng(2).uniform(size=(6, 7, 3))
    # side-by-side copies double the loss: the copies join along a replicated edge
    x2 = np.concatenate([x, x[:, ::-1]], axis=1)
    y2 = np.concatenate([y, y[:, ::-1]], axis=1)
    assert recon_loss_basic(x2, y2) == pytest.approx(2 * recon_loss_basic(x, y), rel=1e-12)


def test_recon_masked_examples():
    rng = np.random.default_rng(3)
    x = rng.uniform(size=(8, 8, 3))
    y = rng.uniform(size=(8, 8, 3))
    assert recon_loss_dp(x, y, np.zeros((8, 8)))[0] == 0.0
    assert recon_loss_flow(x, y, np.zeros((8, 8)))[0] == 0.0
    loss, lm = recon_loss_dp(x, x, np.ones((8, 8)))
    assert loss == 0.0 and not lm.any()
    occ = (rng.uniform(size=(8, 8)) < 0.7).astype(np.uint8)
    a, lm_a = recon_loss_dp(x, y, occ)
    b, lm_b = recon_loss_flow(x, y, occ)
    assert a == b
    np.testing.assert_array_equal(lm_a, lm_b)


def test_corrupted_quadrant_is_excluded():
    rng = np.random.default_rng(4)
    x_t = rng.uniform(0.2, 0.8, (16, 16, 3))
    x_hat = np.clip(x_t + rng.normal(0, 0.01, x_t.shape), 0, 1)
    x_hat[:8, :8] = rng.uniform(size=(8, 8, 3))
    occ = np.ones((16, 16), dtype=np.uint8)
    for fn in (recon_loss_dp, recon_loss_flow):
        loss, lm = fn(x_t, x_hat, occ)
        assert not lm[:8, :8].any()
        assert lm[10:, 10:].all()
        assert loss < recon_loss_basic(x_t, x_hat)


def test_smoothness_constant_and_domain():
    guide = np.random.default_rng(5).uniform(size=(6, 9, 3))
    for mode in ("basic", "mean", "max"):
        assert smoothness_dp(np.full((6, 9), 0.3), guide, mode) == 0.0
    disp = np.random.default_rng(6).uniform(0.05, 2.0, (6, 9))
    q = normalize_disparity(disp, "max")
    assert q.min() == 1.0
    np.testing.assert_allclose(q, (1 / disp) / (1 / disp).min(), rtol=1e-14)
    with pytest.raises(DataError):
        smoothness_dp(np.zeros((6, 9)), guide)
    with pytest.raises(ValueError):
        normalize_disparity(disp, "median")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.1, 10.0, 3.7]))
def test_smoothness_scaling_laws(seed, c):
    rng = np.random.default_rng(seed)
    disp = rng.uniform(0.02, 1.0, (7, 8))
    guide = rng.uniform(size=(7, 8, 3))
    for mode in ("max", "mean"):
        ref = smoothness_dp(disp, guide, mode)
        assert abs(smoothness_dp(c * disp, guide, mode) - ref) <= 1e-9 * ref
    ref = smoothness_dp(disp, guide, "basic")
    assert smoothness_dp(c * disp, guide, "basic") == pytest.approx(c * c * ref, rel=1e-9)


def test_smoothness_flow_examples():
    guide = np.full((5, 7, 3), 0.5)
    assert smoothness_flow(np.full((5, 7, 2), 3.0), guide) == 0.0
    flow = np.zeros((5, 7, 2))
    flow[..., 0] = np.arange(7)
    assert smoothness_flow(flow, guide) == 5 * 6

    step = np.zeros((5, 7, 2))
    step[:, 4:, 0] = 2.0
    edge_guide = guide.copy()
    edge_guide[:, 4:] = 0.9
    assert smoothness_flow(step, edge_guide) < smoothness_flow(step, guide)
    assert smoothness_flow(step, edge_guide) == pytest.approx(5 * (2.0 * math.exp(-0.4)) ** 2, rel=1e-14)


def test_consistency_examples():
    rng = np.random.default_rng(7)
    rigid = rng.normal(0, 3, (6, 8, 2))
    flow = rng.normal(0, 3, (6, 8, 2))
    ones = np.ones((6, 8), dtype=np.uint8)
    assert consistency_loss(rigid, flow, ones, ones, ones) == 0.0

    edge = ones.copy()
    edge[:, :2] = 0
    blank = ones.copy()
    blank[4:, 5:] = 0
    lm = ones.copy()
    lm[0, 0] = 0
    weight = (1 - edge * blank) * lm
    flow = rigid.copy()
    assert consistency_loss(rigid, flow, edge, blank, lm) == pytest.approx(weight.sum() * LAM_EPS, rel=1e-12)


def test_consistency_matches_oracle():
    rng = np.random.default_rng(8)
    rigid = rng.normal(0, 4, (8, 8, 2))
    flow = rigid + rng.normal(0, 1, (8, 8, 2))
    edge = (rng.uniform(size=(8, 8)) < 0.6).astype(np.uint8)
    blank = (rng.uniform(size=(8, 8)) < 0.6).astype(np.uint8)
    lm = (rng.uniform(size=(8, 8)) < 0.8).astype(np.uint8)
    ref = oracles.consistency(rigid.tolist(), flow.tolist(), edge.tolist(), blank.tolist(), lm.tolist())
    assert consistency_loss(rigid, flow, edge, blank, lm) == pytest.approx(ref, rel=1e-10)


def test_totals():
    assert total_dp_loss(10, 5, LossWeights()) == pytest.approx(11.0, rel=1e-15)
    assert total_dp_loss([4, 6], 5) == pytest.approx(11.0, rel=1e-15)
    assert total_dp_loss(10, 5, LossWeights(0, 0, 0, 0, 0)) == 0.0
    assert total_flow_loss([FlowScaleParts(8, 10, 200)]) == pytest.approx(10.0, rel=1e-15)
    assert total_flow_loss([FlowScaleParts(0, 0, 0)] * 6) == 0.0


def test_multiscale_total_is_sum_of_levels(suite):
    fr = suite[1]
    masks = occlusion_mask(fr.depth_t, fr.depth_s, fr.T, fr.K)
    flow = fr.gt_flow
    result = flow_terms(fr.img_t, fr.img_s, flow, fr.depth_t, fr.T, fr.K, masks, levels=6)
    assert len(result.levels) == 6

    w = LossWeights()
    rigid, _ = rigid_flow(fr.depth_t, fr.T, fr.K)
    xt, xs = pyramid(fr.img_t, 6), pyramid(fr.img_s, 6)
    fl, rg = flow_pyramid(flow, 6), flow_pyramid(rigid, 6)
    occ, edge, blank = (mask_pyramid(m, 6) for m in (masks.combined, masks.edge, masks.blank))
    per_level = []
    for k in range(6):
        x_hat, inb = warp_with_flow(xs[k], fl[k])
        recon, lm = recon_loss_flow(xt[k], x_hat, occ[k] * inb)
        cons = consistency_loss(rg[k], fl[k], edge[k], blank[k], lm)
        smooth = smoothness_flow(fl[k], xt[k])
        per_level.append(w.w_recon_f * recon + w.w_consistency * cons + w.w_smooth_f * smooth)
    assert result.total == pytest.approx(math.fsum(per_level), rel=1e-12)


def test_losses_match_scalar_oracle():
    rng = np.random.default_rng(9)
    for _ in range(5):
        x = rng.uniform(size=(6, 7, 3))
        y = np.clip(x + rng.normal(0, 0.2, x.shape), 0, 1)
        occ = (rng.uniform(size=(6, 7)) < 0.7).astype(np.uint8)
        assert recon_loss_basic(x, y) == pytest.approx(oracles.recon_basic(x.tolist(), y.tolist()), rel=1e-10)
        ref, ref_lm = oracles.recon_masked(x.tolist(), y.tolist(), occ.tolist())
        loss, lm = recon_loss_dp(x, y, occ)
        assert loss == pytest.approx(ref, rel=1e-10)
        np.testing.assert_array_equal(lm, ref_lm)
