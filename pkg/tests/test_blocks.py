import numpy as np
import pytest

from fovea import naive
from fovea.blocks import (AttentionHeadParams, CornerHeadParams, FireParams,
                          ResidualParams, attention_head, corner_head, fire_module,
                          residual_block)

RTOL = 1e-5


def rand(shape, seed=0, scale=1.0):
    return (np.random.default_rng(seed).normal(size=shape) * scale).astype(np.float32)


# ---- residual ------------------------------------------------------------------


def test_residual_zero_main_path_is_identity_on_nonnegative_input():
    x = np.abs(rand((1, 4, 6, 6), seed=1))
    p = ResidualParams.zeros(4, 4)
    assert p.proj_w is None
    assert np.array_equal(residual_block(x, p), x)


def test_residual_zero_weights_with_projection_gives_zero():
    x = rand((1, 4, 6, 6), seed=2)
    p = ResidualParams.zeros(4, 6)
    assert np.all(residual_block(x, p) == 0)


def test_residual_output_shapes():
    x = rand((2, 4, 8, 8), seed=3)
    assert residual_block(x, ResidualParams.create(4, 6, rng=np.random.default_rng(4))).shape == (2, 6, 8, 8)
    assert residual_block(x, ResidualParams.create(4, 6, stride=2, rng=np.random.default_rng(5))).shape == (2, 6, 4, 4)


def _residual_oracle(x, p):
    y = naive.conv2d_naive(x, p.conv1_w, p.conv1_b, p.stride, 1)
    y = np.maximum(y, 0.0)
    y = naive.conv2d_naive(y, p.conv2_w, p.conv2_b, 1, 1)
    if p.has_projection:
        shortcut = naive.conv2d_naive(x, p.proj_w, p.proj_b, p.stride, 0)
    else:
        shortcut = np.asarray(x, np.float64)
    return np.maximum(y + shortcut, 0.0)


def test_residual_matches_composed_oracle():
    x = rand((1, 4, 6, 6), seed=6)
    for out_c, stride, seed in [(4, 1, 7), (6, 1, 8), (6, 2, 9)]:
        p = ResidualParams.create(4, out_c, stride=stride, rng=np.random.default_rng(seed))
        np.testing.assert_allclose(residual_block(x, p), _residual_oracle(x, p),
                                   rtol=RTOL, atol=1e-6)


# ---- fire ----------------------------------------------------------------------


def test_fire_shapes_and_squeeze_width():
    for k, kp in [(64, 64), (64, 128), (128, 256), (256, 256)]:
        p = FireParams.create(k, kp, rng=np.random.default_rng(k + kp))
        assert p.squeeze_channels == kp // 2
        assert p.squeeze_w.shape == (kp // 2, k, 1, 1)
        x = rand((1, k, 6, 6), seed=k)
        y = fire_module(x, p)
        assert y.shape == (1, kp, 6, 6)


def test_fire_rejects_odd_output_channels():
    with pytest.raises(ValueError, match="even"):
        FireParams(4, 5)


def test_fire_and_residual_weight_counts_at_256():
    fire = FireParams.create(256, 256)
    res = ResidualParams.create(256, 256)
    # closed-form sums, cross-checked against the allocated arrays
    assert fire.weight_count() == 256 * 128 + 128 * 128 + 9 * 128 == 50304
    assert res.weight_count() == 2 * 9 * 256 * 256 == 1179648
    assert fire.weight_count() == sum(a.size for a in (fire.squeeze_w, fire.expand1_w, fire.dw_w))


def test_fire_zero_weights_zero_output():
    p = FireParams.zeros(8, 8)
    assert np.all(fire_module(rand((1, 8, 5, 5), seed=10), p) == 0)


def _fire_oracle(x, p):
    s = naive.conv2d_naive(x, p.squeeze_w, p.squeeze_b, 1, 0)
    b1 = naive.conv2d_naive(s, p.expand1_w, p.expand1_b, p.stride, 0)
    b3 = naive.depthwise_conv2d_naive(s, p.dw_w, p.stride, 1)
    return np.maximum(np.concatenate([b1, b3], axis=1), 0.0)


def test_fire_matches_composed_oracle():
    x = rand((1, 4, 6, 6), seed=11)
    for kp, stride, seed in [(4, 1, 12), (8, 1, 13), (8, 2, 14)]:
        p = FireParams.create(4, kp, stride=stride, rng=np.random.default_rng(seed))
        np.testing.assert_allclose(fire_module(x, p), _fire_oracle(x, p),
                                   rtol=RTOL, atol=1e-6)


def test_fire_cheaper_than_residual_across_grid():
    for k in (4, 8, 16, 64, 128, 256):
        for kp in (4, 8, 16, 64, 128, 256):
            fire = FireParams.create(k, kp)
            res = ResidualParams.create(k, kp)
            assert fire.weight_count() < res.weight_count(), (k, kp)


# ---- attention head ------------------------------------------------------------


def test_attention_head_zero_weights_gives_half():
    p = AttentionHeadParams.zeros(8, mid_channels=16)
    y = attention_head(rand((1, 8, 5, 5), seed=15), p)
    assert y.shape == (1, 1, 5, 5)
    assert np.all(y == 0.5)


def test_attention_head_spatial_dims_follow_feature():
    p = AttentionHeadParams.create(8, mid_channels=16, rng=np.random.default_rng(16))
    for hw in [(5, 5), (12, 7)]:
        y = attention_head(rand((1, 8) + hw, seed=17), p)
        assert y.shape == (1, 1) + hw


def test_attention_head_matches_composed_oracle():
    x = rand((1, 4, 6, 6), seed=18)
    p = AttentionHeadParams.create(4, mid_channels=8, rng=np.random.default_rng(19))
    y1 = naive.conv2d_naive(x, p.conv1_w, p.conv1_b, 1, 1)
    y1 = np.maximum(y1, 0.0)
    y2 = naive.conv2d_naive(y1, p.conv2_w, p.conv2_b, 1, 0)
    want = 1.0 / (1.0 + np.exp(-y2))
    np.testing.assert_allclose(attention_head(x, p), want, rtol=RTOL, atol=1e-6)


def test_attention_head_stays_in_open_interval_for_extreme_inputs():
    p = AttentionHeadParams.create(4, mid_channels=8, rng=np.random.default_rng(20))
    x = rand((1, 4, 6, 6), seed=21, scale=1e3)
    y = attention_head(x, p)
    assert np.all((y > 0) & (y < 1)) and np.all(np.isfinite(y))


# ---- corner head ---------------------------------------------------------------


def test_corner_head_zero_weights():
    p = CornerHeadParams.zeros(8, num_classes=2, mid_channels=16)
    heat, embed, off = corner_head(rand((1, 8, 5, 5), seed=22), p)
    assert np.all(heat == 0.5)
    assert np.all(embed == 0) and np.all(off == 0)


def test_corner_head_output_shapes():
    p = CornerHeadParams.create(256, num_classes=3, rng=np.random.default_rng(23))
    heat, embed, off = corner_head(rand((1, 256, 64, 64), seed=24, scale=0.1), p)
    assert heat.shape == (1, 3, 64, 64)
    assert embed.shape == (1, 1, 64, 64)
    assert off.shape == (1, 2, 64, 64)
    assert np.all((heat > 0) & (heat < 1))


def test_corner_head_lead_kernel_one():
    p = CornerHeadParams.create(8, num_classes=2, lead_kernel=1, mid_channels=16,
                                rng=np.random.default_rng(25))
    assert p.lead_w.shape == (16, 8, 1, 1)
    heat, _, _ = corner_head(rand((1, 8, 6, 6), seed=26), p)
    assert heat.shape == (1, 2, 6, 6)


def test_corner_head_rejects_zero_classes():
    with pytest.raises(ValueError, match="num_classes"):
        CornerHeadParams.create(8, num_classes=0)


def test_blocks_preserve_batch_dimension():
    x = rand((3, 4, 5, 5), seed=27)
    assert residual_block(x, ResidualParams.create(4, 4, rng=np.random.default_rng(1))).shape[0] == 3
    assert fire_module(x, FireParams.create(4, 8, rng=np.random.default_rng(2))).shape[0] == 3
    assert attention_head(x, AttentionHeadParams.create(4, 8, rng=np.random.default_rng(3))).shape[0] == 3
