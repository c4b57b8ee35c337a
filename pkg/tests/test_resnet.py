"""ResNet builder: parameter accounting, equivalence, mode semantics."""
import dataclasses

import numpy as np
import pytest

from pulsenet import autodiff as ad
from pulsenet.nn import ComplexTensor
from pulsenet.resnet import (
    STAGE_BLOCKS,
    ModelConfig,
    build_resnet,
    count_parameters,
    find_matched_width,
    parameter_count_formula,
    summarize,
    tie_complex_to_iq,
)


def _cfg(**kw):
    base = dict(
        arithmetic="complex",
        depth=22,
        base_width=8,
        first_kernel=9,
        input_length=64,
        num_classes=5,
    )
    base.update(kw)
    return ModelConfig(**base)


def _random_batch(b, d, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((b, d)) + 1j * rng.standard_normal((b, d))).astype(
        np.complex64
    )


def test_depth_map_arithmetic():
    for depth, blocks in STAGE_BLOCKS.items():
        assert depth == 2 + 2 * sum(blocks)


def test_unsupported_depth_lists_options():
    with pytest.raises(ValueError, match="22"):
        _cfg(depth=23).validate()


@pytest.mark.parametrize("arithmetic", ["complex", "iq-2ch", "real-1ch"])
@pytest.mark.parametrize("depth", sorted(STAGE_BLOCKS))
@pytest.mark.parametrize("width", [8, 16, 32])
def test_parameter_count_matches_formula(arithmetic, depth, width):
    cfg = _cfg(arithmetic=arithmetic, depth=depth, base_width=width)
    model = build_resnet(cfg)
    assert count_parameters(model) == parameter_count_formula(cfg)


def test_single_complex_conv_counts_2m_reals():
    from pulsenet.nn import ComplexConv1d, Conv1d

    layer = ComplexConv1d(1, 1, 11)
    n = sum(p.data.size for _, p in layer.named_parameters())
    assert n == 22  # 2 reals per complex tap
    untied = Conv1d(2, 2, 11)
    n4 = sum(p.data.size for _, p in untied.named_parameters())
    assert n4 == 44  # 4 reals per tap pair


def test_complex_layer_is_half_of_untied():
    for m, ch in [(3, 4), (9, 8), (11, 2)]:
        from pulsenet.nn import ComplexConv1d, Conv1d

        cplx = sum(p.data.size for _, p in ComplexConv1d(ch, ch, m).named_parameters())
        untied = sum(
            p.data.size for _, p in Conv1d(2 * ch, 2 * ch, m).named_parameters()
        )
        assert 2 * cplx == untied


def test_doubling_width_doubles_stem_conv_params():
    def stem_count(w):
        cfg = _cfg(base_width=w)
        model = build_resnet(cfg)
        return sum(p.data.size for n, p in model.named_parameters() if n.startswith("stem_conv"))

    assert stem_count(16) == 2 * stem_count(8)


def test_matched_budget_pair_depth30():
    # channel-adjusted comparison: complex width 16 vs real-1ch width 23
    cfg_c = _cfg(arithmetic="complex", depth=30, base_width=16, input_length=1024, num_classes=17)
    n_c = parameter_count_formula(cfg_c)
    w_r, n_r = find_matched_width("real-1ch", n_c, cfg_c)
    assert w_r == 23
    assert n_c <= n_r
    assert abs(n_c - n_r) / max(n_c, n_r) < 0.06


def test_best_row_config_builds_and_summarizes():
    cfg = _cfg(arithmetic="complex", depth=30, base_width=8, first_kernel=9,
               input_length=1024, num_classes=17)
    model = build_resnet(cfg)
    s = summarize(cfg)
    assert s.real_parameter_count == count_parameters(model)
    text = s.format()
    assert "total" in text and str(s.real_parameter_count) in text
    assert s.receptive_field > cfg.first_kernel


@pytest.mark.parametrize("arithmetic", ["complex", "iq-2ch", "real-1ch"])
@pytest.mark.parametrize("b", [1, 3])
def test_output_shape(arithmetic, b):
    cfg = _cfg(arithmetic=arithmetic)
    model = build_resnet(cfg)
    logits = model.predict_logits(_random_batch(b, cfg.input_length))
    assert logits.shape == (b, cfg.num_classes)
    assert np.isfinite(logits).all()


def test_eval_mode_idempotent():
    model = build_resnet(_cfg())
    x = _random_batch(2, 64)
    l1 = model.predict_logits(x)
    l2 = model.predict_logits(x)
    np.testing.assert_array_equal(l1, l2)


def test_zero_input_zero_head_gives_zero_logits():
    model = build_resnet(_cfg())
    model.head.fc.weight.data[:] = 0
    model.head.fc.bias.data[:] = 0
    logits = model.predict_logits(np.zeros((2, 64), np.complex64))
    np.testing.assert_array_equal(logits, np.zeros((2, 5), np.float32))


def test_real_1ch_ignores_quadrature():
    model = build_resnet(_cfg(arithmetic="real-1ch"))
    x = _random_batch(2, 64)
    np.testing.assert_array_equal(model.predict_logits(x), model.predict_logits(np.conj(x)))


def test_length_mismatch_raises():
    model = build_resnet(_cfg())
    with pytest.raises(ValueError, match="length"):
        model.predict_logits(_random_batch(2, 65))


def test_tied_iq_matches_complex_end_to_end():
    cfg = _cfg(arithmetic="complex", depth=30, base_width=8, input_length=128, num_classes=7)
    model = build_resnet(cfg, seed=3)
    tied = tie_complex_to_iq(model)
    x = _random_batch(4, 128, seed=5)
    lc = model.predict_logits(x)
    lr = tied.predict_logits(x)
    rel = np.abs(lc - lr).max() / max(np.abs(lc).max(), 1e-9)
    assert rel < 1e-4


def test_tied_iq_matches_in_train_mode_too():
    cfg = _cfg(arithmetic="complex", depth=22, base_width=4, input_length=64)
    model = build_resnet(cfg, seed=4)
    tied = tie_complex_to_iq(model)
    x = _random_batch(6, 64, seed=6)
    with ad.no_grad():
        lc = model.forward(x, train=True).data
        lr = tied.forward(x, train=True).data
    rel = np.abs(lc - lr).max() / max(np.abs(lc).max(), 1e-9)
    assert rel < 1e-4


def test_real_subspace_embedding_stays_real():
    # zero imaginary input plane + fresh (zero-shift) split layers keep the
    # imaginary plane at zero through split relu / split batchnorm
    from pulsenet.nn import SplitBatchNorm, split_relu
    from pulsenet.autodiff import Tensor

    rng = np.random.default_rng(0)
    x = ComplexTensor(
        Tensor(rng.standard_normal((4, 3, 16)).astype(np.float32)),
        Tensor(np.zeros((4, 3, 16), np.float32)),
    )
    y = split_relu(x)
    assert np.array_equal(y.im.data, np.zeros_like(y.im.data))
    bn = SplitBatchNorm(3)
    z = bn(x, train=True)
    np.testing.assert_allclose(z.im.data, 0.0, atol=1e-7)


def test_snapshot_restore_roundtrip():
    model = build_resnet(_cfg())
    snap = model.snapshot()
    x = _random_batch(2, 64)
    before = model.predict_logits(x)
    for p in model.parameters():
        p.data += 0.05
    assert not np.allclose(model.predict_logits(x), before)
    model.restore(snap)
    np.testing.assert_array_equal(model.predict_logits(x), before)
