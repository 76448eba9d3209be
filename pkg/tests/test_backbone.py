import numpy as np
import pytest

from tsc_hybrid import ops
from tsc_hybrid.backbone import (
    BackboneConfig,
    ContextOverflowError,
    HybridModel,
    assemble_input,
    build_backbone,
)
from tsc_hybrid.encoders import EncoderConfig, InvalidConfigError, build_encoder
from tsc_hybrid.gradcheck import max_relative_error
from tsc_hybrid.optim import Adam
from tsc_hybrid.tensor import ShapeError, Tensor, default_dtype, no_grad

SMALL_BB = BackboneConfig(layers=1, hidden=16, heads=2, max_len=64, prompt_len=8)


def small_hybrid(family="inception", T=16, num_classes=3, bb=SMALL_BB, seed=0):
    cfg = EncoderConfig(family=family, hidden=bb.hidden, depth=1, bottleneck=4, branch_filters=4,
                        cnn_channels=(8, 8, 8), mlp_widths=(16,), layers=1, heads=2)
    return HybridModel(build_encoder(cfg, T, 1, seed=seed), build_backbone(bb), num_classes, seed=seed + 1)


def test_default_backbone_parameter_count():
    assert build_backbone().num_parameters() == 827264


def test_checksum_is_seed_deterministic():
    assert build_backbone().checksum() == build_backbone().checksum()
    assert build_backbone(BackboneConfig(seed=1)).checksum() != build_backbone().checksum()


def test_every_backbone_parameter_frozen():
    bb = build_backbone(SMALL_BB)
    assert bb.parameters()
    assert not any(p.requires_grad for p in bb.parameters())
    assert bb.trainable_parameters() == []


def test_forward_is_bitwise_stable():
    bb = build_backbone(SMALL_BB)
    x = Tensor(np.random.default_rng(0).normal(size=(2, 12, 16)))
    assert bb(x).data.tobytes() == bb(x).data.tobytes()


def test_backbone_init_scale():
    bb = build_backbone()
    w = bb.layers[0].attn.qkv.weight.data
    assert abs(float(w.std()) - 0.02) < 1e-3


def test_invalid_backbone_config():
    with pytest.raises(InvalidConfigError):
        build_backbone(BackboneConfig(hidden=130, heads=4))


def test_assembled_layout():
    bb = build_backbone(SMALL_BB)
    Z = Tensor(np.random.default_rng(1).normal(size=(3, 16, 16)))
    zhat = assemble_input(Z, bb)
    assert zhat.shape == (3, 25, 16)
    np.testing.assert_array_equal(zhat.data[1, :8], bb.prompt.data)
    np.testing.assert_array_equal(zhat.data[:, 8:24], Z.data)
    np.testing.assert_array_equal(zhat.data[2, 24], bb.padding.data)


def test_perturbing_latents_touches_only_their_slots():
    bb = build_backbone(SMALL_BB)
    rng = np.random.default_rng(2)
    Z = rng.normal(size=(2, 16, 16))
    a = assemble_input(Tensor(Z), bb).data
    b = assemble_input(Tensor(Z + rng.normal(size=Z.shape)), bb).data
    changed = np.flatnonzero(np.any(a != b, axis=(0, 2)))
    np.testing.assert_array_equal(changed, np.arange(8, 24))


def test_context_overflow_names_lengths():
    bb = build_backbone(SMALL_BB)
    with pytest.raises(ContextOverflowError, match=r"\(8\).*\(60\).*64"):
        assemble_input(Tensor(np.zeros((1, 60, 16))), bb)
    with pytest.raises(ContextOverflowError):
        small_hybrid(family="cnn", T=60)


def test_hidden_size_mismatch():
    enc = build_encoder(EncoderConfig(family="mlp", hidden=8), 16, 1)
    with pytest.raises(ShapeError):
        HybridModel(enc, build_backbone(SMALL_BB), 2)


def test_causal_backbone_prefix_is_independent_of_suffix():
    bb = build_backbone(SMALL_BB)
    rng = np.random.default_rng(3)
    x = rng.normal(size=(1, 20, 16))
    y = x.copy()
    y[:, 12:] = rng.normal(size=(1, 8, 16))
    np.testing.assert_allclose(bb(Tensor(x)).data[:, :12], bb(Tensor(y)).data[:, :12], atol=1e-6)


@pytest.mark.parametrize("family", ["mlp", "cnn", "inception", "transformer"])
def test_hybrid_output_shape(family):
    model = small_hybrid(family)
    logits = model(Tensor(np.random.default_rng(4).normal(size=(5, 16, 1))))
    assert logits.shape == (5, 3)
    assert model.hidden_states(Tensor(np.zeros((2, 16, 1)))).shape[1] == 8 + model.encoder.num_tokens + 1


def test_different_inputs_give_different_logits():
    model = small_hybrid()
    rng = np.random.default_rng(5)
    with no_grad():
        a = model(Tensor(rng.normal(size=(2, 16, 1)))).data
        b = model(Tensor(rng.normal(size=(2, 16, 1)))).data
    assert not np.allclose(a, b)


def test_training_step_reaches_encoder_but_not_backbone():
    model = small_hybrid()
    before = model.backbone.checksum()
    opt = Adam(model.trainable_parameters(), lr=1e-2)
    X = Tensor(np.random.default_rng(6).normal(size=(4, 16, 1)))
    loss = ops.softmax_cross_entropy(model(X), np.array([0, 1, 2, 0]))
    loss.backward()
    assert all(p.grad is None for p in model.backbone.parameters())
    enc_grads = [p.grad for p in model.encoder.parameters()]
    assert all(g is not None for g in enc_grads)
    assert sum(float(np.abs(g).sum()) for g in enc_grads) > 0
    opt.step()
    assert model.backbone.checksum() == before
    assert model.backbone.is_intact()


def test_adam_over_all_parameters_is_refused():
    model = small_hybrid()
    with pytest.raises(ValueError):
        Adam(model.parameters())


def test_readout_only_sees_its_own_prefix():
    """Changing one sample in the batch leaves the other samples' logits alone."""
    model = small_hybrid(family="mlp")
    model.eval()
    rng = np.random.default_rng(7)
    X = rng.normal(size=(3, 16, 1))
    X2 = X.copy()
    X2[1] = rng.normal(size=(16, 1))
    with no_grad():
        a, b = model(Tensor(X)).data, model(Tensor(X2)).data
    np.testing.assert_allclose(a[[0, 2]], b[[0, 2]], atol=1e-6)
    assert not np.allclose(a[1], b[1])


def test_tiny_hybrid_grads_match_finite_differences():
    bb_cfg = BackboneConfig(layers=1, hidden=16, heads=2, max_len=32, prompt_len=2)
    rng = np.random.default_rng(8)
    with default_dtype(np.float64):
        enc = build_encoder(EncoderConfig(family="mlp", hidden=16, mlp_widths=(8,)), 8, 1, seed=9)
        model = HybridModel(enc, build_backbone(bb_cfg), 2, seed=10)
        X = Tensor(rng.normal(size=(3, 8, 1)))
        y = np.array([0, 1, 1])
        err = max_relative_error(lambda: ops.softmax_cross_entropy(model(X), y), model.trainable_parameters())
    assert err < 1e-3


def test_tiny_hybrid_with_conv_encoder_grads():
    bb_cfg = BackboneConfig(layers=1, hidden=16, heads=2, max_len=32, prompt_len=2)
    rng = np.random.default_rng(11)
    with default_dtype(np.float64):
        cfg = EncoderConfig(family="inception", hidden=16, depth=1, n_kernels=2, kernel_size=2,
                            bottleneck=2, branch_filters=2)
        model = HybridModel(build_encoder(cfg, 8, 1, seed=12), build_backbone(bb_cfg), 2, seed=13)
        X = Tensor(rng.normal(size=(2, 8, 1)))
        err = max_relative_error(
            lambda: ops.softmax_cross_entropy(model(X), np.array([1, 0])), model.trainable_parameters()
        )
    assert err < 1e-3


def test_backbone_checkpoint_roundtrip(tmp_path):
    bb = build_backbone(SMALL_BB)
    path = tmp_path / "bb.tsc"
    bb.save(path)
    other = build_backbone(BackboneConfig(**{**SMALL_BB.to_dict(), "seed": 99}))
    assert other.checksum() != bb.checksum()
    other.load(path)
    assert other.checksum() == bb.checksum()
    x = Tensor(np.random.default_rng(9).normal(size=(1, 10, 16)))
    np.testing.assert_array_equal(other(x).data, bb(x).data)


def test_hybrid_checkpoint_roundtrip(tmp_path):
    model = small_hybrid(seed=0)
    path = tmp_path / "model.tsc"
    model.save(path)
    clone = small_hybrid(seed=5)
    clone.load(path)
    assert clone.checksum() == model.checksum()


def test_logits_depend_only_on_readout_hidden_state():
    model = small_hybrid()
    model.eval()
    X = Tensor(np.random.default_rng(10).normal(size=(3, 16, 1)))
    with no_grad():
        hidden = model.hidden_states(X).data.copy()
        logits = model(X).data
    hidden[:, :-1] = np.random.default_rng(11).normal(size=hidden[:, :-1].shape)
    np.testing.assert_array_equal(model.head(Tensor(hidden[:, -1, :])).data, logits)
