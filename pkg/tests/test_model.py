"""Encoder stacks: geometry, parameter budget, split semantics, checkpoints."""

import numpy as np
import pytest

from mirep.diffcore import Tape, backward, ops
from mirep.errors import ConfigurationError, DimensionError
from mirep.model import (EncoderConfig, build_deepconvnet, build_eegnet,
                         build_encoder, forward, load_checkpoint,
                         save_checkpoint)

RNG = np.random.default_rng(20240813)


def eegnet_model(seed=0, **kwargs):
    config = EncoderConfig(backbone="eegnet", **kwargs)
    return build_eegnet(config, np.random.default_rng(seed))


def dcn_model(seed=0, **kwargs):
    kwargs.setdefault("n_c", 16)
    kwargs.setdefault("n_t", 512)
    config = EncoderConfig(backbone="deepconvnet", **kwargs)
    return build_deepconvnet(config, np.random.default_rng(seed))


def batch(model, n=3, seed=1):
    rng = np.random.default_rng(seed)
    cfg = model.config
    return rng.normal(size=(n, cfg.n_c, cfg.n_t)).astype(np.float32)


class TestShapes:
    def test_eegnet_geometry(self):
        model = eegnet_model()
        # n_t=80, half-rate temporal kernel 32 -> 49; separable 16 -> 34
        assert model.config.temporal_kernel == 32
        assert model.feature_shape == (1, 49)
        assert model.d1 == 16
        assert model.d_g == 34 * 16

    def test_eegnet_kernel_tracks_sample_rate(self):
        config = EncoderConfig(backbone="eegnet", n_t=300, sample_rate=250.0)
        assert config.temporal_kernel == 125

    def test_eegnet_forward_shapes(self):
        model = eegnet_model()
        bundle, probs = forward(batch(model), model)
        assert bundle.f_l.shape == (3, 1, 49, 16)
        assert bundle.f_re.shape == (3, 1, 49, 16)
        assert bundle.f_ir.shape == (3, 1, 49, 16)
        assert bundle.f_g.shape == (3, 544)
        assert bundle.logits.shape == (3, 2)
        assert probs.shape == (3, 2)

    def test_deepconvnet_geometry(self):
        model = dcn_model()
        # 512 -> 503 -> (494 pool 164) -> (155 pool 51); block 4: 42 pool 14
        assert model.feature_shape == (1, 51)
        assert model.d1 == 100
        assert model.d_g == 14 * 200

    def test_deepconvnet_forward_shapes(self):
        model = dcn_model()
        bundle, probs = forward(batch(model, n=2), model)
        assert bundle.f_l.shape == (2, 1, 51, 100)
        assert bundle.f_re.shape == (2, 1, 51, 100)
        assert bundle.f_g.shape == (2, 2800)
        assert probs.shape == (2, 2)

    def test_spatial_height_collapses(self):
        for model in (eegnet_model(), dcn_model()):
            assert model.feature_shape[0] == 1

    def test_short_trial_rejected_at_build(self):
        with pytest.raises(DimensionError):
            eegnet_model(n_t=30)
        with pytest.raises(DimensionError):
            dcn_model(n_t=120)

    def test_unknown_backbone_rejected(self):
        with pytest.raises(ConfigurationError):
            EncoderConfig(backbone="resnet")

    def test_wrong_channel_count_rejected(self):
        model = eegnet_model()
        bad = RNG.normal(size=(2, 5, 80)).astype(np.float32)
        with pytest.raises(DimensionError):
            forward(bad, model)


class TestParameterBudget:
    def test_eegnet_count(self):
        model = eegnet_model()
        # kernels: temporal 1*32*1*8, spatial 8*1*8*2, splitter 1*1*16*32,
        # separable 1*16*16*1 + 1*1*16*16, dense 544*2 + 2, three BN pairs
        want = (1 * 32 * 1 * 8) + (8 * 1 * 8 * 2) + (1 * 1 * 16 * 32) \
            + (1 * 16 * 16 * 1) + (1 * 1 * 16 * 16) + (544 * 2 + 2) \
            + 2 * (8 + 16 + 16)
        assert sum(p.data.size for p in model.parameters()) == want

    def test_deepconvnet_count(self):
        model = dcn_model()
        want = (1 * 10 * 1 * 25) + (16 * 1 * 25 * 25) + (1 * 10 * 25 * 50) \
            + (1 * 10 * 50 * 100) + (1 * 1 * 100 * 200) + (1 * 10 * 100 * 200) \
            + (2800 * 2 + 2) + 2 * (25 + 50 + 100 + 200)
        assert sum(p.data.size for p in model.parameters()) == want

    def test_names_unique_and_decay_targets_weights(self):
        for model in (eegnet_model(), dcn_model()):
            params = model.parameters()
            names = [p.name for p in params]
            assert len(names) == len(set(names))
            for p in params:
                is_weight = p.name.endswith(".kernel") or p.name.endswith(".weight")
                assert (p.l2_coefficient > 0) == is_weight


class TestDecompose:
    def test_identity_splitter_copies_map(self):
        model = eegnet_model()
        d1 = model.d1
        kernel = np.zeros((1, 1, d1, 2 * d1), dtype=np.float32)
        kernel[0, 0, :, :d1] = np.eye(d1)
        model.splitter.kernel.data = kernel
        f_l = model.local(ops.as_tensor(batch(model)[..., None]))
        f_re, f_ir = model.decompose(f_l)
        np.testing.assert_array_equal(f_re.data, f_l.data)
        np.testing.assert_array_equal(f_ir.data, 0.0)

    def test_halves_reassemble_splitter_output(self):
        model = eegnet_model(seed=4)
        f_l = model.local(ops.as_tensor(batch(model)[..., None]))
        split = model.splitter(f_l)
        f_re, f_ir = model.decompose(f_l)
        rebuilt = ops.concat([f_re, f_ir], axis=-1)
        np.testing.assert_array_equal(rebuilt.data, split.data)

    def test_halves_are_disjoint_channels(self):
        model = dcn_model(seed=5)
        bundle, _ = forward(batch(model, n=2), model)
        assert bundle.f_re.shape == bundle.f_ir.shape
        assert bundle.f_re.shape[-1] == model.d1


class TestForward:
    def test_probability_rows_normalized(self):
        for model in (eegnet_model(seed=2), dcn_model(seed=2)):
            _, probs = forward(batch(model, n=4), model)
            assert np.all(probs >= 0)
            np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)

    def test_irrelevant_branch_cannot_touch_logits(self):
        model = eegnet_model(seed=3)
        x = batch(model, n=4)
        _, probs = forward(x, model)
        kernel = model.splitter.kernel.data.copy()
        kernel[..., model.d1:] = 0.0
        model.splitter.kernel.data = kernel
        _, probs_zeroed = forward(x, model)
        np.testing.assert_array_equal(probs, probs_zeroed)

    def test_eval_mode_is_batch_order_equivariant(self):
        model = eegnet_model(seed=6)
        x = batch(model, n=5, seed=9)
        _, probs = forward(x, model)
        perm = np.array([3, 0, 4, 1, 2])
        _, probs_perm = forward(x[perm], model)
        np.testing.assert_allclose(probs_perm, probs[perm], atol=1e-6)

    def test_accepts_nhwc_input(self):
        model = eegnet_model(seed=7)
        x = batch(model, n=2)
        _, probs_3d = forward(x, model)
        _, probs_4d = forward(x[..., None], model)
        np.testing.assert_array_equal(probs_3d, probs_4d)


class TestClassGradientIsolation:
    @pytest.mark.parametrize("builder", [eegnet_model, dcn_model])
    def test_class_loss_ignores_irrelevant_half(self, builder):
        model = builder(seed=8)
        x = batch(model, n=4, seed=3)
        y = np.zeros((4, 2), dtype=np.float32)
        y[np.arange(4), [0, 1, 0, 1]] = 1.0
        for p in model.parameters():
            p.tensor.grad = None
        with Tape():
            bundle, _ = forward(x, model)
            loss = ops.softmax_cross_entropy(bundle.logits, y)
            backward(loss)
        grad = model.splitter.kernel.tensor.grad
        d1 = model.d1
        np.testing.assert_array_equal(grad[..., d1:], 0.0)
        assert np.any(grad[..., :d1] != 0.0)
        assert np.any(model.classifier.parameters()[0].tensor.grad != 0.0)


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        model = eegnet_model(seed=11)
        for _, arr in model.state_arrays().items():
            arr[...] = RNG.uniform(0.5, 2.0, size=arr.shape).astype(np.float32)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model, seed=11, epoch=7)
        loaded, manifest = load_checkpoint(path)
        assert manifest["seed"] == 11 and manifest["epoch"] == 7
        assert loaded.config == model.config
        for p, q in zip(model.parameters(), loaded.parameters()):
            assert p.name == q.name
            np.testing.assert_array_equal(p.data, q.data)
        for name, arr in model.state_arrays().items():
            np.testing.assert_array_equal(arr, loaded.state_arrays()[name])

    def test_round_trip_preserves_predictions(self, tmp_path):
        model = dcn_model(seed=12, n_t=160)
        x = batch(model, n=2)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model, seed=0, epoch=0)
        loaded, _ = load_checkpoint(path)
        _, probs = forward(x, model)
        _, probs_back = forward(x, loaded)
        np.testing.assert_array_equal(probs, probs_back)

    def test_truncated_payload_rejected(self, tmp_path):
        model = eegnet_model(seed=13)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model, seed=0, epoch=0)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ConfigurationError):
            load_checkpoint(path)

    def test_build_encoder_dispatch(self):
        assert build_encoder(EncoderConfig(backbone="eegnet"),
                             np.random.default_rng(0)).d1 == 16
        assert build_encoder(
            EncoderConfig(backbone="deepconvnet", n_c=8, n_t=160),
            np.random.default_rng(0)).d1 == 100
