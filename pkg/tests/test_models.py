"""Forecaster behavior: forward contracts, analytic examples, and
finite-difference gradient checks for every trainable variant."""

import numpy as np
import pytest

from sinecast.autodiff import Tensor, backward, grad_check
from sinecast.errors import ConfigError, ShapeError
from sinecast.models import (
    VARIANTS,
    Forecaster,
    ModelConfig,
    addt2v_forward,
    attention,
    causal_mask,
    decoder_block,
    encoder_block,
    load_checkpoint,
    moving_average,
    persistence_forecast,
    save_checkpoint,
)


def toy_config(variant, input_len=8, horizon=8, channels=1, seed=0):
    return ModelConfig(
        variant=variant,
        input_len=input_len,
        horizon=horizon,
        channels=channels,
        d_model=8,
        n_heads=2,
        ffn_dim=8,
        ma_kernel=3,
        seed=seed,
    )


class TestModelConfig:
    def test_rejects_unknown_variant(self):
        with pytest.raises(ConfigError, match="variant"):
            ModelConfig(variant="LSTM", input_len=8, horizon=8, channels=1)

    def test_head_divisibility(self):
        with pytest.raises(ConfigError, match="n_heads"):
            ModelConfig(variant="Sencoder", input_len=8, horizon=8, channels=1,
                        d_model=10, n_heads=4)

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError, match="ma_kernel"):
            ModelConfig(variant="DLinear", input_len=8, horizon=8, channels=1, ma_kernel=4)

    def test_nonpositive_lengths_rejected(self):
        with pytest.raises(ConfigError):
            ModelConfig(variant="Linear", input_len=0, horizon=8, channels=1)


class TestPersistence:
    def test_repeats_last_window(self):
        x = Tensor(np.arange(12, dtype=float).reshape(1, 12, 1))
        out = persistence_forecast(x, 3)
        assert np.array_equal(out.data.ravel(), [9, 10, 11])

    def test_periodic_signal_continuation_is_exact(self):
        period = 4
        series = np.tile([0.0, 1.0, 0.0, -1.0], 10)
        x = Tensor(series[:24].reshape(1, 24, 1))
        truth = series[24:32]
        out = persistence_forecast(x, 8).data.ravel()
        assert np.abs(out - truth).max() == 0.0

    def test_horizon_longer_than_input_rejected(self):
        x = Tensor(np.zeros((1, 4, 1)))
        with pytest.raises(ConfigError, match="input_len >= horizon"):
            persistence_forecast(x, 5)

    def test_parameter_free_and_bitwise_deterministic(self):
        model = Forecaster(ModelConfig(variant="Persistence", input_len=8, horizon=4, channels=2))
        assert model.parameters() == []
        x = Tensor(np.random.default_rng(0).normal(size=(3, 8, 2)))
        a = model(x).data
        b = model(x).data
        assert np.array_equal(a, b)


class TestAddT2V:
    def _model(self, seed=1):
        return Forecaster(toy_config("SLP", input_len=5, horizon=4, seed=seed))

    def test_zero_periodic_branch_is_affine(self):
        m = self._model()
        m.embed.w_per.data[:] = 0.0
        m.embed.b_per.data[:] = 0.0
        x = np.random.default_rng(2).normal(size=(3, 5))
        got = addt2v_forward(m.embed, Tensor(x)).data
        expected = x @ m.embed.w_lin.data.T + m.embed.b_lin.data
        assert np.abs(got - expected).max() < 1e-12

    def test_constant_one_when_only_periodic_bias(self):
        m = self._model()
        for p in (m.embed.w_lin, m.embed.b_lin, m.embed.w_per):
            p.data[:] = 0.0
        m.embed.b_per.data[:] = np.pi / 2.0
        got = addt2v_forward(m.embed, Tensor(np.random.default_rng(3).normal(size=(2, 5)))).data
        assert np.abs(got - 1.0).max() < 1e-12

    def test_matches_two_branch_recomputation(self):
        m = self._model(seed=7)
        x = np.random.default_rng(4).normal(size=(6, 5))
        got = addt2v_forward(m.embed, Tensor(x)).data
        lin = x @ m.embed.w_lin.data.T + m.embed.b_lin.data
        per = np.sin(x @ m.embed.w_per.data.T + m.embed.b_per.data)
        assert np.abs(got - (lin + per)).max() < 1e-12

    def test_width_mismatch(self):
        m = self._model()
        with pytest.raises(ShapeError):
            addt2v_forward(m.embed, Tensor(np.zeros((2, 9))))


class TestSLP:
    def test_outputs_bounded_by_sine(self):
        m = Forecaster(toy_config("SLP", input_len=12, horizon=6, channels=3))
        x = Tensor(np.random.default_rng(5).normal(size=(4, 12, 3)) * 10)
        out = m(x).data
        assert out.shape == (4, 6, 3)
        assert np.abs(out).max() <= 1.0

    def test_identity_head_gives_sin_of_embedding(self):
        m = Forecaster(toy_config("SLP", input_len=5, horizon=5, seed=2))
        m.embed.w_per.data[:] = 0.0
        m.embed.b_per.data[:] = 0.0
        m.w.data[:] = np.eye(5)
        m.b.data[:] = 0.0
        x = np.random.default_rng(6).normal(size=(3, 5))
        h = x @ m.embed.w_lin.data.T + m.embed.b_lin.data
        got = m(Tensor(x.reshape(3, 5, 1))).data[:, :, 0]
        assert np.abs(got - np.sin(h)).max() < 1e-12


class TestMLP:
    def test_all_zero_parameters_give_zero_output(self):
        m = Forecaster(toy_config("MLP", input_len=6, horizon=4))
        for p in m.parameters():
            p.data[:] = 0.0
        out = m(Tensor(np.random.default_rng(7).normal(size=(2, 6, 1)))).data
        assert np.array_equal(out, np.zeros((2, 4, 1)))

    def test_relu_gates_negative_first_layer(self):
        m = Forecaster(toy_config("MLP", input_len=6, horizon=4))
        m.w1.data[:] = 0.0
        m.b1.data[:] = -1.0  # layer-1 preactivations all negative
        m.b2.data[:] = 0.0
        m.b3.data[:] = 0.0
        out = m(Tensor(np.random.default_rng(8).normal(size=(2, 6, 1)))).data
        assert np.abs(out).max() == 0.0


class TestLinearFamily:
    def test_nlinear_zero_weights_forecast_last_value(self):
        m = Forecaster(toy_config("NLinear", input_len=7, horizon=4, channels=2))
        m.w.data[:] = 0.0
        m.b.data[:] = 0.0
        x = np.random.default_rng(9).normal(size=(3, 7, 2))
        out = m(Tensor(x)).data
        expected = np.repeat(x[:, -1:, :], 4, axis=1)
        assert np.abs(out - expected).max() < 1e-12

    def test_dlinear_constant_series_has_zero_seasonal_part(self):
        m = Forecaster(toy_config("DLinear", input_len=9, horizon=3))
        const = np.full((1, 9, 1), 5.0)
        # trend of a constant series is the constant, so zeroing the trend
        # weight must zero the whole forecast (seasonal part is zero)
        m.w_trend.data[:] = 0.0
        m.b.data[:] = 0.0
        out = m(Tensor(const)).data
        assert np.abs(out).max() < 1e-12

    def test_dlinear_decomposition_is_additive(self):
        cfg = toy_config("DLinear", input_len=20, horizon=3)
        m = Forecaster(cfg)
        x = np.random.default_rng(10).normal(size=(4, 20))
        trend = x @ m._smooth.data.T
        seasonal = x - trend
        assert np.abs((trend + seasonal) - x).max() < 1e-12

    def test_linear_is_plain_affine(self):
        m = Forecaster(toy_config("Linear", input_len=7, horizon=4, seed=3))
        x = np.random.default_rng(11).normal(size=(2, 7, 1))
        out = m(Tensor(x)).data[:, :, 0]
        expected = x[:, :, 0] @ m.w.data.T + m.b.data
        assert np.abs(out - expected).max() < 1e-12


class TestMovingAverage:
    def test_constant_series_unchanged(self):
        x = Tensor(np.full(11, 3.5))
        assert np.abs(moving_average(x, 5).data - 3.5).max() < 1e-12

    def test_spike_example(self):
        got = moving_average(Tensor(np.array([0.0, 0.0, 3.0, 0.0, 0.0])), 3).data
        assert np.abs(got - np.array([0.0, 1.0, 1.0, 1.0, 0.0])).max() < 1e-12

    def test_matches_brute_force_with_edge_replication(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=17)
        k = 5
        padded = np.concatenate([np.full(k // 2, x[0]), x, np.full(k // 2, x[-1])])
        expected = np.array([padded[i:i + k].mean() for i in range(17)])
        got = moving_average(Tensor(x), k).data
        assert np.abs(got - expected).max() < 1e-12

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError):
            moving_average(Tensor(np.zeros(5)), 4)


class TestAttention:
    def test_single_key_returns_its_value(self):
        rng = np.random.default_rng(13)
        q = Tensor(rng.normal(size=(4, 3)))
        k = Tensor(rng.normal(size=(1, 3)))
        v = Tensor(rng.normal(size=(1, 3)))
        out = attention(q, k, v).data
        assert np.abs(out - v.data).max() < 1e-12

    def test_identical_keys_average_values(self):
        rng = np.random.default_rng(14)
        q = Tensor(rng.normal(size=(2, 3)))
        k = Tensor(np.tile(rng.normal(size=(1, 3)), (5, 1)))
        v = Tensor(rng.normal(size=(5, 3)))
        out = attention(q, k, v).data
        assert np.abs(out - v.data.mean(axis=0)).max() < 1e-12

    def test_joint_key_value_permutation_invariance(self):
        rng = np.random.default_rng(15)
        q = Tensor(rng.normal(size=(6, 4)))
        k = rng.normal(size=(9, 4))
        v = rng.normal(size=(9, 4))
        perm = rng.permutation(9)
        base = attention(q, Tensor(k), Tensor(v)).data
        permuted = attention(q, Tensor(k[perm]), Tensor(v[perm])).data
        assert np.abs(base - permuted).max() < 1e-12

    def test_causal_mask_blocks_future_positions(self):
        rng = np.random.default_rng(16)
        q = Tensor(rng.normal(size=(5, 4)))
        k = Tensor(rng.normal(size=(5, 4)))
        v = rng.normal(size=(5, 4))
        mask = causal_mask(5)
        base = attention(q, k, Tensor(v), mask).data
        v2 = v.copy()
        v2[3:] += 100.0  # rows later than position 2
        bumped = attention(q, k, Tensor(v2), mask).data
        assert np.abs(base[:3] - bumped[:3]).max() < 1e-12
        assert np.abs(base[3:] - bumped[3:]).max() > 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            attention(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))), Tensor(np.zeros((4, 5))))


class TestEncoderBlock:
    def _model(self):
        return Forecaster(toy_config("Sencoder", seed=4))

    def test_zero_weights_leave_pure_residual_path(self):
        m = self._model()
        for name in ("enc.attn.w_q", "enc.attn.w_k", "enc.attn.w_v", "enc.attn.w_o",
                     "enc.ffn.w1", "enc.ffn.w2"):
            m.params[name].data[:] = 0.0
        x = np.random.default_rng(17).normal(size=(2, 8, 8))
        got = encoder_block(m.encoder, Tensor(x)).data

        def ln(a):
            mu = a.mean(axis=-1, keepdims=True)
            var = ((a - mu) ** 2).mean(axis=-1, keepdims=True)
            return (a - mu) / np.sqrt(var + 1e-5)

        assert np.abs(got - ln(ln(x))).max() < 1e-12

    def test_shape_contract(self):
        m = self._model()
        x = Tensor(np.random.default_rng(18).normal(size=(3, 8, 8)))
        assert encoder_block(m.encoder, x).shape == (3, 8, 8)

    def test_gradients_through_block(self):
        m = self._model()
        x = Tensor(np.random.default_rng(19).normal(size=(2, 8, 8)))
        target = Tensor(np.random.default_rng(20).normal(size=(2, 8, 8)))
        err = grad_check(
            lambda: (encoder_block(m.encoder, x) - target).abs().mean(),
            m.parameters(),
            max_coords_per_param=4,
        )
        assert err < 1e-4


class TestDecoderWiring:
    def test_zeroed_cross_attention_ignores_encoder_memory(self):
        m = Forecaster(toy_config("Sinformer", seed=5))
        for name in ("dec.cross_attn.w_q", "dec.cross_attn.w_k",
                     "dec.cross_attn.w_v", "dec.cross_attn.w_o"):
            m.params[name].data[:] = 0.0
        rng = np.random.default_rng(21)
        x = Tensor(rng.normal(size=(2, 8, 8)))
        mem1 = Tensor(rng.normal(size=(2, 8, 8)))
        mem2 = Tensor(mem1.data + rng.normal(size=(2, 8, 8)))
        out1 = decoder_block(m.decoder, x, mem1, m._mask).data
        out2 = decoder_block(m.decoder, x, mem2, m._mask).data
        assert np.abs(out1 - out2).max() < 1e-12

    def test_masked_self_attention_is_causal(self):
        m = Forecaster(toy_config("Sinformer", seed=6))
        for name in ("dec.cross_attn.w_v", "dec.cross_attn.w_o"):
            m.params[name].data[:] = 0.0  # silence cross path to isolate self-attn
        rng = np.random.default_rng(22)
        x = rng.normal(size=(1, 8, 8))
        mem = Tensor(rng.normal(size=(1, 8, 8)))
        base = decoder_block(m.decoder, Tensor(x), mem, m._mask).data
        x2 = x.copy()
        x2[:, 5:, :] += 10.0  # only positions after index 4 change
        bumped = decoder_block(m.decoder, Tensor(x2), mem, m._mask).data
        assert np.abs(base[:, :5, :] - bumped[:, :5, :]).max() < 1e-12


class TestFullModels:
    @pytest.mark.parametrize("variant", [v for v in VARIANTS if v != "Persistence"])
    def test_shape_contract(self, variant):
        cfg = toy_config(variant, input_len=10, horizon=6, channels=3, seed=8)
        m = Forecaster(cfg)
        x = Tensor(np.random.default_rng(23).normal(size=(4, 10, 3)))
        out = m(x)
        assert out.shape == (4, 6, 3)

    @pytest.mark.parametrize("variant", ["SLP", "Sencoder", "Sinformer"])
    def test_sinusoidal_heads_bounded(self, variant):
        m = Forecaster(toy_config(variant, seed=9))
        x = Tensor(np.random.default_rng(24).normal(size=(3, 8, 1)) * 20)
        assert np.abs(m(x).data).max() <= 1.0

    def test_wrong_input_shape_rejected(self):
        m = Forecaster(toy_config("Linear"))
        with pytest.raises(ShapeError):
            m(Tensor(np.zeros((2, 9, 1))))

    @pytest.mark.parametrize("variant", ["Linear", "NLinear", "DLinear", "SLP", "MLP"])
    def test_channels_are_independent_and_shared(self, variant):
        # swapping channels in the input swaps them in the output
        m = Forecaster(toy_config(variant, input_len=8, horizon=5, channels=2, seed=10))
        x = np.random.default_rng(25).normal(size=(3, 8, 2))
        out = m(Tensor(x)).data
        swapped = m(Tensor(x[:, :, ::-1].copy())).data
        assert np.abs(out[:, :, ::-1] - swapped).max() < 1e-12

    @pytest.mark.parametrize("variant", ["Linear", "NLinear", "DLinear", "SLP", "MLP"])
    def test_gradients_match_finite_differences(self, variant):
        m = Forecaster(toy_config(variant, input_len=6, horizon=4, channels=2, seed=11))
        x = Tensor(np.random.default_rng(26).normal(size=(3, 6, 2)))
        y = Tensor(np.random.default_rng(27).normal(size=(3, 4, 2)))
        err = grad_check(lambda: (m(x) - y).abs().mean(), m.parameters(), max_coords_per_param=6)
        assert err < 1e-4

    @pytest.mark.parametrize("variant", ["Sencoder", "Sinformer"])
    def test_attention_model_gradients(self, variant):
        m = Forecaster(toy_config(variant, seed=12))
        x = Tensor(np.random.default_rng(28).normal(size=(2, 8, 1)))
        y = Tensor(np.random.default_rng(29).normal(size=(2, 8, 1)) * 0.5)
        err = grad_check(lambda: (m(x) - y).abs().mean(), m.parameters(), max_coords_per_param=3)
        assert err < 1e-4


class TestCheckpoints:
    def test_round_trip_is_bit_exact(self, tmp_path):
        m = Forecaster(toy_config("Sinformer", seed=13))
        path = tmp_path / "model.json"
        save_checkpoint(m, path)
        m2 = load_checkpoint(path)
        assert m2.config == m.config
        for name, p in m.params.items():
            assert np.array_equal(p.data, m2.params[name].data), name
        x = Tensor(np.random.default_rng(30).normal(size=(2, 8, 1)))
        assert np.array_equal(m(x).data, m2(x).data)

    def test_parameter_name_mismatch_rejected(self, tmp_path):
        m = Forecaster(toy_config("Linear"))
        path = tmp_path / "model.json"
        save_checkpoint(m, path)
        import json
        payload = json.loads(path.read_text())
        payload["parameters"]["bogus"] = {"shape": [1], "data": [0.0]}
        path.write_text(json.dumps(payload))
        with pytest.raises(ConfigError, match="bogus"):
            load_checkpoint(path)
