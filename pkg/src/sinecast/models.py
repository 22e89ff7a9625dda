"""The eight forecasters and the building blocks they share.

Every parametric model is channel independent: a [B, I, C] batch is folded
to [B*C, I], pushed through weights shared across channels, and unfolded
back to [B, L, C]. The sinusoidal-head models (SLP, Sencoder, Sinformer)
emit values in [-1, 1] and are meant for standardized data.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .autodiff import (
    Parameter,
    Tensor,
    concat_last,
    layer_norm_rows,
    matmul,
    slice_last,
    softmax_rows,
)
from .errors import ConfigError, ShapeError

__all__ = [
    "VARIANTS",
    "ModelConfig",
    "Forecaster",
    "AddT2VParams",
    "AttentionParams",
    "FeedForwardParams",
    "NormParams",
    "AttentionBlockParams",
    "DecoderBlockParams",
    "persistence_forecast",
    "addt2v_forward",
    "slp_forward",
    "mlp_forward",
    "linear_family_forward",
    "moving_average",
    "attention",
    "encoder_block",
    "decoder_block",
    "sencoder_forward",
    "sinformer_forward",
    "save_checkpoint",
    "load_checkpoint",
]

VARIANTS = (
    "Persistence",
    "Linear",
    "NLinear",
    "DLinear",
    "SLP",
    "MLP",
    "Sencoder",
    "Sinformer",
)

MASK_FILL = -1e9


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    input_len: int
    horizon: int
    channels: int
    d_model: int = 32
    n_heads: int = 4
    ffn_dim: int = 64
    ma_kernel: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose one of {VARIANTS}")
        if self.input_len < 1 or self.horizon < 1:
            raise ConfigError(f"input_len={self.input_len} and horizon={self.horizon} must be >= 1")
        if self.channels < 1:
            raise ConfigError(f"channels={self.channels} must be >= 1")
        if self.d_model < 1 or self.n_heads < 1 or self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model={self.d_model} must be a positive multiple of n_heads={self.n_heads}")
        if self.ffn_dim < 1:
            raise ConfigError(f"ffn_dim={self.ffn_dim} must be >= 1")
        if self.ma_kernel < 3 or self.ma_kernel % 2 == 0:
            raise ConfigError(f"ma_kernel={self.ma_kernel} must be odd and >= 3")


@dataclass
class AddT2VParams:
    w_lin: Parameter  # [L, I]
    b_lin: Parameter  # [L]
    w_per: Parameter  # [L, I]
    b_per: Parameter  # [L]


@dataclass
class AttentionParams:
    w_q: Parameter
    w_k: Parameter
    w_v: Parameter
    w_o: Parameter  # all [d_model, d_model], no biases


@dataclass
class FeedForwardParams:
    w1: Parameter  # [ffn_dim, d_model]
    b1: Parameter  # [ffn_dim]
    w2: Parameter  # [d_model, ffn_dim]
    b2: Parameter  # [d_model]


@dataclass
class NormParams:
    gamma: Parameter
    beta: Parameter


@dataclass
class AttentionBlockParams:
    attn: AttentionParams
    ffn: FeedForwardParams
    norm1: NormParams
    norm2: NormParams
    n_heads: int


@dataclass
class DecoderBlockParams:
    self_attn: AttentionParams
    cross_attn: AttentionParams
    ffn: FeedForwardParams
    norm1: NormParams
    norm2: NormParams
    norm3: NormParams
    n_heads: int


def dense(x: Tensor, w: Parameter, b: Parameter | None = None) -> Tensor:
    """x [..., in] -> [..., out] with weight stored [out, in]."""
    out = matmul(x, w.transpose())
    if b is not None:
        out = out + b
    return out


def _fold_channels(x: Tensor) -> Tensor:
    """[B, I, C] -> [B*C, I], channels stacked as independent rows."""
    b, i, c = x.shape
    return x.transpose((0, 2, 1)).reshape(b * c, i)


def _unfold_channels(y: Tensor, batch: int, channels: int) -> Tensor:
    """[B*C, L] -> [B, L, C], inverse of _fold_channels."""
    horizon = y.shape[-1]
    return y.reshape(batch, channels, horizon).transpose((0, 2, 1))


def smoothing_matrix(length: int, kernel: int) -> np.ndarray:
    """M such that M @ x is the centered moving average with edge replication."""
    if kernel % 2 == 0 or kernel < 3:
        raise ConfigError(f"moving-average kernel must be odd and >= 3, got {kernel}")
    half = kernel // 2
    m = np.zeros((length, length))
    for i in range(length):
        for t in range(-half, half + 1):
            j = min(max(i + t, 0), length - 1)
            m[i, j] += 1.0 / kernel
    return m


def moving_average(x: Tensor, kernel: int) -> Tensor:
    """Centered moving average over the last axis, edges replicated."""
    n = x.shape[-1]
    m = Tensor(smoothing_matrix(n, kernel))
    if x.ndim == 1:
        return matmul(x.reshape(1, n), m.transpose()).reshape(n)
    return matmul(x, m.transpose())


def attention(q: Tensor, k: Tensor, v: Tensor, mask: Tensor | None = None) -> Tensor:
    """softmax_rows(q k^T / sqrt(d)) v, for [m, d] rows or [N, m, d] batches."""
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"attention: query dim {q.shape} vs key dim {k.shape}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"attention: {k.shape[-2]} keys vs {v.shape[-2]} values")
    d = q.shape[-1]
    scores = matmul(q, k.swap_last2()) * (1.0 / np.sqrt(d))
    if mask is not None:
        scores = scores + mask
    return matmul(softmax_rows(scores), v)


def _multi_head(
    p: AttentionParams, n_heads: int, q_src: Tensor, kv_src: Tensor, mask: Tensor | None = None
) -> Tensor:
    q = dense(q_src, p.w_q)
    k = dense(kv_src, p.w_k)
    v = dense(kv_src, p.w_v)
    d = q.shape[-1]
    dh = d // n_heads
    heads = [
        attention(
            slice_last(q, h * dh, (h + 1) * dh),
            slice_last(k, h * dh, (h + 1) * dh),
            slice_last(v, h * dh, (h + 1) * dh),
            mask,
        )
        for h in range(n_heads)
    ]
    return dense(concat_last(heads), p.w_o)


def _ffn(p: FeedForwardParams, x: Tensor) -> Tensor:
    return dense(dense(x, p.w1, p.b1).relu(), p.w2, p.b2)


def encoder_block(params: AttentionBlockParams, x: Tensor) -> Tensor:
    """Self-attention then FFN, each wrapped in residual + layer norm."""
    y = layer_norm_rows(x + _multi_head(params.attn, params.n_heads, x, x), params.norm1.gamma, params.norm1.beta)
    return layer_norm_rows(y + _ffn(params.ffn, y), params.norm2.gamma, params.norm2.beta)


def decoder_block(params: DecoderBlockParams, x: Tensor, memory: Tensor, mask: Tensor | None) -> Tensor:
    """Masked self-attention, cross-attention over `memory`, then FFN."""
    a = layer_norm_rows(
        x + _multi_head(params.self_attn, params.n_heads, x, x, mask), params.norm1.gamma, params.norm1.beta
    )
    b = layer_norm_rows(
        a + _multi_head(params.cross_attn, params.n_heads, a, memory), params.norm2.gamma, params.norm2.beta
    )
    return layer_norm_rows(b + _ffn(params.ffn, b), params.norm3.gamma, params.norm3.beta)


def causal_mask(length: int) -> Tensor:
    """Additive [length, length] mask: 0 at or below the diagonal, large negative above."""
    return Tensor(np.triu(np.full((length, length), MASK_FILL), k=1))


def persistence_forecast(x: Tensor, horizon: int) -> Tensor:
    """Repeat the last `horizon` observed steps as the forecast."""
    b, i, c = x.shape
    if i < horizon:
        raise ConfigError(
            f"persistence requires input_len >= horizon, got input_len={i}, horizon={horizon}"
        )
    return Tensor(x.data[:, i - horizon:, :])


def addt2v_forward(params: AddT2VParams, x: Tensor) -> Tensor:
    """Additive time embedding: affine branch plus sine-activated branch."""
    if x.shape[-1] != params.w_lin.shape[1]:
        raise ShapeError(f"addt2v: input width {x.shape[-1]} vs weight {params.w_lin.shape}")
    return dense(x, params.w_lin, params.b_lin) + dense(x, params.w_per, params.b_per).sin()


class Forecaster:
    """One configured model instance: parameters plus the forward map.

    Parameters are created deterministically from config.seed, weights
    uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero, layer-norm
    gains one.
    """

    def __init__(self, config: ModelConfig):
        self.config = config
        self.params: dict[str, Parameter] = {}
        self._rng = np.random.default_rng(config.seed)
        build = getattr(self, f"_build_{config.variant.lower()}")
        build()
        del self._rng

    # -- parameter construction -------------------------------------------

    def _weight(self, name: str, out_dim: int, in_dim: int) -> Parameter:
        bound = 1.0 / np.sqrt(in_dim)
        p = Parameter(self._rng.uniform(-bound, bound, size=(out_dim, in_dim)), name)
        self.params[name] = p
        return p

    def _bias(self, name: str, dim: int) -> Parameter:
        p = Parameter(np.zeros(dim), name, is_bias=True)
        self.params[name] = p
        return p

    def _norm(self, prefix: str, dim: int) -> NormParams:
        gamma = Parameter(np.ones(dim), f"{prefix}.gamma")
        beta = Parameter(np.zeros(dim), f"{prefix}.beta", is_bias=True)
        self.params[gamma.name] = gamma
        self.params[beta.name] = beta
        return NormParams(gamma, beta)

    def _addt2v(self, prefix: str) -> AddT2VParams:
        i, l = self.config.input_len, self.config.horizon
        return AddT2VParams(
            w_lin=self._weight(f"{prefix}.w_lin", l, i),
            b_lin=self._bias(f"{prefix}.b_lin", l),
            w_per=self._weight(f"{prefix}.w_per", l, i),
            b_per=self._bias(f"{prefix}.b_per", l),
        )

    def _attn(self, prefix: str) -> AttentionParams:
        d = self.config.d_model
        return AttentionParams(
            w_q=self._weight(f"{prefix}.w_q", d, d),
            w_k=self._weight(f"{prefix}.w_k", d, d),
            w_v=self._weight(f"{prefix}.w_v", d, d),
            w_o=self._weight(f"{prefix}.w_o", d, d),
        )

    def _ffn_params(self, prefix: str) -> FeedForwardParams:
        d, f = self.config.d_model, self.config.ffn_dim
        return FeedForwardParams(
            w1=self._weight(f"{prefix}.w1", f, d),
            b1=self._bias(f"{prefix}.b1", f),
            w2=self._weight(f"{prefix}.w2", d, f),
            b2=self._bias(f"{prefix}.b2", d),
        )

    def _encoder_params(self, prefix: str) -> AttentionBlockParams:
        d = self.config.d_model
        return AttentionBlockParams(
            attn=self._attn(f"{prefix}.attn"),
            ffn=self._ffn_params(f"{prefix}.ffn"),
            norm1=self._norm(f"{prefix}.norm1", d),
            norm2=self._norm(f"{prefix}.norm2", d),
            n_heads=self.config.n_heads,
        )

    def _decoder_params(self, prefix: str) -> DecoderBlockParams:
        d = self.config.d_model
        return DecoderBlockParams(
            self_attn=self._attn(f"{prefix}.self_attn"),
            cross_attn=self._attn(f"{prefix}.cross_attn"),
            ffn=self._ffn_params(f"{prefix}.ffn"),
            norm1=self._norm(f"{prefix}.norm1", d),
            norm2=self._norm(f"{prefix}.norm2", d),
            norm3=self._norm(f"{prefix}.norm3", d),
            n_heads=self.config.n_heads,
        )

    def _build_persistence(self):
        pass

    def _build_linear(self):
        i, l = self.config.input_len, self.config.horizon
        self.w = self._weight("w", l, i)
        self.b = self._bias("b", l)

    def _build_nlinear(self):
        i, l = self.config.input_len, self.config.horizon
        self.w = self._weight("w", l, i)
        self.b = self._bias("b", l)
        sel = np.zeros((i, 1))
        sel[i - 1, 0] = 1.0
        self._last_selector = Tensor(sel)
        self._rep_input = Tensor(np.ones((1, i)))
        self._rep_horizon = Tensor(np.ones((1, l)))

    def _build_dlinear(self):
        i, l = self.config.input_len, self.config.horizon
        self.w_trend = self._weight("w_trend", l, i)
        self.w_seasonal = self._weight("w_seasonal", l, i)
        self.b = self._bias("b", l)
        self._smooth = Tensor(smoothing_matrix(i, self.config.ma_kernel))

    def _build_slp(self):
        l = self.config.horizon
        self.embed = self._addt2v("embed")
        self.w = self._weight("head.w", l, l)
        self.b = self._bias("head.b", l)

    def _build_mlp(self):
        i, l = self.config.input_len, self.config.horizon
        self.w1 = self._weight("w1", l, i)
        self.b1 = self._bias("b1", l)
        self.w2 = self._weight("w2", l, l)
        self.b2 = self._bias("b2", l)
        self.w3 = self._weight("w3", l, l)
        self.b3 = self._bias("b3", l)

    def _build_sencoder(self):
        d = self.config.d_model
        self.embed = self._addt2v("embed")
        self.w_in = self._weight("proj_in.w", d, 1)
        self.b_in = self._bias("proj_in.b", d)
        self.encoder = self._encoder_params("enc")
        self.w_head = self._weight("head.w", 1, d)
        self.b_head = self._bias("head.b", 1)

    def _build_sinformer(self):
        self._build_sencoder()
        self.decoder = self._decoder_params("dec")
        self._mask = causal_mask(self.config.horizon)

    # -- forward ------------------------------------------------------------

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, x: Tensor) -> Tensor:
        cfg = self.config
        if x.ndim != 3 or x.shape[1] != cfg.input_len or x.shape[2] != cfg.channels:
            raise ShapeError(
                f"{cfg.variant}: expected [B, {cfg.input_len}, {cfg.channels}], got {x.shape}"
            )
        if cfg.variant == "Persistence":
            return persistence_forecast(x, cfg.horizon)
        if cfg.variant in ("Linear", "NLinear", "DLinear"):
            return linear_family_forward(self, x)
        if cfg.variant == "SLP":
            return slp_forward(self, x)
        if cfg.variant == "MLP":
            return mlp_forward(self, x)
        if cfg.variant == "Sencoder":
            return sencoder_forward(self, x)
        return sinformer_forward(self, x)

    __call__ = forward

    def _embed_sequence(self, xc: Tensor) -> Tensor:
        """AddT2V then scalar-per-step projection into d_model: [N, I] -> [N, L, d]."""
        e = addt2v_forward(self.embed, xc)
        n, l = e.shape
        return dense(e.reshape(n, l, 1), self.w_in, self.b_in)

    def _head(self, z: Tensor) -> Tensor:
        """[N, L, d] -> [N, L] scalar per step, then sine."""
        n, l, _ = z.shape
        return dense(z, self.w_head, self.b_head).reshape(n, l).sin()


def linear_family_forward(model: Forecaster, x: Tensor) -> Tensor:
    b, _, c = x.shape
    xc = _fold_channels(x)
    variant = model.config.variant
    if variant == "Linear":
        out = dense(xc, model.w, model.b)
    elif variant == "NLinear":
        last = matmul(xc, model._last_selector)  # [N, 1]
        centered = xc - matmul(last, model._rep_input)
        out = dense(centered, model.w, model.b) + matmul(last, model._rep_horizon)
    elif variant == "DLinear":
        trend = matmul(xc, model._smooth.transpose())
        seasonal = xc - trend
        out = dense(trend, model.w_trend) + dense(seasonal, model.w_seasonal) + model.b
    else:
        raise ConfigError(f"{variant} is not a linear-family variant")
    return _unfold_channels(out, b, c)


def slp_forward(model: Forecaster, x: Tensor) -> Tensor:
    b, _, c = x.shape
    h = addt2v_forward(model.embed, _fold_channels(x))
    out = dense(h, model.w, model.b).sin()
    return _unfold_channels(out, b, c)


def mlp_forward(model: Forecaster, x: Tensor) -> Tensor:
    b, _, c = x.shape
    xc = _fold_channels(x)
    h1 = dense(xc, model.w1, model.b1).relu()
    h2 = dense(h1, model.w2, model.b2).relu()
    out = dense(h2, model.w3, model.b3)
    return _unfold_channels(out, b, c)


def sencoder_forward(model: Forecaster, x: Tensor) -> Tensor:
    b, _, c = x.shape
    seq = model._embed_sequence(_fold_channels(x))
    z = encoder_block(model.encoder, seq)
    return _unfold_channels(model._head(z), b, c)


def sinformer_forward(model: Forecaster, x: Tensor) -> Tensor:
    b, _, c = x.shape
    seq = model._embed_sequence(_fold_channels(x))
    z = encoder_block(model.encoder, seq)
    dec = decoder_block(model.decoder, seq, z, model._mask)
    return _unfold_channels(model._head(dec), b, c)


def save_checkpoint(model: Forecaster, path) -> None:
    """Write config and parameters as JSON; floats round-trip bit exactly."""
    payload = {
        "config": asdict(model.config),
        "parameters": {
            name: {"shape": list(p.shape), "data": p.data.reshape(-1).tolist()}
            for name, p in model.params.items()
        },
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path) -> Forecaster:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    known = {f.name for f in fields(ModelConfig)}
    cfg_dict = {k: v for k, v in payload["config"].items() if k in known}
    model = Forecaster(ModelConfig(**cfg_dict))
    saved = payload["parameters"]
    if set(saved) != set(model.params):
        missing = set(model.params) - set(saved)
        extra = set(saved) - set(model.params)
        raise ConfigError(f"checkpoint mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
    for name, entry in saved.items():
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        p = model.params[name]
        if arr.shape != p.shape:
            raise ConfigError(f"checkpoint {name}: shape {arr.shape} vs expected {p.shape}")
        p.data = arr
    return model
