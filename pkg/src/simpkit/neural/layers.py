"""Network building blocks: MLPs, layer norm, multi-head attention,
embeddings, sinusoidal positions, dropout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidConfig, ShapeError
from . import autodiff as ad
from .autodiff import Tensor
from .params import ParamStore, glorot

# large negative logit used to mask attention; finite so float32 stays finite
MASK_NEG = -1e9

_ACTIVATIONS = {
    "tanh": ad.tanh,
    "relu": ad.relu,
    "sigmoid": ad.sigmoid,
    "linear": lambda t: t,
}


@dataclass(frozen=True)
class MLPSpec:
    """Fully-connected stack: sizes = (input, hidden..., output)."""

    sizes: tuple[int, ...]
    activation: str = "tanh"
    out_activation: str = "linear"
    dropout: float = 0.0

    def __post_init__(self):
        if len(self.sizes) < 2:
            raise InvalidConfig("MLPSpec needs at least input and output sizes")
        if self.activation not in _ACTIVATIONS or self.out_activation not in _ACTIVATIONS:
            raise InvalidConfig(f"unknown activation in {self.activation!r}/{self.out_activation!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfig("dropout must be in [0, 1)")


def init_mlp(store: ParamStore, prefix: str, spec: MLPSpec, rng: np.random.Generator) -> None:
    for i, (fi, fo) in enumerate(zip(spec.sizes, spec.sizes[1:])):
        store.add(f"{prefix}.W{i}", glorot(rng, fi, fo, store.dtype))
        store.add(f"{prefix}.b{i}", np.zeros(fo, dtype=store.dtype))


def mlp_forward(
    store: ParamStore,
    prefix: str,
    spec: MLPSpec,
    x: Tensor,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Run the stack; dropout applies after each hidden activation and only
    when train=True."""
    if x.shape[-1] != spec.sizes[0]:
        raise ShapeError(f"mlp input dim {x.shape[-1]} != {spec.sizes[0]}")
    squeeze = x.ndim == 1
    h = ad.reshape(x, (1, -1)) if squeeze else x
    last = len(spec.sizes) - 2
    for i in range(len(spec.sizes) - 1):
        h = ad.matmul(h, store[f"{prefix}.W{i}"]) + store[f"{prefix}.b{i}"]
        act = spec.out_activation if i == last else spec.activation
        h = _ACTIVATIONS[act](h)
        if i != last and spec.dropout > 0.0:
            h = dropout(h, spec.dropout, train=train, rng=rng)
    return ad.reshape(h, (spec.sizes[-1],)) if squeeze else h


def dropout(x: Tensor, p: float, train: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; the identity whenever train is False or p == 0."""
    if not train or p <= 0.0:
        return x
    if rng is None:
        raise InvalidConfig("training-mode dropout needs an RNG")
    keep = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    return x * ad.constant(keep)


def init_layer_norm(store: ParamStore, prefix: str, dim: int) -> None:
    store.add(f"{prefix}.g", np.ones(dim, dtype=store.dtype))
    store.add(f"{prefix}.b", np.zeros(dim, dtype=store.dtype))


def layer_norm(store: ParamStore, prefix: str, x: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    mu = ad.tmean(x, axis=-1, keepdims=True)
    centered = x - mu
    var = ad.tmean(centered * centered, axis=-1, keepdims=True)
    normed = centered / ad.sqrt(var + eps)
    return normed * store[f"{prefix}.g"] + store[f"{prefix}.b"]


def init_attention(store: ParamStore, prefix: str, d_model: int, rng: np.random.Generator) -> None:
    for part in ("q", "k", "v", "o"):
        store.add(f"{prefix}.W{part}", glorot(rng, d_model, d_model, store.dtype))
        store.add(f"{prefix}.b{part}", np.zeros(d_model, dtype=store.dtype))


def _split_heads(x: Tensor, num_heads: int) -> Tensor:
    b, t, d = x.shape
    h = ad.reshape(x, (b, t, num_heads, d // num_heads))
    return ad.transpose(h, (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, nh, t, dh = x.shape
    h = ad.transpose(x, (0, 2, 1, 3))
    return ad.reshape(h, (b, t, nh * dh))


def attention_block(
    store: ParamStore,
    prefix: str,
    x_q: Tensor,
    x_kv: Tensor,
    num_heads: int,
    mask: np.ndarray | None = None,
) -> Tensor:
    """Multi-head scaled dot-product attention.

    mask, if given, is an additive array broadcastable to
    (batch, heads, T_query, T_key): 0 where attention is allowed, a large
    negative number where banned.
    """
    d_model = x_q.shape[-1]
    if d_model % num_heads != 0:
        raise ShapeError(f"d_model {d_model} not divisible by {num_heads} heads")
    if x_kv.shape[-1] != d_model:
        raise ShapeError("query and key/value model dims differ")
    q = _split_heads(ad.matmul(x_q, store[f"{prefix}.Wq"]) + store[f"{prefix}.bq"], num_heads)
    k = _split_heads(ad.matmul(x_kv, store[f"{prefix}.Wk"]) + store[f"{prefix}.bk"], num_heads)
    v = _split_heads(ad.matmul(x_kv, store[f"{prefix}.Wv"]) + store[f"{prefix}.bv"], num_heads)
    scale = 1.0 / np.sqrt(d_model // num_heads)
    scores = ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))) * scale
    if mask is not None:
        scores = scores + ad.constant(np.asarray(mask, dtype=scores.data.dtype))
    attn = ad.softmax_last(scores)
    mixed = _merge_heads(ad.matmul(attn, v))
    return ad.matmul(mixed, store[f"{prefix}.Wo"]) + store[f"{prefix}.bo"]


def padding_mask(ids: np.ndarray, pad_id: int) -> np.ndarray:
    """(B, 1, 1, T) additive mask banning attention to padding positions."""
    banned = (np.asarray(ids) == pad_id)
    return np.where(banned, MASK_NEG, 0.0)[:, None, None, :]


def causal_mask(t: int) -> np.ndarray:
    """(1, 1, T, T) additive mask banning attention to future positions."""
    upper = np.triu(np.ones((t, t), dtype=bool), k=1)
    return np.where(upper, MASK_NEG, 0.0)[None, None, :, :]


def positional_encoding(length: int, d_model: int, dtype) -> np.ndarray:
    """Fixed sinusoidal position table, shape (length, d_model)."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(d_model // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / d_model)
    pe = np.zeros((length, d_model), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe.astype(dtype)
