"""A small post-norm encoder-decoder transformer.

The encoder and decoder stacks are exposed separately from token embedding
so callers can splice extra vectors into the input sequence (the paraphraser
prepends a control embedding and gates encoder states before decoding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidConfig, ShapeError
from . import autodiff as ad
from .autodiff import Tensor
from .layers import (
    MLPSpec,
    attention_block,
    causal_mask,
    init_attention,
    init_layer_norm,
    init_mlp,
    layer_norm,
    mlp_forward,
)
from .layers import positional_encoding as _pe
from .params import ParamStore, glorot


@dataclass(frozen=True)
class Seq2SeqConfig:
    vocab_size: int
    d_model: int = 64
    num_heads: int = 4
    d_ff: int = 128
    num_encoder_layers: int = 2
    num_decoder_layers: int = 2
    max_len: int = 160
    dtype: str = "float32"

    def __post_init__(self):
        if self.vocab_size < 1:
            raise InvalidConfig("vocab_size must be positive")
        if self.d_model % self.num_heads != 0:
            raise InvalidConfig("d_model must be divisible by num_heads")

    def as_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "num_heads": self.num_heads,
            "d_ff": self.d_ff,
            "num_encoder_layers": self.num_encoder_layers,
            "num_decoder_layers": self.num_decoder_layers,
            "max_len": self.max_len,
            "dtype": self.dtype,
        }


def config_from_dict(d: dict) -> Seq2SeqConfig:
    return Seq2SeqConfig(**d)


def _ffn_spec(cfg: Seq2SeqConfig) -> MLPSpec:
    return MLPSpec(sizes=(cfg.d_model, cfg.d_ff, cfg.d_model), activation="relu")


def init_seq2seq(cfg: Seq2SeqConfig, seed: int) -> ParamStore:
    store = ParamStore(seed=seed, dtype=cfg.dtype)
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(cfg.d_model)
    store.add("embed", (rng.standard_normal((cfg.vocab_size, cfg.d_model)) * scale).astype(store.dtype))
    for i in range(cfg.num_encoder_layers):
        init_attention(store, f"enc{i}.attn", cfg.d_model, rng)
        init_layer_norm(store, f"enc{i}.ln1", cfg.d_model)
        init_mlp(store, f"enc{i}.ffn", _ffn_spec(cfg), rng)
        init_layer_norm(store, f"enc{i}.ln2", cfg.d_model)
    for i in range(cfg.num_decoder_layers):
        init_attention(store, f"dec{i}.self", cfg.d_model, rng)
        init_layer_norm(store, f"dec{i}.ln1", cfg.d_model)
        init_attention(store, f"dec{i}.cross", cfg.d_model, rng)
        init_layer_norm(store, f"dec{i}.ln2", cfg.d_model)
        init_mlp(store, f"dec{i}.ffn", _ffn_spec(cfg), rng)
        init_layer_norm(store, f"dec{i}.ln3", cfg.d_model)
    store.add("out.W", glorot(rng, cfg.d_model, cfg.vocab_size, store.dtype))
    store.add("out.b", np.zeros(cfg.vocab_size, dtype=store.dtype))
    return store


def embed_ids(store: ParamStore, cfg: Seq2SeqConfig, ids: np.ndarray, pos_offset: int = 0) -> Tensor:
    """Token embeddings (scaled by sqrt(d_model)) plus sinusoidal positions."""
    ids = np.asarray(ids)
    if ids.ndim != 2:
        raise ShapeError("ids must be (batch, time)")
    t = ids.shape[1]
    if pos_offset + t > cfg.max_len:
        raise ShapeError(f"sequence length {pos_offset + t} exceeds max_len {cfg.max_len}")
    x = ad.embedding(store["embed"], ids) * float(np.sqrt(cfg.d_model))
    pe = _pe(cfg.max_len, cfg.d_model, store.dtype)[pos_offset : pos_offset + t]
    return x + ad.constant(pe)


def encoder_stack(store: ParamStore, cfg: Seq2SeqConfig, x: Tensor,
                  attn_mask: np.ndarray | None) -> Tensor:
    """Post-norm encoder: x = LN(x + attn(x)); x = LN(x + ffn(x))."""
    for i in range(cfg.num_encoder_layers):
        a = attention_block(store, f"enc{i}.attn", x, x, cfg.num_heads, attn_mask)
        x = layer_norm(store, f"enc{i}.ln1", x + a)
        f = mlp_forward(store, f"enc{i}.ffn", _ffn_spec(cfg), x)
        x = layer_norm(store, f"enc{i}.ln2", x + f)
    return x


def decoder_stack(store: ParamStore, cfg: Seq2SeqConfig, y: Tensor, memory: Tensor,
                  self_mask: np.ndarray | None, cross_mask: np.ndarray | None) -> Tensor:
    for i in range(cfg.num_decoder_layers):
        a = attention_block(store, f"dec{i}.self", y, y, cfg.num_heads, self_mask)
        y = layer_norm(store, f"dec{i}.ln1", y + a)
        c = attention_block(store, f"dec{i}.cross", y, memory, cfg.num_heads, cross_mask)
        y = layer_norm(store, f"dec{i}.ln2", y + c)
        f = mlp_forward(store, f"dec{i}.ffn", _ffn_spec(cfg), y)
        y = layer_norm(store, f"dec{i}.ln3", y + f)
    return y


def output_logits(store: ParamStore, hidden: Tensor) -> Tensor:
    return ad.matmul(hidden, store["out.W"]) + store["out.b"]


def decode_logits(store: ParamStore, cfg: Seq2SeqConfig, tgt_ids: np.ndarray,
                  memory: Tensor, memory_mask: np.ndarray | None) -> Tensor:
    """Teacher-forced decoder pass: (B, T_tgt) ids -> (B, T_tgt, V) logits.

    memory_mask is the additive padding mask over memory positions,
    shape broadcastable to (B, heads, T_tgt, T_mem).
    """
    tgt_ids = np.asarray(tgt_ids)
    y = embed_ids(store, cfg, tgt_ids)
    h = decoder_stack(store, cfg, y, memory, causal_mask(tgt_ids.shape[1]), memory_mask)
    return output_logits(store, h)
