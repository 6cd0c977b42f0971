"""The three comparable translation networks."""

from __future__ import annotations

from ..exceptions import ConfigurationError
from ..numerics.layers import Module
from .attention import MultiHeadAttention, causal_mask, key_padding_mask, multi_head_attention
from .seq2seq import Seq2SeqConfig, Seq2SeqNet
from .transformer import TransformerConfig, TransformerNet

MODEL_KINDS = ("seq2seq", "transformer", "transformer-rlstm")


def build_network(kind: str, config: dict | None = None, seed: int = 0):
    """Instantiate a network by CLI-style model name."""
    config = dict(config or {})
    if kind == "seq2seq":
        return Seq2SeqNet(Seq2SeqConfig(**config), seed=seed)
    if kind in ("transformer", "transformer-rlstm"):
        config["residual_lstm"] = kind == "transformer-rlstm"
        return TransformerNet(TransformerConfig(**config), seed=seed)
    raise ConfigurationError(f"unknown model {kind!r}; choose from {', '.join(MODEL_KINDS)}")


def network_kind(network) -> str:
    if isinstance(network, TransformerNet):
        return "transformer-rlstm" if network.config.residual_lstm else "transformer"
    return "seq2seq"


def count_parameters(params) -> int:
    """Total scalar count of a module or a name -> tensor mapping."""
    if isinstance(params, Module):
        params = params.named_parameters()
    return int(sum(int(getattr(p, "size", 0)) for p in params.values()))


__all__ = [
    "MODEL_KINDS",
    "MultiHeadAttention",
    "Seq2SeqConfig",
    "Seq2SeqNet",
    "TransformerConfig",
    "TransformerNet",
    "build_network",
    "causal_mask",
    "count_parameters",
    "key_padding_mask",
    "multi_head_attention",
    "network_kind",
]
