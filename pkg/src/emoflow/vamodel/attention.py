"""Single-head relative self-attention over note summaries.

The core computation is ``softmax((Q K^T + S_rel) / sqrt(D)) V`` where
``S_rel`` is an L x L additive logit matrix gathered from a learned table
indexed by the key/query offset ``r = position(key) - position(query)``.
The pure-tensor core is exposed separately from the module so it can be
checked against brute-force oracles and finite differences.
"""

from __future__ import annotations

import math

import torch
from torch import nn


class AttentionConfigError(ValueError):
    """Relative-offset table does not cover the requested sequence length."""


def relative_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor,
                       s_rel: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Scaled dot-product attention with an additive relative-offset matrix.

    Shapes: q, k are (..., L, D), v is (..., L, Dv), s_rel is (..., L, L)
    or (L, L).  Returns (context (..., L, Dv), weights (..., L, L)); every
    weight row is a probability distribution.  With ``s_rel = 0`` this is
    exactly standard scaled dot-product attention.
    """
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"q/k feature dims differ: {q.shape[-1]} vs {k.shape[-1]}")
    d = q.shape[-1]
    logits = (q @ k.transpose(-2, -1) + s_rel) / math.sqrt(d)
    weights = torch.softmax(logits, dim=-1)
    return weights @ v, weights


def gather_offset_logits(table: torch.Tensor, length: int) -> torch.Tensor:
    """Build the L x L additive matrix from a (2 * max_len - 1,) offset table.

    Entry (i, j) is the table value at offset r = j - i.  Raises when the
    table cannot cover offsets +-(L - 1).
    """
    max_len = (table.shape[-1] + 1) // 2
    if length > max_len:
        raise AttentionConfigError(
            f"offset table covers sequences up to {max_len}, got L={length}")
    idx = torch.arange(length).unsqueeze(0) - torch.arange(length).unsqueeze(1)
    return table[idx + max_len - 1]


class RelativeSelfAttention(nn.Module):
    """Projections + offset table around the relative attention core.

    The query path bridges the 1024-dim query weight down to the 128-dim
    key space (two-stage linear) so Q K^T type-checks with D = 128 keys;
    values project back up to the note-summary width on output.
    """

    def __init__(self, input_dim: int = 512, query_dim: int = 1024,
                 attention_dim: int = 128, max_len: int = 64):
        super().__init__()
        self.max_len = max_len
        self.query_up = nn.Linear(input_dim, query_dim)
        self.query_down = nn.Linear(query_dim, attention_dim)
        self.key = nn.Linear(input_dim, attention_dim)
        self.value = nn.Linear(input_dim, attention_dim)
        self.out = nn.Linear(attention_dim, input_dim)
        self.rel_table = nn.Parameter(torch.zeros(2 * max_len - 1))

    def forward(self, summary: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """summary (B, L, input_dim) -> (context (B, L, input_dim), weights (B, L, L))."""
        length = summary.shape[-2]
        q = self.query_down(torch.tanh(self.query_up(summary)))
        k = self.key(summary)
        v = self.value(summary)
        s_rel = gather_offset_logits(self.rel_table, length)
        context, weights = relative_attention(q, k, v, s_rel)
        return self.out(context), weights
