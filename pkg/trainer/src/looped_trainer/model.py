"""Weight-tied looped Transformer classifier.

One pre-norm Transformer block (multi-head self-attention, then a two-layer
GELU MLP, both residual) is applied `loop_count` times with shared
parameters; the parameter count is therefore independent of the loop count.
Inputs get learned token and position embeddings; the answer symbol is read
off a bias-free linear head at the last sequence position.

Optional loop embeddings add a learned per-iteration vector to the hidden
state before each block application (zero-initialized, so at init the
looped model matches the plain one exactly).
"""

from __future__ import annotations

import torch
from torch import nn


class Block(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_dim: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.ln2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_dim),
            nn.GELU(),
            nn.Linear(mlp_dim, dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.ln1(x)
        x = x + self.attn(h, h, h, need_weights=False)[0]
        return x + self.mlp(self.ln2(x))


class LoopedTransformer(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        seq_len: int,
        dim: int,
        heads: int,
        mlp_dim: int,
        loop_count: int,
        use_loop_embedding: bool = False,
    ):
        super().__init__()
        if loop_count < 1:
            raise ValueError("loop_count >= 1 required")
        self.loop_count = loop_count
        self.token_emb = nn.Embedding(vocab_size, dim)
        self.pos_emb = nn.Embedding(seq_len, dim)
        self.block = Block(dim, heads, mlp_dim)
        self.head = nn.Linear(dim, vocab_size, bias=False)
        self.loop_emb = nn.Embedding(loop_count, dim) if use_loop_embedding else None
        if self.loop_emb is not None:
            nn.init.zeros_(self.loop_emb.weight)

    def add_loop_embedding(self, hidden: torch.Tensor, loop_index: int) -> torch.Tensor:
        """Add the learned embedding of one loop iteration to the hidden states."""
        if self.loop_emb is None:
            return hidden
        if not 0 <= loop_index < self.loop_count:
            raise ValueError(f"loop_index must lie in [0, {self.loop_count})")
        return hidden + self.loop_emb.weight[loop_index]

    def hidden_states(self, tokens: torch.Tensor) -> torch.Tensor:
        """Embed and loop the shared block; shape (batch, seq, dim) throughout."""
        pos = torch.arange(tokens.shape[1], device=tokens.device)
        x = self.token_emb(tokens) + self.pos_emb(pos)
        for i in range(self.loop_count):
            x = self.add_loop_embedding(x, i)
            x = self.block(x)
        return x

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        return self.head(self.hidden_states(tokens)[:, -1, :])

    def backbone_parameter_count(self) -> int:
        """Parameters excluding loop embeddings; independent of loop_count."""
        loop_ids = (
            {id(p) for p in self.loop_emb.parameters()} if self.loop_emb is not None else set()
        )
        return sum(p.numel() for p in self.parameters() if id(p) not in loop_ids)
