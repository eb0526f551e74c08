"""Train/eval sweep over loop counts with per-seed rows and aggregate stats.

Reports are CSV behind a '#'-prefixed JSON metadata line (the shared
sweep-table schema), so they interoperate with the generator package's
readers and any plotting tool.  Full-scale reference hyperparameters are
recorded in the metadata; the runnable defaults are desk-scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import __version__
from .data import SplitArrays, batch_indices, load_split
from .model import LoopedTransformer

SCHEMA = 1

# full-scale settings from the reference experiments; kept as metadata, not run by default
FULL_SCALE_REFERENCE = {
    "model_dim": 256,
    "heads": 8,
    "mlp_dim": 512,
    "steps": 20_000,
    "batch": 256,
    "lr": 1e-3,
    "lr_min": 1e-4,
    "warmup": 1000,
    "weight_decay": 0.0,
    "grad_clip": 1.0,
    "mixed_precision": True,
}


@dataclass
class TrainerConfig:
    train_path: str
    id_val_path: str
    ood_val_path: str
    loop_counts: tuple[int, ...] = (1, 2, 4, 8, 12, 16)
    model_dim: int = 64
    heads: int = 4
    mlp_dim: int = 128
    steps: int = 2000
    batch: int = 128
    lr: float = 1e-3
    lr_min: float = 1e-4
    warmup: int = 100
    grad_clip: float = 1.0
    loop_embedding: bool = False
    seeds: tuple[int, ...] = (0, 1, 2)
    eval_every: int = 0  # 0 = final checkpoint only
    out: str | None = None

    @classmethod
    def from_json(cls, path) -> "TrainerConfig":
        raw = json.loads(Path(path).read_text())
        for key in ("loop_counts", "seeds"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)


def lr_at(step: int, cfg: TrainerConfig) -> float:
    """Linear warmup, then cosine decay from lr to lr_min over the remaining steps."""
    if cfg.warmup and step < cfg.warmup:
        return cfg.lr * (step + 1) / cfg.warmup
    span = max(1, cfg.steps - cfg.warmup)
    t = min(1.0, (step - cfg.warmup) / span)
    return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + math.cos(math.pi * t))


def evaluate(model: LoopedTransformer, split: SplitArrays, batch: int = 1024) -> float:
    model.eval()
    hits = 0
    with torch.no_grad():
        for start in range(0, len(split), batch):
            tokens = torch.from_numpy(split.tokens[start : start + batch])
            labels = torch.from_numpy(split.labels[start : start + batch])
            hits += int((model(tokens).argmax(dim=-1) == labels).sum())
    return hits / len(split)


def train_one(
    cfg: TrainerConfig,
    loop_count: int,
    seed: int,
    train: SplitArrays,
    id_val: SplitArrays,
    ood_val: SplitArrays,
) -> tuple[float, float]:
    """Train one weight-tied model from scratch; returns final (id_acc, ood_acc)."""
    torch.manual_seed(seed * 100_003 + loop_count)
    model = LoopedTransformer(
        train.vocab_size,
        train.seq_len,
        cfg.model_dim,
        cfg.heads,
        cfg.mlp_dim,
        loop_count,
        use_loop_embedding=cfg.loop_embedding,
    )
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=0.0)
    loss_fn = nn.CrossEntropyLoss()
    order_rng = np.random.default_rng(seed * 977 + loop_count)
    model.train()
    for step, idx in enumerate(batch_indices(len(train), cfg.batch, cfg.steps, order_rng)):
        for group in opt.param_groups:
            group["lr"] = lr_at(step, cfg)
        tokens = torch.from_numpy(train.tokens[idx])
        labels = torch.from_numpy(train.labels[idx])
        loss = loss_fn(model(tokens), labels)
        opt.zero_grad()
        loss.backward()
        if cfg.grad_clip:
            nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
        opt.step()
        if cfg.eval_every and (step + 1) % cfg.eval_every == 0:
            print(
                f"  loops={loop_count} seed={seed} step={step + 1}: "
                f"id={evaluate(model, id_val):.3f} ood={evaluate(model, ood_val):.3f}",
                flush=True,
            )
            model.train()
    return evaluate(model, id_val), evaluate(model, ood_val)


@dataclass
class AccuracyReport:
    """Per-(loop_count, seed) accuracies plus per-loop-count mean/std."""

    columns: tuple[str, ...] = ("loop_count", "seed", "id_acc", "ood_acc")
    rows: list[tuple] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def aggregates(self) -> dict[int, dict[str, float]]:
        by_k: dict[int, list[tuple[float, float]]] = {}
        for k, _, id_acc, ood_acc in self.rows:
            by_k.setdefault(k, []).append((id_acc, ood_acc))
        out = {}
        for k, accs in sorted(by_k.items()):
            ids = np.array([a for a, _ in accs])
            oods = np.array([b for _, b in accs])
            out[k] = {
                "id_mean": float(ids.mean()),
                "id_std": float(ids.std()),
                "ood_mean": float(oods.mean()),
                "ood_std": float(oods.std()),
            }
        return out

    def render(self) -> str:
        meta = dict(self.metadata)
        meta.setdefault("tool_version", __version__)
        meta.setdefault("schema", SCHEMA)
        meta["aggregates"] = {str(k): v for k, v in self.aggregates().items()}
        lines = ["# " + json.dumps(meta, sort_keys=True)]
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
        return "\n".join(lines) + "\n"


def train_and_eval(cfg: TrainerConfig) -> AccuracyReport:
    """Sweep (loop_count, seed), training each model from scratch on the ID split."""
    train = load_split(cfg.train_path, "ID")
    id_val = load_split(cfg.id_val_path, "ID")
    ood_val = load_split(cfg.ood_val_path, "OOD")
    report = AccuracyReport(
        metadata={
            "command": "looped-trainer",
            "config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items()},
            "full_scale_reference": FULL_SCALE_REFERENCE,
            "train_size": len(train),
            "id_val_size": len(id_val),
            "ood_val_size": len(ood_val),
        }
    )
    for loop_count in cfg.loop_counts:
        for seed in cfg.seeds:
            id_acc, ood_acc = train_one(cfg, loop_count, seed, train, id_val, ood_val)
            report.rows.append((loop_count, seed, id_acc, ood_acc))
    if cfg.out:
        Path(cfg.out).write_text(report.render())
    return report


def spearman(xs, ys) -> float:
    """Rank correlation with average ranks on ties."""

    def ranks(vals):
        order = np.argsort(vals, kind="stable")
        r = np.empty(len(vals))
        i = 0
        sorted_vals = np.asarray(vals)[order]
        while i < len(vals):
            j = i
            while j + 1 < len(vals) and sorted_vals[j + 1] == sorted_vals[i]:
                j += 1
            r[order[i : j + 1]] = (i + j) / 2.0 + 1.0
            i = j + 1
        return r

    rx, ry = ranks(xs), ranks(ys)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    return float(rx @ ry) / denom if denom else 0.0
