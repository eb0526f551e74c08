"""Reader for the multi-hop dataset file contract.

Format (one JSON document per line):
  line 1: header {"format": "phop-dataset", "version": 1, n, p, vocab_size, count, seed}
  lines 2..: records {"tokens": [...], "p", "hop_chain": [...], "label", "split": "ID"|"OOD"}

Deliberately independent of the generator package: this module implements
the documented format, which is the only coupling between the components.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_NAME = "phop-dataset"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class SplitArrays:
    """One split as dense arrays: tokens (count, n) int64, labels (count,) int64."""

    tokens: np.ndarray
    labels: np.ndarray
    vocab_size: int
    seq_len: int

    def __len__(self) -> int:
        return len(self.labels)


def load_split(path, split: str) -> SplitArrays:
    """Load the records of one split tag ("ID" or "OOD") from a dataset file."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    header = json.loads(lines[0])
    if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise ValueError(
            f"{path}: expected {FORMAT_NAME} v{FORMAT_VERSION}, "
            f"got {header.get('format')} v{header.get('version')}"
        )
    tokens, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: bad record (line {lineno}): {exc}") from exc
        if rec["split"] != split:
            continue
        if len(rec["tokens"]) != header["n"]:
            raise ValueError(f"{path}: token length mismatch (line {lineno})")
        tokens.append(rec["tokens"])
        labels.append(rec["label"])
    if not tokens:
        raise ValueError(f"{path}: no {split} records")
    return SplitArrays(
        np.asarray(tokens, dtype=np.int64),
        np.asarray(labels, dtype=np.int64),
        int(header["vocab_size"]),
        int(header["n"]),
    )


def batch_indices(count: int, batch: int, steps: int, rng: np.random.Generator):
    """Deterministic stream of `steps` index batches, reshuffling each epoch."""
    order = rng.permutation(count)
    pos = 0
    for _ in range(steps):
        if pos + batch > count:
            order = rng.permutation(count)
            pos = 0
        yield order[pos : pos + batch]
        pos += batch
