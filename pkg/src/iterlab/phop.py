"""Multi-hop backtracking task: generator, reference oracle, ID/OOD split, files.

A sequence v of n tokens defines a one-step backtracking map on 1-indexed
positions:

    find1(v, i) = max({0} ∪ {j <= i : v[j-1] = v[i]})       (positions 1-indexed)

i.e. jump to the position right after the latest occurrence, at or before
i, of the symbol at i; 0 means "no such occurrence" and marks the instance
invalid.  Hopping p times from position n yields the chain (i_1, ..., i_p)
and the answer symbol v[i_p].  An instance belongs to the ID split when
the chain sum is even, OOD when odd.

Index conventions (fixed, also the file-format contract):
  * positions are 1-indexed with sentinel 0, and serialized that way;
  * j = i is admitted, so v[i-1] = v[i] backtracks to i itself;
  * once a hop returns 0, the remaining chain entries are recorded as 0.

Datasets are line-delimited JSON: one header line carrying the generation
spec and seed, then one record per instance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GenerationError, ParseError, VersionError

FORMAT_NAME = "phop-dataset"
FORMAT_VERSION = 1
REJECTION_LIMIT = 10_000

ID = "ID"
OOD = "OOD"


@dataclass(frozen=True)
class DatasetSpec:
    """Generation parameters; defaults follow the reference experiments."""

    n: int = 12
    p: int = 4
    vocab_size: int = 4
    count: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 * self.p + 1:
            raise ValueError(f"need n >= 2p+1 = {2 * self.p + 1} to host a {self.p}-hop chain")
        if self.p < 1 or self.vocab_size < 2 or self.count < 0:
            raise ValueError("need p >= 1, vocab_size >= 2, count >= 0")


@dataclass(frozen=True)
class HopInstance:
    """Token sequence with its verified hop chain, answer symbol, and split tag."""

    tokens: tuple[int, ...]
    p: int
    hop_chain: tuple[int, ...]
    label: int
    split: str


def find1(v, i: int) -> int:
    """One backtracking step from 1-indexed position i; 0 if no match exists."""
    n = len(v)
    if not 1 <= i <= n:
        raise ValueError(f"position must lie in [1, {n}]")
    target = v[i - 1]
    for j in range(i, 1, -1):  # j in [2, i], largest first
        if v[j - 2] == target:
            return j
    return 0


def findp(v, p: int) -> tuple[int, tuple[int, ...]]:
    """p backtracking steps from position n; returns (final position, full chain).

    A 0 anywhere propagates: later entries stay 0 and the instance is invalid.
    """
    if p < 1:
        raise ValueError("p >= 1 required")
    chain = []
    pos = len(v)
    for _ in range(p):
        pos = find1(v, pos) if pos != 0 else 0
        chain.append(pos)
    return chain[-1], tuple(chain)


def split_tag(instance: HopInstance) -> str:
    """ID iff the hop-index sum is even."""
    return ID if sum(instance.hop_chain) % 2 == 0 else OOD


def default_chain_sampler(spec: DatasetSpec, rng: np.random.Generator) -> tuple[int, ...]:
    """Descending p-subset of [2, n-1], uniform within a fair-coin sum parity.

    find1 never returns 1, and keeping the first hop below n avoids planting
    a self-match.  A plain uniform subset would land on even sums slightly
    more often than odd (e.g. 52.4% for n=12, p=4), so the parity of the
    chain sum is drawn first and the subset resampled to match, keeping the
    ID/OOD split balanced.
    """
    want = int(rng.integers(2))
    chain = None
    for _ in range(1000):
        chain = sorted(rng.choice(np.arange(2, spec.n), size=spec.p, replace=False).tolist(), reverse=True)
        if sum(chain) % 2 == want:
            break
    return tuple(chain)


def _plant_chain(spec: DatasetSpec, rng: np.random.Generator, chain_sampler):
    """One construction attempt: plant a sampled decreasing chain, fill the rest.

    Fillers avoid the one symbol per position that would insert a later
    match inside some hop window.  Cross-constraints between planted cells
    can still collide, so the caller re-verifies with findp and rejects on
    mismatch.
    """
    n, p, vocab = spec.n, spec.p, spec.vocab_size
    chain = list(chain_sampler(spec, rng))
    hops = [n] + chain  # hops[t] -> hops[t+1]
    v = [None] * (n + 1)  # 1-indexed
    v[n] = int(rng.integers(vocab))
    for t in range(p):
        src, dst = hops[t], hops[t + 1]
        anchor = v[src]
        if anchor is None:
            anchor = int(rng.integers(vocab))
            v[src] = anchor
        if v[dst - 1] is None:
            v[dst - 1] = anchor
        elif v[dst - 1] != anchor:
            return None, None  # planted cells collided
    # per-position forbidden symbols: no stray match inside a hop window
    forbidden = {}
    for t in range(p):
        src, dst = hops[t], hops[t + 1]
        anchor = v[src]
        for m in range(dst, src):  # j = m+1 in (dst, src] would shadow the hop
            forbidden.setdefault(m, set()).add(anchor)
    for m in range(1, n + 1):
        banned = forbidden.get(m, set())
        if v[m] is None:
            allowed = [s for s in range(vocab) if s not in banned]
            if not allowed:
                return None, None
            v[m] = int(allowed[rng.integers(len(allowed))])
        elif v[m] in banned:
            return None, None
    return tuple(v[1:]), tuple(chain)


def gen_instance(
    spec: DatasetSpec, rng: np.random.Generator, chain_sampler=default_chain_sampler
) -> HopInstance:
    """Generate one valid instance; every attempt is re-verified with findp.

    `chain_sampler` is the seam for alternative hop placements; it must
    return a strictly decreasing tuple of p positions in [2, n-1].
    """
    for _ in range(REJECTION_LIMIT):
        tokens, planned = _plant_chain(spec, rng, chain_sampler)
        if tokens is None:
            continue
        final, chain = findp(tokens, spec.p)
        if final == 0 or chain != planned:
            continue
        label = tokens[final - 1]
        split = ID if sum(chain) % 2 == 0 else OOD
        return HopInstance(tokens, spec.p, chain, label, split)
    raise GenerationError(f"no valid instance within {REJECTION_LIMIT} attempts for {spec}")


def gen_dataset(spec: DatasetSpec, rng: np.random.Generator | None = None) -> list[HopInstance]:
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    return [gen_instance(spec, rng) for _ in range(spec.count)]


def write_dataset(instances, path, spec: DatasetSpec) -> None:
    """Line-delimited records behind a single JSON header line."""
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n": spec.n,
        "p": spec.p,
        "vocab_size": spec.vocab_size,
        "count": len(instances),
        "seed": spec.seed,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for inst in instances:
            record = {
                "tokens": list(inst.tokens),
                "p": inst.p,
                "hop_chain": list(inst.hop_chain),
                "label": inst.label,
                "split": inst.split,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_dataset(path) -> tuple[DatasetSpec, list[HopInstance]]:
    """Parse a dataset file; malformed lines report their line number."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file (line 1)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: bad header (line 1): {exc}") from exc
    if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise VersionError(
            f"{path}: expected {FORMAT_NAME} v{FORMAT_VERSION}, "
            f"got {header.get('format')} v{header.get('version')}"
        )
    spec = DatasetSpec(
        n=header["n"],
        p=header["p"],
        vocab_size=header["vocab_size"],
        count=header["count"],
        seed=header["seed"],
    )
    instances = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            inst = HopInstance(
                tuple(rec["tokens"]), rec["p"], tuple(rec["hop_chain"]), rec["label"], rec["split"]
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}: bad record (line {lineno}): {exc}") from exc
        instances.append(inst)
    if len(instances) != spec.count:
        raise ParseError(f"{path}: header promises {spec.count} records, found {len(instances)}")
    return spec, instances
