"""Sweep tables: CSV rows behind one '#'-prefixed JSON metadata line.

The metadata line echoes the exact run configuration (plus tool version and
schema number), so a table is self-describing; rows are plain CSV that any
plotting tool ingests after skipping the comment line.  All serialization
is deterministic: sorted JSON keys, shortest round-trip float formatting,
no timestamps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import ParseError

SCHEMA = 1


@dataclass
class SweepTable:
    columns: list[str]
    rows: list[tuple]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"row width {len(row)} != {len(self.columns)} columns")


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_sweep_table(table: SweepTable) -> str:
    meta = dict(table.metadata)
    meta.setdefault("tool_version", __version__)
    meta.setdefault("schema", SCHEMA)
    lines = ["# " + json.dumps(meta, sort_keys=True)]
    lines.append(",".join(table.columns))
    for row in table.rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_sweep_table(table: SweepTable, path) -> None:
    Path(path).write_text(render_sweep_table(table))


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            return text


def parse_sweep_table(text: str, source: str = "<string>") -> SweepTable:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2 or not lines[0].startswith("#"):
        raise ParseError(f"{source}: expected '# <json>' metadata then a header (line 1)")
    try:
        metadata = json.loads(lines[0][1:].strip())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: bad metadata (line 1): {exc}") from exc
    columns = lines[1].split(",")
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        cells = line.split(",")
        if len(cells) != len(columns):
            raise ParseError(f"{source}: row width mismatch (line {lineno})")
        rows.append(tuple(_parse_cell(c) for c in cells))
    return SweepTable(columns, rows, metadata)


def read_sweep_table(path) -> SweepTable:
    return parse_sweep_table(Path(path).read_text(), source=str(path))
