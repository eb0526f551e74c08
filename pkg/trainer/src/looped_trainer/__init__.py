"""Looped-Transformer trainer for multi-hop retrieval datasets.

Consumes dataset files written by the generator CLI (line-delimited JSON
behind a header line) and writes accuracy-vs-loop-count tables in the
shared sweep-table CSV schema; the two components interact only through
those two file formats.
"""

__version__ = "0.1.0"
