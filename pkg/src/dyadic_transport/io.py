"""File formats: the JSON partition document and CSV report tables.

Partition document::

    {
      "format": "dyadic-transport-partition",
      "version": 1,
      "d": 2, "N": 100, "L": 4, "fallback": false,
      "cells": [
        {"n": 1, "point": ["0/1", "0/1"], "lo": ["0/1", "0/1"], "hi": ["1/10", "1/4"]},
        ...
      ]
    }

Every rational is written as ``"p/q"`` in lowest terms with ``q > 0``; the
document never contains floating-point numbers.
"""

from __future__ import annotations

import csv
import json
import re
from typing import IO, Iterable

from gmpy2 import mpq

from .geometry import Rect
from .partition import Cell, TransportPartition

FORMAT_NAME = "dyadic-transport-partition"
FORMAT_VERSION = 1
TABLE_HEADER = ("N", "value", "lower", "upper", "oracle", "error")

_RATIONAL = re.compile(r"-?\d+(/\d+)?")

__all__ = [
    "PartitionFormatError",
    "format_rational",
    "parse_rational",
    "partition_to_dict",
    "partition_from_dict",
    "dumps_partition",
    "loads_partition",
    "dump_partition",
    "load_partition",
    "format_cell",
    "write_table",
    "TABLE_HEADER",
]


class PartitionFormatError(ValueError):
    """The partition document is malformed."""


def format_rational(q) -> str:
    q = mpq(q)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text) -> mpq:
    if not isinstance(text, str) or not _RATIONAL.fullmatch(text.strip()):
        raise PartitionFormatError(f"not an exact rational: {text!r}")
    num, _, den = text.strip().partition("/")
    if den and int(den) == 0:
        raise PartitionFormatError(f"zero denominator: {text!r}")
    return mpq(int(num), int(den) if den else 1)


def partition_to_dict(P: TransportPartition) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "d": P.d,
        "N": P.N,
        "L": P.L,
        "fallback": P.fallback,
        "cells": [
            {
                "n": c.n,
                "point": [format_rational(v) for v in c.point],
                "lo": [format_rational(v) for v in c.rect.lo],
                "hi": [format_rational(v) for v in c.rect.hi],
            }
            for c in P.cells
        ],
    }


def _int_field(doc: dict, key: str) -> int:
    v = doc.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise PartitionFormatError(f"field {key!r} must be an integer")
    return v


def _vector(rec: dict, key: str, d: int) -> tuple:
    v = rec.get(key)
    if not isinstance(v, list) or len(v) != d:
        raise PartitionFormatError(f"cell field {key!r} must be a list of {d} rationals")
    return tuple(parse_rational(x) for x in v)


def partition_from_dict(doc) -> TransportPartition:
    if not isinstance(doc, dict):
        raise PartitionFormatError("document must be a JSON object")
    if doc.get("format") != FORMAT_NAME or doc.get("version") != FORMAT_VERSION:
        raise PartitionFormatError("unknown format or version")
    d, N, L = (_int_field(doc, k) for k in ("d", "N", "L"))
    if d < 1 or N < 1 or L < 0:
        raise PartitionFormatError("d, N must be positive and L non-negative")
    fallback = doc.get("fallback")
    if not isinstance(fallback, bool):
        raise PartitionFormatError("field 'fallback' must be a boolean")
    records = doc.get("cells")
    if not isinstance(records, list):
        raise PartitionFormatError("field 'cells' must be a list")
    cells = []
    for rec in records:
        if not isinstance(rec, dict):
            raise PartitionFormatError("cell records must be objects")
        n = _int_field(rec, "n")
        lo = _vector(rec, "lo", d)
        hi = _vector(rec, "hi", d)
        if any(b < a for a, b in zip(lo, hi)):
            raise PartitionFormatError(f"cell {n}: inverted interval")
        # empty cells are representable so that verification can report them
        rect = Rect(lo, hi, degenerate=any(a == b for a, b in zip(lo, hi)))
        cells.append(Cell(n, _vector(rec, "point", d), rect))
    cells.sort(key=lambda c: c.n)
    return TransportPartition(d, N, L, fallback, cells)


def dumps_partition(P: TransportPartition) -> str:
    return json.dumps(partition_to_dict(P), separators=(",", ":"))


def loads_partition(text: str) -> TransportPartition:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PartitionFormatError(f"invalid JSON: {exc}") from exc
    return partition_from_dict(doc)


def dump_partition(P: TransportPartition, fp: IO[str]) -> None:
    fp.write(dumps_partition(P))
    fp.write("\n")


def load_partition(fp: IO[str]) -> TransportPartition:
    return loads_partition(fp.read())


def format_cell(value) -> str:
    """Render one table field: rationals as ``p/q``, floats to 12 significant digits."""
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, int):
        return str(value)
    return format_rational(value)


def write_table(rows: Iterable[dict], fp: IO[str], header=TABLE_HEADER) -> None:
    """Write CSV rows keyed by the header names; missing fields are left empty."""
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(row.get(k)) for k in header])
