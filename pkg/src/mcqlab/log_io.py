"""Answer-log CSV persistence.

The on-disk format is a plain CSV with a fixed header (the columns of
``LOG_COLUMNS`` in order).  Ingestion validates structurally: an exact
header match, integer-typed fields, known option kinds, consistent ranges,
and no duplicate ``(student_id, item_id, sequence_no)`` triples.  Errors
point at the first offending line and column.
"""

from __future__ import annotations

import csv
from pathlib import Path

import pandas as pd

from .bank import ItemKind
from .cohort import LOG_COLUMNS, normalize_log

_KIND_NAMES = {k.value for k in ItemKind}
_INT_COLUMNS = [c for c in LOG_COLUMNS if c != "kind"]


def write_answer_log(path, log: pd.DataFrame) -> None:
    """Write an answer log as CSV (canonical column order and dtypes)."""
    normalize_log(log).to_csv(path, index=False, lineterminator="\n")


def _fail(path, lineno, msg):
    raise ValueError(f"{path}, line {lineno}: {msg}")


def ingest_csv(path) -> pd.DataFrame:
    """Read and validate an answer-log CSV.

    Returns the canonical frame (int64 columns, ``kind`` as strings).  The
    first malformed row aborts ingestion with its line number and column.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(LOG_COLUMNS):
            raise ValueError(
                f"{path}: header mismatch; expected {','.join(LOG_COLUMNS)!r}, "
                f"got {','.join(header or [])!r}"
            )
        columns = {c: [] for c in LOG_COLUMNS}
        seen: dict[tuple, int] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(LOG_COLUMNS):
                _fail(path, lineno,
                      f"expected {len(LOG_COLUMNS)} fields, got {len(row)}")
            record = dict(zip(LOG_COLUMNS, row))
            for col in _INT_COLUMNS:
                try:
                    record[col] = int(record[col])
                except ValueError:
                    _fail(path, lineno,
                          f"column {col!r}: not an integer: {record[col]!r}")
            if record["kind"] not in _KIND_NAMES:
                _fail(path, lineno,
                      f"column 'kind': unknown option kind {record['kind']!r}")
            if record["is_correct"] not in (0, 1):
                _fail(path, lineno,
                      f"column 'is_correct': must be 0 or 1, got {record['is_correct']}")
            if not 1 <= record["n_distractors"] <= 7:
                _fail(path, lineno,
                      f"column 'n_distractors': must lie in 1..7, "
                      f"got {record['n_distractors']}")
            if not 0 <= record["selected_index"] <= record["n_distractors"]:
                _fail(path, lineno,
                      f"column 'selected_index': {record['selected_index']} is "
                      f"outside 0..{record['n_distractors']}")
            if record["sequence_no"] < 0:
                _fail(path, lineno, "column 'sequence_no': must be >= 0")
            key = (record["student_id"], record["item_id"], record["sequence_no"])
            if key in seen:
                _fail(path, lineno,
                      f"duplicate (student_id, item_id, sequence_no) triple "
                      f"{key}; first seen on line {seen[key]}")
            seen[key] = lineno
            for col in LOG_COLUMNS:
                columns[col].append(record[col])

    return normalize_log(pd.DataFrame(columns, columns=list(LOG_COLUMNS)))
