"""CSV ingestion of (possibly incomplete) observation rows and result output."""

from __future__ import annotations

import csv
import math
from typing import Iterator

import numpy as np

from ..errors import CSVFormatError
from ..imputation import MaskedVector

RECORD_FIELDS = ("algorithm", "n", "d", "q", "replication", "L",
                 "wall_ms_per_iter", "peak_mem_bytes")
SUMMARY_FIELDS = ("algorithm", "n", "d", "q", "replications", "L_mean", "L_stderr",
                  "wall_ms_per_iter_mean")


def _parse(token, line, column):
    tok = token.strip()
    if tok == "" or tok.lower() == "nan":
        return math.nan
    try:
        value = float(tok)
    except ValueError:
        raise CSVFormatError(
            f"line {line}, column {column}: non-numeric token {token!r}",
            line=line, column=column) from None
    if not math.isfinite(value):
        raise CSVFormatError(f"line {line}, column {column}: non-finite value {token!r}",
                             line=line, column=column)
    return value


def ingest_csv(path, has_header=False) -> Iterator[MaskedVector]:
    """Yield the rows of a numeric CSV file one at a time.

    Empty fields and ``NaN`` (any case) mark unobserved coordinates. All
    rows must have the width of the first data row.
    """
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            line = reader.line_num
            if has_header and line == 1:
                continue
            if not row:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CSVFormatError(
                    f"line {line}: expected {width} fields, found {len(row)}", line=line)
            values = np.array([_parse(tok, line, j + 1) for j, tok in enumerate(row)])
            yield MaskedVector.from_nan(values)


def write_matrix_csv(path, X):
    """Write rows of ``X`` with round-trip float formatting; NaN as empty field."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(X, dtype=float):
            writer.writerow(["" if math.isnan(v) else repr(float(v)) for v in row])


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records(path, records, include_timing=False):
    """Per-replication results. Timing columns stay empty unless requested,
    so that reruns with the same seed produce identical files."""
    extra = any(r.compression_loss is not None for r in records)
    fields = RECORD_FIELDS + (("compression_loss",) if extra else ())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for r in records:
            row = [r.algorithm, r.n, r.d, r.q, r.replication, _fmt(r.L),
                   _fmt(r.wall_ms_per_iter) if include_timing else "",
                   _fmt(r.peak_mem_bytes) if include_timing else ""]
            if extra:
                row.append(_fmt(r.compression_loss))
            writer.writerow(row)


def summarize(records):
    """Mean and standard error of L per (algorithm, n, d, q).

    Records without an L value (file runs with no reference) are left out
    of the mean; the count column still includes them.
    """
    groups = {}
    for r in records:
        groups.setdefault((r.algorithm, r.n, r.d, r.q), []).append(r)
    rows = []
    for key, recs in groups.items():
        L = np.array([r.L for r in recs if r.L is not None])
        mean = float(L.mean()) if L.size else None
        se = float(L.std(ddof=1) / np.sqrt(L.size)) if L.size > 1 else (0.0 if L.size else None)
        wall = float(np.mean([r.wall_ms_per_iter for r in recs]))
        rows.append((*key, len(recs), mean, se, wall))
    return rows


def write_summary(path, records, include_timing=False):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_FIELDS)
        for *head, wall in summarize(records):
            writer.writerow([_fmt(v) for v in head] + [_fmt(wall) if include_timing else ""])
