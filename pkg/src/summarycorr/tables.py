"""Reading and writing study-summary CSV files.

The header is required.  Columns are ``study_id,n,mean_x,mean_y,var_x,var_y``
plus an optional grouping column; with ``sd=True`` the spread columns are
``sd_x,sd_y`` and are squared on input.  Row numbers in error messages are
1-based file line numbers (the header is line 1).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import DomainError, InputFormatError, ValidationError
from .model import MIN_STUDY_SIZE, StudySummary

__all__ = [
    "VAR_COLUMNS",
    "SD_COLUMNS",
    "SummaryRow",
    "SummaryTable",
    "parse_summary_table",
    "read_summary_table",
    "write_summary_table",
]

VAR_COLUMNS = ("study_id", "n", "mean_x", "mean_y", "var_x", "var_y")
SD_COLUMNS = ("study_id", "n", "mean_x", "mean_y", "sd_x", "sd_y")


@dataclass(frozen=True)
class SummaryRow:
    study_id: str
    study: StudySummary
    group: str | None = None


@dataclass
class SummaryTable:
    rows: list[SummaryRow]
    group_column: str | None = None

    def studies(self) -> list[StudySummary]:
        return [r.study for r in self.rows]

    def groups(self) -> dict[str | None, list[StudySummary]]:
        """Studies keyed by group, in order of first appearance."""
        out: dict[str | None, list[StudySummary]] = {}
        for row in self.rows:
            out.setdefault(row.group, []).append(row.study)
        return out


def _number(text: str, row: int, column: str, integer: bool = False):
    try:
        if integer:
            value = float(text)
            if not value.is_integer():
                raise ValueError
            return int(value)
        value = float(text)
    except (TypeError, ValueError):
        kind = "an integer" if integer else "a number"
        raise InputFormatError(
            f"row {row}, column {column!r}: expected {kind}, got {text!r}", row=row, column=column
        ) from None
    if not math.isfinite(value):
        raise InputFormatError(
            f"row {row}, column {column!r}: value must be finite, got {text!r}", row=row, column=column
        )
    return value


def parse_summary_table(lines: Iterable[str], group_by: str | None = None, sd: bool = False) -> SummaryTable:
    """Parse CSV text (an iterable of lines) into a validated table."""
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise InputFormatError("empty input: a header row is required", row=1) from None
    header = [h.strip() for h in header]
    required = SD_COLUMNS if sd else VAR_COLUMNS
    missing = [c for c in required if c not in header]
    if group_by is not None and group_by not in header:
        missing.append(group_by)
    if missing:
        raise InputFormatError(f"header is missing column(s): {', '.join(missing)}", row=1)
    if len(set(header)) != len(header):
        raise InputFormatError("header has duplicate column names", row=1)
    col = {name: i for i, name in enumerate(header)}
    spread_x, spread_y = required[4], required[5]

    rows: list[SummaryRow] = []
    seen: set[tuple[str | None, str]] = set()
    for line_no, fields in enumerate(reader, start=2):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != len(header):
            raise InputFormatError(
                f"row {line_no}: expected {len(header)} fields, got {len(fields)}", row=line_no
            )
        get = lambda name: fields[col[name]].strip()  # noqa: E731
        study_id = get("study_id")
        if not study_id:
            raise InputFormatError(f"row {line_no}: empty study_id", row=line_no, column="study_id")
        group = get(group_by) if group_by is not None else None
        n = _number(get("n"), line_no, "n", integer=True)
        mean_x = _number(get("mean_x"), line_no, "mean_x")
        mean_y = _number(get("mean_y"), line_no, "mean_y")
        sx = _number(get(spread_x), line_no, spread_x)
        sy = _number(get(spread_y), line_no, spread_y)

        if n < MIN_STUDY_SIZE:
            raise ValidationError(
                f"row {line_no}: n = {n} violates the rule n >= {MIN_STUDY_SIZE}", row=line_no, column="n"
            )
        for name, value in ((spread_x, sx), (spread_y, sy)):
            if not value > 0:
                raise ValidationError(
                    f"row {line_no}: {name} = {value!r} must be > 0", row=line_no, column=name
                )
        if (group, study_id) in seen:
            raise ValidationError(
                f"row {line_no}: duplicate study_id {study_id!r}"
                + (f" in group {group!r}" if group_by else ""),
                row=line_no,
                column="study_id",
            )
        seen.add((group, study_id))
        var_x, var_y = (sx * sx, sy * sy) if sd else (sx, sy)
        try:
            study = StudySummary(n, mean_x, mean_y, var_x, var_y)
        except DomainError as exc:
            raise ValidationError(f"row {line_no}: {exc}", row=line_no) from None
        rows.append(SummaryRow(study_id, study, group))
    if not rows:
        raise ValidationError("the table contains no studies")
    return SummaryTable(rows, group_by)


def read_summary_table(path, group_by: str | None = None, sd: bool = False) -> SummaryTable:
    with open(path, newline="") as fh:
        return parse_summary_table(fh, group_by=group_by, sd=sd)


def write_summary_table(table: SummaryTable, path=None) -> str:
    """Serialise with 17 significant digits; returns the text and writes it
    to ``path`` if given."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    header = list(VAR_COLUMNS)
    if table.group_column:
        header.append(table.group_column)
    writer.writerow(header)
    for row in table.rows:
        s = row.study
        fields = [row.study_id, s.n, *(format(v, ".17g") for v in (s.mean_x, s.mean_y, s.var_x, s.var_y))]
        if table.group_column:
            fields.append(row.group)
        writer.writerow(fields)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, newline="")
    return text
