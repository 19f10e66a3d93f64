"""Parsing and filtering of line-level surveillance files.

Two layouts are supported (Florida FDOH line list and the national CDC
case-surveillance file) via declarative schemas, plus daily testing
aggregates. Parsing is streaming: memory stays bounded by the row batch,
never the file, so the multi-gigabyte national file is safe to ingest.
"""

from __future__ import annotations

import csv
import datetime as dt
import gzip
import io
import logging
from collections import Counter, defaultdict
from typing import IO, Iterable, Iterator

from .records import (
    CONFIRMED_OTHER,
    CONFIRMED_PCR,
    IngestReport,
    DailyTestRecord,
    LineRecord,
    RawLineRecord,
)
from .schemas import CDC_SCHEMA, FLORIDA_SCHEMA, ParseSchema, SchemaError

log = logging.getLogger(__name__)


def _open_text(file) -> IO[str]:
    """Open a path or binary stream as text, transparently gunzipping."""
    if isinstance(file, (str, bytes)) or hasattr(file, "__fspath__"):
        raw = open(file, "rb")
    elif isinstance(file.read(0), str):
        return file
    else:
        raw = file
    if not raw.seekable():
        raise ValueError("input stream must be seekable")
    head = raw.read(2)
    raw.seek(0)
    if head == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(raw, "rb"), encoding="utf-8")
    return io.TextIOWrapper(raw, encoding="utf-8")


def _parse_date(text: str, formats: tuple[str, ...]) -> dt.date | None:
    text = text.strip()
    if not text:
        return None
    for fmt in formats:
        try:
            return dt.datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    return None


class _RowError(Exception):
    def __init__(self, reason: str):
        self.reason = reason


def _row_to_raw(
    row: dict[str, str], schema: ParseSchema, use_alt_event_date: bool
) -> RawLineRecord:
    date_col = schema.event_date_column
    if use_alt_event_date:
        if schema.alt_event_date_column is None:
            raise SchemaError(f"schema {schema.name} has no alternate date column")
        date_col = schema.alt_event_date_column
    event_date = _parse_date(row[date_col], schema.date_formats)
    if event_date is None:
        raise _RowError("bad_date")

    confirmation = CONFIRMED_PCR
    if schema.confirmation_column is not None:
        flag = row[schema.confirmation_column].strip().lower()
        if flag not in schema.confirmed_values:
            confirmation = CONFIRMED_OTHER

    age_years = None
    age_band = None
    if schema.age_column is not None:
        cell = row[schema.age_column].strip()
        if cell:
            try:
                age_years = int(float(cell))
            except ValueError:
                raise _RowError("bad_age")
            if age_years < 0 or age_years > 120:
                raise _RowError("bad_age")
    if schema.age_band_column is not None:
        label = row[schema.age_band_column].strip().lower()
        try:
            band = schema.age_band_spellings[label]
        except KeyError:
            raise _RowError("bad_age")
        age_band = None if band == "unknown" else band

    def categorize(column: str, spellings: dict[str, str], reason: str) -> str:
        label = row[column].strip().lower()
        try:
            return spellings[label]
        except KeyError:
            raise _RowError(reason)

    gender = categorize(schema.gender_column, schema.gender_spellings, "bad_gender")
    hosp = categorize(
        schema.hospitalized_column, schema.outcome_spellings, "bad_outcome"
    )
    died = categorize(schema.died_column, schema.outcome_spellings, "bad_outcome")

    state = None
    if schema.state_column is not None:
        state = row[schema.state_column].strip().upper() or None

    return RawLineRecord(
        event_date=event_date,
        age_years=age_years,
        age_band=age_band,
        gender=gender,
        hospitalized_raw=hosp,
        died_raw=died,
        state=state,
        confirmation_kind=confirmation,
    )


def iter_parse_lines(
    file,
    schema: ParseSchema,
    report: IngestReport,
    use_alt_event_date: bool = False,
    quarantine: IO[str] | None = None,
) -> Iterator[RawLineRecord]:
    """Stream RawLineRecords from a delimited file, filling `report`.

    Rejected rows are tallied per reason; when `quarantine` is given they
    are re-emitted there with a trailing reason column. Lab-unconfirmed
    rows (schemas with a confirmation column) are rejected.
    """
    text = _open_text(file)
    reader = csv.DictReader(text, delimiter=schema.delimiter)
    if reader.fieldnames is None:
        raise SchemaError("input file has no header row")
    missing = [c for c in schema.required_columns() if c not in reader.fieldnames]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")

    quarantine_writer = None
    if quarantine is not None:
        quarantine_writer = csv.writer(quarantine, delimiter=schema.delimiter)
        quarantine_writer.writerow(list(reader.fieldnames) + ["rejection_reason"])

    for row in reader:
        try:
            raw = _row_to_raw(row, schema, use_alt_event_date)
            if raw.confirmation_kind != CONFIRMED_PCR:
                raise _RowError("not_lab_confirmed")
        except _RowError as err:
            report.reject(err.reason)
            if quarantine_writer is not None:
                quarantine_writer.writerow(
                    [row.get(c, "") or "" for c in reader.fieldnames]
                    + [err.reason]
                )
            continue
        report.keep(raw)
        yield raw


def parse_florida_lines(
    file, schema: ParseSchema = FLORIDA_SCHEMA, **kwargs
) -> tuple[list[RawLineRecord], IngestReport]:
    """Parse a Florida-layout line list; event date is the positive-test
    confirmation date column."""
    report = IngestReport()
    records = list(iter_parse_lines(file, schema, report, **kwargs))
    return records, report


def parse_cdc_lines(
    file, schema: ParseSchema = CDC_SCHEMA, **kwargs
) -> tuple[list[RawLineRecord], IngestReport]:
    """Parse a CDC-layout surveillance file; event date defaults to the
    CDC report date (pass use_alt_event_date=True for specimen date)."""
    report = IngestReport()
    records = list(iter_parse_lines(file, schema, report, **kwargs))
    return records, report


def filter_cohort(
    records: Iterable[LineRecord],
    window: tuple[dt.date, dt.date] = (dt.date(2020, 3, 26), dt.date(2020, 11, 1)),
    maturity_days: int = 30,
    data_vintage: dt.date = dt.date(2020, 12, 4),
) -> list[LineRecord]:
    """Keep records inside the study window whose outcomes had time to
    be recorded (event date at least `maturity_days` before the vintage).
    """
    start, end = window
    if start > end:
        raise ValueError("window start after end")
    if maturity_days < 0:
        raise ValueError("maturity_days must be nonnegative")
    mature_cutoff = data_vintage - dt.timedelta(days=maturity_days)
    kept = [r for r in records if start <= r.event_date <= end and r.event_date <= mature_cutoff]
    if not kept:
        log.warning("cohort filter produced an empty result")
    return kept


def detect_reporting_artifacts(
    records: Iterable[LineRecord], dump_fraction: float = 0.5
) -> list[tuple[str, dict]]:
    """Flag states whose top two event dates hold >= dump_fraction of
    their cases (bulk-dump reporting rather than daily reporting).

    Returns (state, evidence) pairs sorted by state code; evidence gives
    the offending dates and the joint fraction.
    """
    if not (0 < dump_fraction <= 1):
        raise ValueError("dump_fraction must be in (0, 1]")
    by_state: dict[str, Counter] = defaultdict(Counter)
    for r in records:
        if r.state is not None:
            by_state[r.state][r.event_date] += 1
    flagged = []
    for state in sorted(by_state):
        counts = by_state[state]
        total = sum(counts.values())
        # ties broken by date so the evidence is input-order invariant
        top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:2]
        top_total = sum(c for _, c in top)
        if total > 0 and top_total / total >= dump_fraction:
            flagged.append(
                (
                    state,
                    {
                        "top_dates": [d.isoformat() for d, _ in top],
                        "top_fraction": top_total / total,
                        "total_cases": total,
                    },
                )
            )
    return flagged


def load_testing_series(
    file,
    region: str,
    cumulative: bool = True,
    date_column: str = "date",
    positives_column: str = "positive",
    tests_column: str = "totalTestResults",
    date_formats: tuple[str, ...] = ("%Y-%m-%d", "%Y%m%d", "%m/%d/%Y"),
    report: IngestReport | None = None,
) -> list[DailyTestRecord]:
    """Load daily testing aggregates, differencing cumulative inputs.

    Negative daily increments (reporting corrections) are clamped to zero
    and counted on the report.
    """
    if report is None:
        report = IngestReport()
    text = _open_text(file)
    reader = csv.DictReader(text)
    if reader.fieldnames is None:
        raise SchemaError("testing file has no header row")
    for col in (date_column, positives_column, tests_column):
        if col not in reader.fieldnames:
            raise SchemaError(f"missing required column(s): {col}")

    rows = []
    for row in reader:
        date = _parse_date(row[date_column], date_formats)
        if date is None:
            report.reject("bad_date")
            continue
        try:
            pos = int(float(row[positives_column] or 0))
            tests = int(float(row[tests_column] or 0))
        except ValueError:
            report.reject("bad_count")
            continue
        report.total_rows += 1
        report.kept_rows += 1
        rows.append((date, pos, tests))
    rows.sort(key=lambda t: t[0])

    out = []
    prev_pos = prev_tests = 0
    for date, pos, tests in rows:
        if cumulative:
            d_pos, d_tests = pos - prev_pos, tests - prev_tests
            prev_pos, prev_tests = pos, tests
        else:
            d_pos, d_tests = pos, tests
        if d_pos < 0:
            report.clamped_values += 1
            d_pos = 0
        if d_tests < 0:
            report.clamped_values += 1
            d_tests = 0
        if d_pos > d_tests:
            # positives can't exceed tests; trust tests, clamp positives
            report.clamped_values += 1
            d_pos = d_tests
        out.append(
            DailyTestRecord(
                date=date, new_positives=d_pos, new_tests=d_tests, region=region
            )
        )
    if report.clamped_values:
        log.warning("clamped %d non-monotone testing values", report.clamped_values)
    return out
