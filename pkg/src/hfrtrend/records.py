"""Core record types shared across the pipeline.

Line-level surveillance rows come in raw (four-category outcome labels,
age as years or a pre-binned band) and normalized (strict booleans, decade
age bands) flavors. Everything downstream consumes the normalized form.
"""

from __future__ import annotations

import datetime as dt
from collections import Counter
from dataclasses import dataclass, field

AGE_BANDS = (
    "0-9",
    "10-19",
    "20-29",
    "30-39",
    "40-49",
    "50-59",
    "60-69",
    "70-79",
    "80+",
)
AGE_UNKNOWN = "unknown"
ALL_AGE_BANDS = AGE_BANDS + (AGE_UNKNOWN,)

GENDERS = ("female", "male", "other-unknown")

OUTCOME_CATEGORIES = ("yes", "no", "unknown", "missing")

CONFIRMED_PCR = "pcr_positive"
CONFIRMED_OTHER = "other"


@dataclass(frozen=True, slots=True)
class RawLineRecord:
    """One parsed row before outcome recoding and age binning."""

    event_date: dt.date
    age_years: int | None  # integer age when the source gives years
    age_band: str | None  # pre-binned band when the source gives bands
    gender: str  # one of GENDERS
    hospitalized_raw: str  # one of OUTCOME_CATEGORIES
    died_raw: str  # one of OUTCOME_CATEGORIES
    state: str | None
    confirmation_kind: str  # CONFIRMED_PCR or CONFIRMED_OTHER


@dataclass(frozen=True, slots=True)
class LineRecord:
    """One confirmed case with recoding completed."""

    event_date: dt.date
    age_band: str  # one of ALL_AGE_BANDS
    gender: str  # one of GENDERS
    hospitalized: bool
    died: bool
    state: str | None = None


@dataclass
class IngestReport:
    """Accounting for one parsed file: every input row is kept or rejected."""

    total_rows: int = 0
    kept_rows: int = 0
    rejected_rows_by_reason: Counter = field(default_factory=Counter)
    hospitalized_tallies: Counter = field(default_factory=Counter)
    died_tallies: Counter = field(default_factory=Counter)
    clamped_values: int = 0
    excluded_states: list[str] = field(default_factory=list)

    def reject(self, reason: str) -> None:
        self.total_rows += 1
        self.rejected_rows_by_reason[reason] += 1

    def keep(self, record: RawLineRecord) -> None:
        self.total_rows += 1
        self.kept_rows += 1
        self.hospitalized_tallies[record.hospitalized_raw] += 1
        self.died_tallies[record.died_raw] += 1

    @property
    def conserved(self) -> bool:
        return self.total_rows == self.kept_rows + sum(
            self.rejected_rows_by_reason.values()
        )

    def as_dict(self) -> dict:
        return {
            "total_rows": self.total_rows,
            "kept_rows": self.kept_rows,
            "rejected_rows_by_reason": dict(self.rejected_rows_by_reason),
            "hospitalized_tallies": dict(self.hospitalized_tallies),
            "died_tallies": dict(self.died_tallies),
            "clamped_values": self.clamped_values,
            "excluded_states": list(self.excluded_states),
        }


@dataclass(frozen=True, slots=True)
class DailyTestRecord:
    """Daily testing aggregates (already differenced to daily increments)."""

    date: dt.date
    new_positives: int
    new_tests: int
    region: str


def recode_outcome(raw: str) -> bool:
    """Collapse the four outcome categories to a boolean.

    Only an explicit "yes" counts as an event; "no", "unknown" and
    "missing" all recode to False.
    """
    if raw not in OUTCOME_CATEGORIES:
        raise ValueError(f"not an outcome category: {raw!r}")
    return raw == "yes"


def bin_age(age_years: int) -> str:
    """Map integer age in years to its decade band (80+ open above)."""
    if age_years < 0:
        raise ValueError(f"negative age: {age_years}")
    if age_years >= 80:
        return "80+"
    return AGE_BANDS[age_years // 10]


def normalize_record(raw: RawLineRecord) -> LineRecord:
    """Recode outcomes to booleans and resolve the age band."""
    if raw.age_band is not None:
        band = raw.age_band
    elif raw.age_years is not None:
        band = bin_age(raw.age_years)
    else:
        band = AGE_UNKNOWN
    return LineRecord(
        event_date=raw.event_date,
        age_band=band,
        gender=raw.gender,
        hospitalized=recode_outcome(raw.hospitalized_raw),
        died=recode_outcome(raw.died_raw),
        state=raw.state,
    )
