"""Smoothing and rate computation.

All rates are ratios of 7-day trailing-averaged counts: numerator and
denominator are smoothed separately, then divided. Undefined dates carry
a gap mark, never a zero, so exports and spline fits can skip them.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cohort import CohortTable, StratumKey
from .records import DailyTestRecord


@dataclass
class TimeSeries:
    """Daily values on a dense grid with a gap mask (True = undefined)."""

    start: dt.date
    values: np.ndarray
    gaps: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.gaps is None:
            self.gaps = np.zeros(len(self.values), dtype=bool)
        else:
            self.gaps = np.asarray(self.gaps, dtype=bool)
        if len(self.gaps) != len(self.values):
            raise ValueError("values and gap mask lengths differ")
        if not np.all(np.isfinite(self.values[~self.gaps])):
            raise ValueError("non-finite value outside gaps")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def dates(self) -> list[dt.date]:
        return [self.start + dt.timedelta(days=i) for i in range(len(self))]

    def day_index(self, date: dt.date) -> int:
        return (date - self.start).days


@dataclass
class RateSeries:
    """A smoothed ratio with its smoothed support counts."""

    series: TimeSeries
    numerator_support: np.ndarray
    denominator_support: np.ndarray
    kind: str  # {cfr, hfr, pos_test_rate, share}

    def write_long_csv(self, path, stratum: str = "aggregate") -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["date", "stratum", "value", "num_support", "den_support", "gap"]
            )
            for i, date in enumerate(self.series.dates):
                gap = bool(self.series.gaps[i])
                writer.writerow(
                    [
                        date.isoformat(),
                        stratum,
                        "" if gap else f"{self.series.values[i]:.10g}",
                        f"{self.numerator_support[i]:.10g}",
                        f"{self.denominator_support[i]:.10g}",
                        int(gap),
                    ]
                )


WINDOW = 7


def trailing_average_7d(raw: TimeSeries, window: int = WINDOW) -> TimeSeries:
    """Trailing mean over [t-window+1, t] on a dense daily grid.

    The first window-1 days have no complete trailing window inside the
    series and are gap-marked, as is any day whose window touches a gap.
    Callers wanting defined values early must supply pre-window data.
    """
    n = len(raw)
    values = np.zeros(n)
    gaps = np.ones(n, dtype=bool)
    if n >= window:
        windows = np.lib.stride_tricks.sliding_window_view(raw.values, window)
        values[window - 1 :] = windows.sum(axis=1) / window
        gap_windows = np.lib.stride_tricks.sliding_window_view(raw.gaps, window)
        gaps[window - 1 :] = gap_windows.any(axis=1)
    values[gaps] = 0.0
    return TimeSeries(raw.start, values, gaps)


def _ratio_of_smoothed(
    start: dt.date,
    numerator: np.ndarray,
    denominator: np.ndarray,
    kind: str,
    extra_gaps: np.ndarray | None = None,
) -> RateSeries:
    num = trailing_average_7d(TimeSeries(start, np.asarray(numerator, dtype=float)))
    den = trailing_average_7d(TimeSeries(start, np.asarray(denominator, dtype=float)))
    gaps = num.gaps | den.gaps | (den.values <= 0)
    if extra_gaps is not None:
        gaps = gaps | extra_gaps
    safe = np.where(den.values > 0, den.values, 1.0)
    values = np.where(gaps, 0.0, num.values / safe)
    return RateSeries(
        series=TimeSeries(start, values, gaps),
        numerator_support=num.values,
        denominator_support=den.values,
        kind=kind,
    )


def cfr_series(table: CohortTable, stratum: StratumKey = StratumKey()) -> RateSeries:
    """Cohort CFR: smoothed eventual deaths over smoothed cases."""
    counts = table.counts(stratum)
    return _ratio_of_smoothed(table.start, counts[:, 2], counts[:, 0], "cfr")


def hfr_series(
    table: CohortTable, stratum: StratumKey = StratumKey(), min_deaths: int = 2
) -> RateSeries:
    """Cohort HFR: smoothed hospitalized-and-died over smoothed
    eventual hospitalizations.

    Dates whose trailing 7-day hospitalized-and-died total is below
    `min_deaths` are gap-marked (inadequate support).
    """
    counts = table.counts(stratum)
    hosp_and_died = counts[:, 3].astype(float)
    n = len(hosp_and_died)
    window_deaths = np.zeros(n)
    if n >= WINDOW:
        window_deaths[WINDOW - 1 :] = np.lib.stride_tricks.sliding_window_view(
            hosp_and_died, WINDOW
        ).sum(axis=1)
    low_support = window_deaths < min_deaths
    return _ratio_of_smoothed(
        table.start, counts[:, 3], counts[:, 1], "hfr", extra_gaps=low_support
    )


def crude_ratio(table: CohortTable, stratum: StratumKey, kind: str = "cfr") -> float:
    """Unsmoothed grand ratio over the whole table (sanity companion)."""
    counts = table.counts(stratum).sum(axis=0)
    if kind == "cfr":
        num, den = counts[2], counts[0]
    elif kind == "hfr":
        num, den = counts[3], counts[1]
    else:
        raise ValueError(f"unknown kind: {kind}")
    return num / den if den else float("nan")


def positive_test_rate(tests: Sequence[DailyTestRecord]) -> RateSeries:
    """Smoothed new positives over smoothed new tests on a dense grid."""
    if not tests:
        raise ValueError("no testing records")
    recs = sorted(tests, key=lambda r: r.date)
    start, end = recs[0].date, recs[-1].date
    n = (end - start).days + 1
    positives = np.zeros(n)
    totals = np.zeros(n)
    for r in recs:
        i = (r.date - start).days
        positives[i] += r.new_positives
        totals[i] += r.new_tests
    return _ratio_of_smoothed(start, positives, totals, "pos_test_rate")


def incidence_cfr(
    deaths: TimeSeries, cases: TimeSeries
) -> RateSeries:
    """Naive same-day deaths/cases ratio from incidence data.

    This is NOT cohort-aligned; it exists to reproduce the headline
    apparent-decline curve from secondary aggregate data and is labeled
    distinctly from the cohort CFR.
    """
    if deaths.start != cases.start or len(deaths) != len(cases):
        raise ValueError("deaths and cases series must share their grid")
    return _ratio_of_smoothed(
        deaths.start, deaths.values, cases.values, "cfr",
        extra_gaps=deaths.gaps | cases.gaps,
    )
