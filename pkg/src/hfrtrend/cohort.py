"""Per-day, per-stratum cohort counts and demographic summaries.

A CohortTable holds, for every (age band, gender) cell and every date in
a contiguous range, the number of cases confirmed that day together with
how many of them were eventually hospitalized, eventually died, and were
hospitalized AND died (the HFR numerator).
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .records import AGE_BANDS, AGE_UNKNOWN, ALL_AGE_BANDS, GENDERS, LineRecord

AGGREGATE = "aggregate"
ALL_GENDERS = "all"

SIGNALS = ("cases", "hosp", "deaths", "hosp_and_died")
_SIG_INDEX = {name: i for i, name in enumerate(SIGNALS)}


@dataclass(frozen=True, slots=True)
class StratumKey:
    """An (age band, gender) cell; 'aggregate' / 'all' are union sentinels."""

    age_band: str = AGGREGATE
    gender: str = ALL_GENDERS

    def __post_init__(self):
        if self.age_band not in ALL_AGE_BANDS + (AGGREGATE,):
            raise ValueError(f"bad age band: {self.age_band}")
        if self.gender not in GENDERS + (ALL_GENDERS,):
            raise ValueError(f"bad gender: {self.gender}")


@dataclass
class CohortTable:
    """Daily counts per base (age band, gender) cell over [start, end]."""

    start: dt.date
    end: dt.date
    # (age_band, gender) -> int array of shape (n_days, 4), columns SIGNALS
    cells: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)

    @property
    def n_days(self) -> int:
        return (self.end - self.start).days + 1

    @property
    def dates(self) -> list[dt.date]:
        return [self.start + dt.timedelta(days=i) for i in range(self.n_days)]

    def counts(self, stratum: StratumKey = StratumKey()) -> np.ndarray:
        """Summed (n_days, 4) counts for a stratum, resolving sentinels.

        The aggregate band includes unknown-age records; named age bands
        never do.
        """
        bands = ALL_AGE_BANDS if stratum.age_band == AGGREGATE else (stratum.age_band,)
        genders = GENDERS if stratum.gender == ALL_GENDERS else (stratum.gender,)
        total = np.zeros((self.n_days, 4), dtype=np.int64)
        for band in bands:
            for gender in genders:
                cell = self.cells.get((band, gender))
                if cell is not None:
                    total += cell
        return total

    def signal(self, stratum: StratumKey, name: str) -> np.ndarray:
        return self.counts(stratum)[:, _SIG_INDEX[name]]

    def write_long_csv(self, path) -> None:
        """Serialize to tidy long format (one row per date and base cell)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "age_band", "gender", *SIGNALS])
            dates = self.dates
            for (band, gender), arr in sorted(self.cells.items()):
                for i, date in enumerate(dates):
                    writer.writerow([date.isoformat(), band, gender, *arr[i]])


def build_cohort_table(
    records: Iterable[LineRecord], start: dt.date, end: dt.date
) -> CohortTable:
    """Aggregate cohort-filtered records into a dense daily table.

    Every base cell covers exactly [start, end] with zero-filled gaps so
    downstream rolling windows stay well-defined.
    """
    if start > end:
        raise ValueError("start after end")
    n_days = (end - start).days + 1
    cells: dict[tuple[str, str], np.ndarray] = {}
    for r in records:
        if not (start <= r.event_date <= end):
            continue
        key = (r.age_band, r.gender)
        cell = cells.get(key)
        if cell is None:
            cell = cells[key] = np.zeros((n_days, 4), dtype=np.int64)
        day = (r.event_date - start).days
        cell[day, 0] += 1
        if r.hospitalized:
            cell[day, 1] += 1
        if r.died:
            cell[day, 2] += 1
        if r.hospitalized and r.died:
            cell[day, 3] += 1
    return CohortTable(start=start, end=end, cells=cells)


@dataclass
class DemographicsSummary:
    total_cases: int
    age_counts: dict[str, int]
    gender_counts: dict[str, int]
    hospitalized_yes: int
    died_yes: int

    @property
    def hospitalized_no(self) -> int:
        return self.total_cases - self.hospitalized_yes

    @property
    def died_no(self) -> int:
        return self.total_cases - self.died_yes

    def percentages(self, counts: dict[str, int]) -> dict[str, float]:
        if self.total_cases == 0:
            return {k: 0.0 for k in counts}
        return {k: 100.0 * v / self.total_cases for k, v in counts.items()}

    def as_text(self) -> str:
        lines = [f"Lab Confirmed COVID-19 Cases  {self.total_cases}"]
        lines.append("Age")
        age_pct = self.percentages(self.age_counts)
        for band in ALL_AGE_BANDS:
            n = self.age_counts.get(band, 0)
            lines.append(f"  {band:<8} {n:>9} ({age_pct.get(band, 0.0):.1f}%)")
        lines.append("Gender")
        gender_pct = self.percentages(self.gender_counts)
        for g in GENDERS:
            n = self.gender_counts.get(g, 0)
            lines.append(f"  {g:<14} {n:>9} ({gender_pct.get(g, 0.0):.1f}%)")
        hosp_pct = self.percentages(
            {"yes": self.hospitalized_yes, "no": self.hospitalized_no}
        )
        died_pct = self.percentages({"yes": self.died_yes, "no": self.died_no})
        lines.append("Hospitalized")
        lines.append(f"  yes {self.hospitalized_yes:>9} ({hosp_pct['yes']:.1f}%)")
        lines.append(f"  no  {self.hospitalized_no:>9} ({hosp_pct['no']:.1f}%)")
        lines.append("Died")
        lines.append(f"  yes {self.died_yes:>9} ({died_pct['yes']:.1f}%)")
        lines.append(f"  no  {self.died_no:>9} ({died_pct['no']:.1f}%)")
        return "\n".join(lines)


def summarize_demographics(records: Iterable[LineRecord]) -> DemographicsSummary:
    age_counts = {band: 0 for band in ALL_AGE_BANDS}
    gender_counts = {g: 0 for g in GENDERS}
    total = hosp = died = 0
    for r in records:
        total += 1
        age_counts[r.age_band] += 1
        gender_counts[r.gender] += 1
        hosp += r.hospitalized
        died += r.died
    return DemographicsSummary(
        total_cases=total,
        age_counts=age_counts,
        gender_counts=gender_counts,
        hospitalized_yes=hosp,
        died_yes=died,
    )


def age_distribution_shares(
    table: CohortTable, signal: str
) -> dict[str, "signals_mod.TimeSeries"]:
    """Per-date share of each known-age band in the smoothed signal.

    Shares over the named bands sum to 1 wherever the smoothed known-age
    denominator is positive; dates with zero denominator are gap-marked.
    """
    from . import signals as signals_mod

    smoothed = {}
    for band in AGE_BANDS:
        raw = table.signal(StratumKey(band, ALL_GENDERS), signal).astype(float)
        smoothed[band] = signals_mod.trailing_average_7d(
            signals_mod.TimeSeries(table.start, raw)
        )
    denom = np.sum([smoothed[b].values for b in AGE_BANDS], axis=0)
    gaps = next(iter(smoothed.values())).gaps | (denom <= 0)
    out = {}
    safe = np.where(denom > 0, denom, 1.0)
    for band in AGE_BANDS:
        out[band] = signals_mod.TimeSeries(
            table.start, smoothed[band].values / safe, gaps.copy()
        )
    return out


def gender_fraction_series(
    table: CohortTable, signal: str, min_denominator: float = 5.0
) -> dict[str, "signals_mod.TimeSeries"]:
    """Per-date female fraction per age band on smoothed counts.

    fraction = female / (female + male); dates where the smoothed
    female+male denominator is below `min_denominator` are gap-marked.
    """
    from . import signals as signals_mod

    out = {}
    for band in AGE_BANDS:
        female = signals_mod.trailing_average_7d(
            signals_mod.TimeSeries(
                table.start,
                table.signal(StratumKey(band, "female"), signal).astype(float),
            )
        )
        male = signals_mod.trailing_average_7d(
            signals_mod.TimeSeries(
                table.start,
                table.signal(StratumKey(band, "male"), signal).astype(float),
            )
        )
        denom = female.values + male.values
        gaps = female.gaps | male.gaps | (denom < min_denominator)
        safe = np.where(denom > 0, denom, 1.0)
        out[band] = signals_mod.TimeSeries(table.start, female.values / safe, gaps)
    return out
