"""Cohort aggregation against a brute-force nested-loop oracle."""

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hfrtrend import LineRecord, StratumKey, build_cohort_table
from hfrtrend.cohort import (
    AGGREGATE,
    ALL_GENDERS,
    SIGNALS,
    age_distribution_shares,
    gender_fraction_series,
    summarize_demographics,
)
from hfrtrend.records import AGE_BANDS, AGE_UNKNOWN, ALL_AGE_BANDS, GENDERS
from hfrtrend.signals import TimeSeries, trailing_average_7d

START = dt.date(2020, 4, 1)


def oracle_counts(records, start, end, bands, genders):
    """Nested-loop group-by: the independent reference implementation."""
    n_days = (end - start).days + 1
    out = np.zeros((n_days, 4), dtype=np.int64)
    for day in range(n_days):
        date = start + dt.timedelta(days=day)
        for r in records:
            if r.event_date != date or r.age_band not in bands:
                continue
            if r.gender not in genders:
                continue
            out[day, 0] += 1
            out[day, 1] += int(r.hospitalized)
            out[day, 2] += int(r.died)
            out[day, 3] += int(r.hospitalized and r.died)
    return out


record_strategy = st.builds(
    LineRecord,
    event_date=st.integers(min_value=-5, max_value=45).map(
        lambda d: START + dt.timedelta(days=d)
    ),
    age_band=st.sampled_from(ALL_AGE_BANDS),
    gender=st.sampled_from(GENDERS),
    hospitalized=st.booleans(),
    died=st.booleans(),
    state=st.none(),
)


class TestBuildCohortTable:
    @given(st.lists(record_strategy, max_size=80))
    @settings(max_examples=60)
    def test_matches_oracle_all_strata(self, records):
        end = START + dt.timedelta(days=40)
        table = build_cohort_table(records, START, end)
        strata = [(AGGREGATE, ALL_GENDERS), ("50-59", "female"), ("80+", ALL_GENDERS)]
        for band, gender in strata:
            bands = ALL_AGE_BANDS if band == AGGREGATE else (band,)
            genders = GENDERS if gender == ALL_GENDERS else (gender,)
            expected = oracle_counts(records, START, end, bands, genders)
            got = table.counts(StratumKey(band, gender))
            assert np.array_equal(got, expected)

    @given(st.lists(record_strategy, max_size=80))
    @settings(max_examples=40)
    def test_cells_sum_to_aggregate(self, records):
        end = START + dt.timedelta(days=40)
        table = build_cohort_table(records, START, end)
        total = np.zeros((table.n_days, 4), dtype=np.int64)
        for arr in table.cells.values():
            total += arr
        assert np.array_equal(total, table.counts())

    def test_out_of_range_records_dropped(self):
        records = [
            LineRecord(START - dt.timedelta(days=1), "0-9", "male", False, False),
            LineRecord(START, "0-9", "male", False, False),
        ]
        table = build_cohort_table(records, START, START + dt.timedelta(days=5))
        assert table.counts()[:, 0].sum() == 1

    def test_named_bands_exclude_unknown_age(self):
        records = [LineRecord(START, AGE_UNKNOWN, "male", True, True)]
        table = build_cohort_table(records, START, START)
        assert table.counts(StratumKey()).sum() > 0
        for band in AGE_BANDS:
            assert table.counts(StratumKey(band, ALL_GENDERS)).sum() == 0

    def test_invalid_stratum_rejected(self):
        with pytest.raises(ValueError):
            StratumKey("50s", "all")
        with pytest.raises(ValueError):
            StratumKey("50-59", "nonbinary")

    def test_signal_column_order(self):
        records = [LineRecord(START, "50-59", "male", True, False)]
        table = build_cohort_table(records, START, START)
        key = StratumKey()
        assert table.signal(key, "cases")[0] == 1
        assert table.signal(key, "hosp")[0] == 1
        assert table.signal(key, "deaths")[0] == 0
        assert table.signal(key, "hosp_and_died")[0] == 0

    def test_long_csv_round_trip(self, tmp_path):
        records = [
            LineRecord(START, "50-59", "male", True, True),
            LineRecord(START + dt.timedelta(days=1), "0-9", "female", False, False),
        ]
        table = build_cohort_table(records, START, START + dt.timedelta(days=1))
        path = tmp_path / "long.csv"
        table.write_long_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "date,age_band,gender," + ",".join(SIGNALS)
        assert len(lines) == 1 + 2 * 2  # two cells, two days each


class TestDemographics:
    def test_hand_counted_summary(self):
        records = [
            LineRecord(START, "50-59", "female", True, True),
            LineRecord(START, "50-59", "male", False, False),
            LineRecord(START, AGE_UNKNOWN, "other-unknown", True, False),
        ]
        demo = summarize_demographics(records)
        assert demo.total_cases == 3
        assert demo.age_counts["50-59"] == 2
        assert demo.age_counts[AGE_UNKNOWN] == 1
        assert demo.gender_counts == {"female": 1, "male": 1, "other-unknown": 1}
        assert demo.hospitalized_yes == 2
        assert demo.hospitalized_no == 1
        assert demo.died_yes == 1
        assert demo.died_no == 2

    def test_percentages_sum_to_100(self):
        records = [
            LineRecord(START, band, "female", False, False) for band in AGE_BANDS
        ]
        demo = summarize_demographics(records)
        assert sum(demo.percentages(demo.age_counts).values()) == pytest.approx(100.0)

    def test_text_rendering_contains_counts(self):
        records = [LineRecord(START, "80+", "male", True, True)]
        text = summarize_demographics(records).as_text()
        assert "Lab Confirmed COVID-19 Cases  1" in text
        assert "80+" in text


def _burst_table(rng, n_days=30):
    records = []
    for day in range(n_days):
        for band in ("20-29", "50-59"):
            for gender in ("female", "male"):
                for _ in range(int(rng.integers(3, 12))):
                    records.append(
                        LineRecord(
                            START + dt.timedelta(days=day),
                            band,
                            gender,
                            bool(rng.random() < 0.5),
                            False,
                        )
                    )
    return build_cohort_table(records, START, START + dt.timedelta(days=n_days - 1))


class TestDerivedSeries:
    def test_age_shares_sum_to_one(self, rng):
        table = _burst_table(rng)
        shares = age_distribution_shares(table, "cases")
        total = np.sum([shares[b].values for b in AGE_BANDS], axis=0)
        gaps = shares["0-9"].gaps
        assert np.allclose(total[~gaps], 1.0)
        assert gaps[:6].all()  # no complete trailing window yet

    def test_age_shares_match_direct_ratio(self, rng):
        table = _burst_table(rng)
        shares = age_distribution_shares(table, "cases")
        smoothed = {
            b: trailing_average_7d(
                TimeSeries(
                    table.start,
                    table.signal(StratumKey(b, ALL_GENDERS), "cases").astype(float),
                )
            ).values
            for b in AGE_BANDS
        }
        denom = np.sum([smoothed[b] for b in AGE_BANDS], axis=0)
        ok = ~shares["50-59"].gaps
        assert np.allclose(
            shares["50-59"].values[ok], smoothed["50-59"][ok] / denom[ok]
        )

    def test_gender_fraction_matches_direct_ratio(self, rng):
        table = _burst_table(rng)
        fractions = gender_fraction_series(table, "cases")
        female = trailing_average_7d(
            TimeSeries(
                table.start,
                table.signal(StratumKey("50-59", "female"), "cases").astype(float),
            )
        ).values
        male = trailing_average_7d(
            TimeSeries(
                table.start,
                table.signal(StratumKey("50-59", "male"), "cases").astype(float),
            )
        ).values
        ok = ~fractions["50-59"].gaps
        assert np.allclose(
            fractions["50-59"].values[ok], female[ok] / (female[ok] + male[ok])
        )
        assert np.all(fractions["50-59"].values[ok] >= 0)
        assert np.all(fractions["50-59"].values[ok] <= 1)

    def test_gender_fraction_gaps_low_support(self):
        # one lone male case: denominator below the support floor everywhere
        records = [LineRecord(START, "50-59", "male", False, False)]
        table = build_cohort_table(records, START, START + dt.timedelta(days=20))
        fractions = gender_fraction_series(table, "cases")
        assert fractions["50-59"].gaps.all()
