"""Synthetic data generator: determinism, calibration, scenario shapes."""

import datetime as dt

import numpy as np
import pytest

from hfrtrend import normalize_record
from hfrtrend.synth import (
    SynthConfig,
    generate_line_records,
    simpson_paradox_holds,
    simpson_scenario,
    step_down_scenario,
    write_florida_csv,
)

START = dt.date(2020, 4, 1)
END = dt.date(2020, 5, 31)


def _flat_config(seed=0, hfr=0.3, p_hosp=0.25, cases=400.0, **kwargs):
    n = (END - START).days + 1
    return SynthConfig(
        start=START,
        end=END,
        case_intensity={"50-59": np.full(n, cases)},
        p_hosp={"50-59": np.full(n, p_hosp)},
        hfr={"50-59": np.full(n, hfr)},
        seed=seed,
        **kwargs,
    )


class TestGenerate:
    def test_deterministic_per_seed(self):
        a, _ = generate_line_records(_flat_config(seed=7))
        b, _ = generate_line_records(_flat_config(seed=7))
        c, _ = generate_line_records(_flat_config(seed=8))
        assert a == b
        assert a != c

    def test_empirical_rates_within_3_se(self):
        config = _flat_config(seed=3)
        records, _ = generate_line_records(config)
        recs = [normalize_record(r) for r in records]
        n = len(recs)
        hosp = [r for r in recs if r.hospitalized]
        died_in_hosp = sum(r.died for r in hosp)

        p = len(hosp) / n
        se = (0.25 * 0.75 / n) ** 0.5
        assert abs(p - 0.25) < 3 * se

        hfr = died_in_hosp / len(hosp)
        se = (0.3 * 0.7 / len(hosp)) ** 0.5
        assert abs(hfr - 0.3) < 3 * se

        females = sum(r.gender == "female" for r in recs)
        se = (0.25 / n) ** 0.5
        assert abs(females / n - 0.5) < 3 * se

    def test_death_implies_hospitalization(self):
        records, _ = generate_line_records(_flat_config(seed=1))
        for r in records:
            if r.died_raw == "yes":
                assert r.hospitalized_raw == "yes"

    def test_missingness_only_relabels_no(self):
        config = _flat_config(seed=2, missingness_rate=0.5)
        records, _ = generate_line_records(config)
        labels = {r.hospitalized_raw for r in records} | {r.died_raw for r in records}
        assert "unknown" in labels or "missing" in labels
        # relabeled "no" recodes back to False, so booleans are unchanged
        # versus the clean run with identical draws being impossible to
        # guarantee; instead check the recoded empirical HFR is unbiased
        recs = [normalize_record(r) for r in records]
        hosp = [r for r in recs if r.hospitalized]
        hfr = sum(r.died for r in hosp) / len(hosp)
        se = (0.3 * 0.7 / len(hosp)) ** 0.5
        assert abs(hfr - 0.3) < 4 * se

    def test_truth_table_mirrors_config(self):
        config = _flat_config()
        _, truth = generate_line_records(config)
        assert truth.bands == ("50-59",)
        assert np.array_equal(truth.hfr["50-59"], config.hfr["50-59"])

    def test_validation_rejects_bad_curves(self):
        config = _flat_config()
        config.hfr["50-59"] = np.full(config.n_days, 1.5)
        with pytest.raises(ValueError):
            generate_line_records(config)
        config = _flat_config()
        config.case_intensity["50-59"] = config.case_intensity["50-59"][:-1]
        with pytest.raises(ValueError):
            generate_line_records(config)


class TestScenarios:
    def test_step_down_plateaus(self):
        config = step_down_scenario()
        curve = config.hfr["50-59"]
        assert curve[0] == pytest.approx(0.30, abs=1e-3)
        assert curve[-1] == pytest.approx(0.18, abs=1e-3)
        assert np.all(np.diff(curve) <= 0)
        # probe dates used downstream sit deep in the plateaus
        i_old = (dt.date(2020, 5, 1) - config.start).days
        i_new = (dt.date(2020, 9, 15) - config.start).days
        assert curve[i_new] / curve[i_old] - 1 == pytest.approx(-0.40, abs=0.002)

    def test_simpson_scenario_paradox_by_construction(self):
        config = simpson_scenario()
        assert simpson_paradox_holds(config)
        # aggregate endpoint drop close to the documented -2.6%
        _, truth = generate_line_records(config)
        agg = truth.aggregate_hfr()
        assert (agg[-1] / agg[0] - 1) == pytest.approx(-0.026, abs=0.005)

    def test_flat_scenario_is_not_a_paradox(self):
        assert not simpson_paradox_holds(_flat_config())


class TestWriteFloridaCsv:
    def test_round_trip_through_parser(self, tmp_path):
        from hfrtrend.ingest import parse_florida_lines

        config = _flat_config(seed=5, cases=30.0, missingness_rate=0.3)
        records, _ = generate_line_records(config)
        path = tmp_path / "synth.csv"
        write_florida_csv(records, path)
        parsed, report = parse_florida_lines(path)
        assert report.kept_rows == len(records)
        assert report.rejected_rows_by_reason == {}
        # outcome booleans survive the layout round trip
        original = [(normalize_record(r).hospitalized, normalize_record(r).died)
                    for r in records]
        recovered = [(normalize_record(r).hospitalized, normalize_record(r).died)
                     for r in parsed]
        assert original == recovered
