#!/usr/bin/env python3
"""Reproduce the demographics and HFR drop tables from real files.

Needs the Florida line list and/or the national case-surveillance file
downloaded locally; neither ships with this repository. Output mirrors
the published tables: a demographics breakdown and per-age-band HFR
levels and relative drops with bootstrap confidence intervals.

Usage:
    python3 scripts/reproduce_tables.py --florida-csv fl.csv --out /tmp/fl
    python3 scripts/reproduce_tables.py --cdc-csv us.csv.gz --auto-exclude \\
        --out /tmp/us
"""

import argparse
import sys
from pathlib import Path

from hfrtrend.cli import main as cli_main


def run(argv) -> None:
    code = cli_main(argv)
    if code != 0:
        sys.exit(code)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--florida-csv")
    parser.add_argument("--cdc-csv")
    parser.add_argument("--auto-exclude", action="store_true")
    parser.add_argument("--testing-csv",
                        help="daily testing aggregates for the positive rate")
    parser.add_argument("--replicates", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()
    if not (args.florida_csv or args.cdc_csv):
        parser.error("supply --florida-csv and/or --cdc-csv")

    out = Path(args.out)
    for label, path, schema in (
        ("florida", args.florida_csv, "florida"),
        ("national", args.cdc_csv, "cdc"),
    ):
        if not path:
            continue
        ingested = out / label / "ingested"
        analyzed = out / label / "analyzed"
        boot = out / label / "bootstrap"
        run(["ingest", "--input", path, "--schema", schema,
             "--out", str(ingested)])
        analyze_args = ["analyze", "--store", str(ingested / "store.npz"),
                        "--out", str(analyzed)]
        if args.auto_exclude and schema == "cdc":
            analyze_args.append("--auto-exclude")
        if args.testing_csv and schema == "florida":
            analyze_args += ["--testing-file", args.testing_csv]
        run(analyze_args)
        run(["bootstrap", "--analyzed", str(analyzed),
             "--replicates", str(args.replicates), "--seed", str(args.seed),
             "--out", str(boot)])
        print(f"\n=== {label} demographics ===")
        print((analyzed / "demographics.txt").read_text())
        for table in sorted(boot.glob("hfr_drop_*.txt")):
            print(f"=== {label} {table.name} ===")
            print(table.read_text())


if __name__ == "__main__":
    main()
