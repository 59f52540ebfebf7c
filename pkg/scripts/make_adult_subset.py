"""Build the bundled Adult subset from the UCI ``adult.data`` / ``adult.test`` files.

Usage: python scripts/make_adult_subset.py ADULT_DATA ADULT_TEST OUT_DIR

Rows with missing values ('?') are dropped, then 10000 training rows and
5000 test rows are drawn without replacement (seed 0).
"""
import csv
import json
import sys
from pathlib import Path

import numpy as np

COLUMNS = [
    ("age", "numerical"),
    ("workclass", "categorical"),
    ("fnlwgt", "numerical"),
    ("education", "categorical"),
    ("education-num", "numerical"),
    ("marital-status", "categorical"),
    ("occupation", "categorical"),
    ("relationship", "categorical"),
    ("race", "categorical"),
    ("sex", "categorical"),
    ("capital-gain", "numerical"),
    ("capital-loss", "numerical"),
    ("hours-per-week", "numerical"),
    ("native-country", "categorical"),
    ("income", "label"),
]


def read_rows(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            parts = [p.strip() for p in line.strip().split(",")]
            if len(parts) != len(COLUMNS) or "?" in parts:
                continue
            parts[-1] = parts[-1].rstrip(".")
            rows.append(parts)
    return rows


def main(data_path, test_path, out_dir):
    out = Path(out_dir)
    train_rows, test_rows = read_rows(data_path), read_rows(test_path)
    rng = np.random.default_rng(0)
    train_rows = [train_rows[i] for i in sorted(rng.choice(len(train_rows), 10000, replace=False))]
    test_rows = [test_rows[i] for i in sorted(rng.choice(len(test_rows), 5000, replace=False))]

    header = [name for name, _ in COLUMNS]
    for name, rows in (("adult_train.csv", train_rows), ("adult_test.csv", test_rows)):
        with open(out / name, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)

    # levels come from the full files so the test split never sees an unknown level
    everything = read_rows(data_path) + read_rows(test_path)
    columns = []
    for j, (name, kind) in enumerate(COLUMNS):
        entry = {"name": name, "kind": kind}
        if kind != "numerical":
            entry["levels"] = sorted({r[j] for r in everything})
        columns.append(entry)
    with open(out / "adult.schema.json", "w") as fh:
        json.dump({"columns": columns}, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main(*sys.argv[1:4])
