"""Summarize location-selection results from a finished survey directory.

Prints, per objective and selection method, the median selection loss, the
median location RMSE and how often the method beats Best Visited.

    python scripts/selection_study.py runs/drone-small
"""

from __future__ import annotations

import argparse
from collections import defaultdict
from pathlib import Path

import numpy as np

from quantile_ipp.harness import load_records


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out", type=Path, help="survey output directory")
    args = p.parse_args(argv)

    table = defaultdict(lambda: defaultdict(list))
    for rec in load_records(args.out):
        if not rec.ok or not rec.selections:
            continue
        by = {m.method: m for m in rec.selections}
        bv = by.get("bv")
        for m in rec.selections:
            t = table[rec.objective][m.method]
            t.append((m.loss, m.rmse_locations_mean,
                      bv is not None and m.rmse_locations_mean < bv.rmse_locations_mean))
    for obj, methods in table.items():
        print(obj)
        for method, rows in methods.items():
            loss, rmse, wins = map(np.array, zip(*rows))
            print(f"  {method:<3} n={len(rows):<3} loss {np.median(loss):9.4f}  "
                  f"per-quantile location RMSE {np.median(rmse):.4f}  beats bv {int(wins.sum())}/{len(rows)}")


if __name__ == "__main__":
    main()
