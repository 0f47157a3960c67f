"""Directional comparison of planning objectives across synthetic fields.

For every field seed, runs each objective over the configured trial seeds and
reports the per-field median final decile RMSE, plus how many fields each
objective wins against quantile_se.

    python scripts/compare_objectives.py --preset drone-small --fields 10
"""

from __future__ import annotations

import argparse
import dataclasses
import json
from pathlib import Path

import numpy as np

from quantile_ipp.config import load_config, load_preset
from quantile_ipp.harness import run_trial


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--preset", default="drone-small")
    p.add_argument("--config", type=Path)
    p.add_argument("--fields", type=int, default=10)
    p.add_argument("--objectives", nargs="+",
                   default=["quantile_se", "quantile_change", "entropy", "random_walk", "coverage"])
    p.add_argument("--step", type=int, help="compare RMSE after this step (default: final)")
    p.add_argument("--out", type=Path, help="write per-field medians as JSON")
    args = p.parse_args(argv)

    base = load_config(args.config) if args.config else load_preset(args.preset)
    base = dataclasses.replace(base, selection=dataclasses.replace(base.selection, methods=()))
    medians = {obj: [] for obj in args.objectives}
    for f in range(args.fields):
        cfg = dataclasses.replace(base, field=dataclasses.replace(base.field, seed=f))
        row = []
        for obj in args.objectives:
            recs = [r for r in (run_trial(cfg, obj, s) for s in cfg.seeds) if r.ok]
            finals = [r.rmse_trace[args.step - 1] if args.step else r.final_rmse for r in recs]
            medians[obj].append(float(np.median(finals)) if finals else float("nan"))
            row.append(f"{obj}={medians[obj][-1]:.4f}")
        print(f"field {f}: " + "  ".join(row), flush=True)

    ref = np.array(medians.get("quantile_se", []))
    for obj, vals in medians.items():
        line = f"{obj:<22} median of medians {np.nanmedian(vals):.4f}"
        if len(ref) and obj != "quantile_se":
            line += f"  quantile_se <= {obj} in {int(np.sum(ref <= np.array(vals)))}/{len(ref)}"
        print(line)
    if args.out:
        args.out.write_text(json.dumps(medians, indent=1))


if __name__ == "__main__":
    main()
