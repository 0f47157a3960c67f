"""Command line entry point: ``quantile-ipp {survey,select,report}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config, load_preset
from .harness import export, load_records, reselect, run_matrix, summarize

log = logging.getLogger("quantile_ipp")


def _config(args):
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        raise ConfigError("give --config or --preset")
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seeds=tuple(args.seed))
    if args.out:
        cfg = dataclasses.replace(cfg, output_dir=str(args.out))
    return cfg


def _report_failures(records) -> int:
    bad = [r for r in records if not r.ok]
    for r in bad:
        log.error("trial %s failed: %s", r.stem, r.error.splitlines()[0])
    log.info("%d trials, %d failed", len(records), len(bad))
    return 0 if not bad else 1


def cmd_survey(args) -> int:
    cfg = _config(args)
    log.info("running %s: %d objectives x %d seeds -> %s", cfg.name,
             len(cfg.objectives.kinds), len(cfg.seeds), cfg.output_dir)
    records = run_matrix(cfg, jobs=args.jobs, out=cfg.output_dir)
    return _report_failures(records)


def cmd_select(args) -> int:
    out = Path(args.out) if args.out else None
    if args.config or args.preset:
        cfg = _config(args)
        out = out or Path(cfg.output_dir)
    else:
        if out is None:
            raise ConfigError("give --out (a survey output directory) or a config")
        cfg = load_config(out / "config.yaml")
    records = reselect(cfg, out)
    return _report_failures(records)


def cmd_report(args) -> int:
    out = Path(args.out)
    records = load_records(out)
    paths = export(records, args.export or out)
    summary = summarize(records)
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    for obj, entry in summary["objectives"].items():
        fr = entry["final_rmse"]
        if fr["n"]:
            log.info("%-22s final RMSE median %.4g [%.4g, %.4g] (n=%d)", obj,
                     fr["median"], fr["q1"], fr["q3"], fr["n"])
        for m, q in entry["selection"].items():
            if q["n"]:
                log.info("%-22s   %-3s location RMSE median %.4g", "", m, q["median"])
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return 0 if not summary["failed"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quantile-ipp", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_out=False):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--config", type=Path, help="YAML experiment config")
        src.add_argument("--preset", help="drone-small or auv-small")
        sp.add_argument("--out", type=Path, required=need_out, help="output directory")

    s = sub.add_parser("survey", help="run the objectives x seeds matrix")
    common(s)
    s.add_argument("--seed", type=int, nargs="+", help="override the seed list")
    s.add_argument("--jobs", type=int, default=1, help="parallel trials (1 = deterministic order)")
    s.set_defaults(func=cmd_survey)

    s = sub.add_parser("select", help="rerun selection on saved survey histories")
    common(s)
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("report", help="aggregate records and export CSV tables")
    s.add_argument("--out", type=Path, required=True, help="survey output directory")
    s.add_argument("--export", type=Path, help="directory for CSV files (default: --out)")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
