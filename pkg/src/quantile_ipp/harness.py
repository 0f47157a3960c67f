"""Trial matrices, metrics, persistence and CSV export.

A trial is one (objective, seed) pair: a survey followed by every configured
selection method on the resulting belief. Each trial is rebuilt from the
config and its seed alone, so trials are independent and reproducible.

Files written under ``output_dir``::

    config.yaml                      the resolved configuration
    records/<objective>_s<seed>.json          TrialRecord (no timings)
    records/<objective>_s<seed>.timings.json  wall-clock seconds per phase
    records/<objective>_s<seed>.history.json  measurements, for re-selection
    summary.json                     median and quartiles across seeds

CSV schemas (``export``)::

    traces.csv     config_hash, objective, seed, step, rmse
    finals.csv     config_hash, objective, seed, steps, initial_rmse,
                   final_rmse, error
    selection.csv  config_hash, objective, seed, method, loss,
                   rmse_locations, rmse_locations_mean, evaluations

``step`` counts executed planning steps from 1. Floats are written with
``repr`` so a load round-trips them exactly.
"""

from __future__ import annotations

import csv
import json
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, config_hash, dump_config
from .environment import (GroundTruthField, SensorModel, SurveyHistory,
                          load_raster, sample_gp_field)
from .gp import GpHyperparams, GpModel, condition
from .grid import GridWorld
from .objectives import ObjectiveConfig
from .selection import SelectionConfig, select
from .survey import BASELINES, Normalizer, rmse, run_survey

rmse_quantiles = rmse


def rmse_locations(truth, locations, env: GroundTruthField) -> tuple[float, float]:
    """``(||V - GT(Q)||_2, sqrt(mean((V - GT(Q))^2)))`` with nearest-cell lookup.

    The first (plain L2 norm) is the primary figure.
    """
    d = np.asarray(truth, dtype=float) - env.lookup(np.atleast_2d(locations))
    return float(np.linalg.norm(d)), float(np.sqrt(np.mean(d * d)))


@dataclass
class MethodRecord:
    method: str
    locations: list
    predicted: list
    loss: float
    rmse_locations: float
    rmse_locations_mean: float
    evaluations: int


@dataclass
class TrialRecord:
    config_hash: str
    objective: str
    seed: int
    field_seed: int
    true_quantiles: list
    initial_estimate: list
    final_estimate: list
    initial_rmse: float | None
    rmse_trace: list
    selections: list = field(default_factory=list)
    error: str | None = None
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def final_rmse(self) -> float:
        return self.rmse_trace[-1] if self.rmse_trace else self.initial_rmse

    @property
    def stem(self) -> str:
        return f"{self.objective}_s{self.seed}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("timings")
        return d

    @classmethod
    def from_dict(cls, d: dict, timings: dict | None = None) -> TrialRecord:
        d = dict(d)
        d["selections"] = [MethodRecord(**m) for m in d.get("selections", [])]
        return cls(**d, timings=timings or {})


# --- building blocks from a config ------------------------------------------

def build_world(cfg: ExperimentConfig) -> GridWorld:
    w = cfg.world
    return GridWorld(tuple(w.dims), w.resolution, w.cell_size, tuple(w.margin))


def build_theta(cfg: ExperimentConfig) -> GpHyperparams:
    g = cfg.gp
    return GpHyperparams(g.lengthscale, g.signal_variance, g.noise_variance, 0.0)


def build_field(cfg: ExperimentConfig, world: GridWorld) -> GroundTruthField:
    f = cfg.field
    if f.source == "raster":
        return load_raster(f.path, world)
    th = build_theta(cfg)
    th = GpHyperparams(f.lengthscale or th.lengthscale,
                       f.signal_variance or th.signal_variance, th.noise_variance, 0.0)
    return sample_gp_field(world, th, f.seed, units=f.units)


def build_sensor(cfg: ExperimentConfig) -> SensorModel:
    s = cfg.sensor
    return SensorModel(s.kind, tuple(s.footprint), s.samples)


def build_objective(cfg: ExperimentConfig, kind: str) -> ObjectiveConfig | None:
    if kind in BASELINES:
        return None
    o = cfg.objectives
    return ObjectiveConfig(kind, cfg.quantiles.spec(), o.c_plan.get(kind), o.xi,
                           o.ei_denominator, o.subsample)


def _selection_config(cfg: ExperimentConfig, method: str, seed: int) -> SelectionConfig:
    s = cfg.selection
    return SelectionConfig(method, cfg.c_select, s.sa, s.ce, s.bo, seed)


def run_selection(cfg: ExperimentConfig, env: GroundTruthField, gp: GpModel,
                  norm: Normalizer, estimate, truth, locations, seed: int,
                  timings: dict) -> list[MethodRecord]:
    """Every configured method, in normalised GP space, scored on the field."""
    targets = norm.forward(estimate)
    bounds = env.world.bounds
    out = []
    for method in cfg.selection.methods:
        t0 = time.perf_counter()
        res = select(targets, gp, _selection_config(cfg, method, seed), bounds, locations)
        timings[f"selection_{method}"] = time.perf_counter() - t0
        l2, mean = rmse_locations(truth, res.locations, env)
        out.append(MethodRecord(method, res.locations.tolist(),
                                norm.inverse(res.predicted).tolist(), res.loss,
                                l2, mean, res.evaluations))
    return out


def run_trial(cfg: ExperimentConfig, objective: str, seed: int,
              return_history: bool = False):
    """One survey plus selection; failures become records with ``error`` set."""
    chash = config_hash(cfg)
    history = None
    try:
        world = build_world(cfg)
        env = build_field(cfg, world)
        spec = cfg.quantiles.spec()
        strategy = "pomcp" if objective not in BASELINES else objective
        planner = replace(cfg.planner, seed=seed) if strategy == "pomcp" else None
        result = run_survey(env, build_sensor(cfg), strategy, build_objective(cfg, objective),
                            cfg.survey.budget, build_theta(cfg), spec, planner,
                            cfg.survey.seed_count, cfg.survey.start, seed)
        timings = dict(result.timings)
        final = result.estimates[-1] if result.estimates else result.initial_estimate
        history = result.history
        selections = run_selection(cfg, env, result.gp, result.normalizer, final,
                                   result.true_quantiles, history.location_array(),
                                   seed, timings)
        record = TrialRecord(chash, objective, seed, cfg.field.seed,
                             result.true_quantiles.tolist(),
                             result.initial_estimate.tolist(), final.tolist(),
                             result.initial_rmse, list(result.rmse_trace),
                             selections, None, timings)
    except Exception as exc:  # recorded, the matrix carries on
        record = TrialRecord(chash, objective, seed, cfg.field.seed, [], [], [],
                             None, [], [], f"{type(exc).__name__}: {exc}\n"
                             + traceback.format_exc(limit=3))
    return (record, history) if return_history else record


# --- persistence -------------------------------------------------------------

def _records_dir(out) -> Path:
    d = Path(out) / "records"
    d.mkdir(parents=True, exist_ok=True)
    return d


def save_record(record: TrialRecord, out, history: SurveyHistory | None = None) -> Path:
    d = _records_dir(out)
    path = d / f"{record.stem}.json"
    path.write_text(json.dumps(record.to_dict(), indent=1))
    (d / f"{record.stem}.timings.json").write_text(json.dumps(record.timings, indent=1))
    if history is not None:
        (d / f"{record.stem}.history.json").write_text(json.dumps(history.to_dict()))
    return path


def load_records(out) -> list[TrialRecord]:
    d = Path(out) / "records"
    recs = []
    for p in sorted(d.glob("*.json")):
        if p.name.endswith((".timings.json", ".history.json")):
            continue
        tp = p.with_name(p.stem + ".timings.json")
        timings = json.loads(tp.read_text()) if tp.exists() else {}
        recs.append(TrialRecord.from_dict(json.loads(p.read_text()), timings))
    return recs


def load_history(out, record: TrialRecord, world: GridWorld) -> SurveyHistory:
    p = Path(out) / "records" / f"{record.stem}.history.json"
    return SurveyHistory.from_dict(json.loads(p.read_text()), world)


def _quartiles(values) -> dict:
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if not len(v):
        return {"median": None, "q1": None, "q3": None, "n": 0}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3), "n": int(len(v))}


def summarize(records: list[TrialRecord]) -> dict:
    """Median and quartiles across seeds, per objective and per method."""
    out: dict = {"objectives": {}, "failed": sum(not r.ok for r in records)}
    for obj in sorted({r.objective for r in records}):
        rs = [r for r in records if r.objective == obj and r.ok]
        entry = {"final_rmse": _quartiles([r.final_rmse for r in rs]),
                 "initial_rmse": _quartiles([r.initial_rmse for r in rs]),
                 "selection": {}}
        methods = sorted({m.method for r in rs for m in r.selections})
        for m in methods:
            vals = [s.rmse_locations for r in rs for s in r.selections if s.method == m]
            entry["selection"][m] = _quartiles(vals)
        out["objectives"][obj] = entry
    return out


def _trial_job(args):
    cfg, objective, seed = args
    return run_trial(cfg, objective, seed, return_history=True)


def run_matrix(cfg: ExperimentConfig, jobs: int = 1, out=None,
               write: bool = True) -> list[TrialRecord]:
    """All objectives x seeds; each trial runs every selection method."""
    out = Path(out or cfg.output_dir)
    tasks = [(cfg, obj, seed) for obj in cfg.objectives.kinds for seed in cfg.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial_job, tasks))
    else:
        results = [_trial_job(t) for t in tasks]
    records = [r for r, _ in results]
    if write:
        out.mkdir(parents=True, exist_ok=True)
        dump_config(cfg, out / "config.yaml")
        for rec, hist in results:
            save_record(rec, out, hist)
        (out / "summary.json").write_text(json.dumps(summarize(records), indent=1))
    return records


def reselect(cfg: ExperimentConfig, out) -> list[TrialRecord]:
    """Rerun selection on saved histories with the current selection config."""
    world = build_world(cfg)
    env = build_field(cfg, world)
    theta = build_theta(cfg)
    updated = []
    for rec in load_records(out):
        if not rec.ok:
            updated.append(rec)
            continue
        hist = load_history(out, rec, world)
        norm = Normalizer.fit(hist.values[: hist.n_seed])
        gp = condition(hist.location_array(), norm.forward(hist.values), theta)
        timings = dict(rec.timings)
        rec.selections = run_selection(cfg, env, gp, norm, rec.final_estimate,
                                       rec.true_quantiles, hist.location_array(),
                                       rec.seed, timings)
        rec.timings = timings
        save_record(rec, out)
        updated.append(rec)
    (Path(out) / "summary.json").write_text(json.dumps(summarize(updated), indent=1))
    return updated


# --- CSV export ----------------------------------------------------------------

TRACE_COLUMNS = ("config_hash", "objective", "seed", "step", "rmse")
FINAL_COLUMNS = ("config_hash", "objective", "seed", "steps", "initial_rmse",
                 "final_rmse", "error")
SELECTION_COLUMNS = ("config_hash", "objective", "seed", "method", "loss",
                     "rmse_locations", "rmse_locations_mean", "evaluations")

_TYPES = {"seed": int, "step": int, "steps": int, "evaluations": int,
          "rmse": float, "initial_rmse": float, "final_rmse": float, "loss": float,
          "rmse_locations": float, "rmse_locations_mean": float}


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else ("" if v is None else v)


def _write(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def export(records: list[TrialRecord], out) -> dict[str, Path]:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot write to {out}: {exc}") from exc
    paths = {k: out / f"{k}.csv" for k in ("traces", "finals", "selection")}
    _write(paths["traces"], TRACE_COLUMNS,
           [(r.config_hash, r.objective, r.seed, i + 1, v)
            for r in records for i, v in enumerate(r.rmse_trace)])
    _write(paths["finals"], FINAL_COLUMNS,
           [(r.config_hash, r.objective, r.seed, len(r.rmse_trace), r.initial_rmse,
             r.final_rmse, (r.error or "").splitlines()[0] if r.error else None)
            for r in records])
    _write(paths["selection"], SELECTION_COLUMNS,
           [(r.config_hash, r.objective, r.seed, m.method, m.loss, m.rmse_locations,
             m.rmse_locations_mean, m.evaluations)
            for r in records for m in r.selections])
    return paths


def load_csv(path) -> list[dict]:
    """Rows of an exported CSV with numeric columns converted back."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for k, v in row.items():
            if k in _TYPES and v != "":
                row[k] = _TYPES[k](v)
            elif v == "":
                row[k] = None
    return rows
