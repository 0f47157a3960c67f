"""The plan -> act -> measure -> recondition loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .environment import (GroundTruthField, SensorModel, SurveyHistory,
                          seed_measurements, sensed_indices)
from .gp import GpHyperparams, GpModel, LatticeBelief, condition
from .grid import Action, GridWorld, RobotState, apply_action
from .objectives import ObjectiveConfig, evaluate
from .planner import PlannerConfig, coverage_plan, plan, random_walk_plan
from .quantiles import QuantileSpec, quantile_values

BASELINES = ("random_walk", "coverage")


class IppProblem:
    """Generative model the planner searches over: lattice belief + sensor."""

    def __init__(self, world: GridWorld, sensor: SensorModel, objective: ObjectiveConfig):
        self.world = world
        self.sensor = sensor
        self.objective = objective
        self._footprints: dict = {}

    def sensed(self, start, end) -> np.ndarray:
        key = (start, end)
        idx = self._footprints.get(key)
        if idx is None:
            idx = sensed_indices(self.world, self.sensor, start, end)
            self._footprints[key] = idx
        return idx

    def step(self, belief, state: RobotState, action: Action):
        nxt = apply_action(state, action, self.world)
        idx = self.sensed(state.position, nxt.position)
        r, belief = evaluate(self.objective, belief, idx)
        return r, belief, nxt


@dataclass
class Normalizer:
    mean: float = 0.0
    scale: float = 1.0

    @classmethod
    def fit(cls, values) -> Normalizer:
        v = np.asarray(values, dtype=float)
        if len(v) < 2:
            return cls(float(v.mean()) if len(v) else 0.0, 1.0)
        sd = float(np.std(v))
        return cls(float(np.mean(v)), sd if sd > 0 else 1.0)

    def forward(self, y):
        return (np.asarray(y, dtype=float) - self.mean) / self.scale

    def inverse(self, z):
        return np.asarray(z, dtype=float) * self.scale + self.mean


@dataclass
class SurveyResult:
    history: SurveyHistory
    gp: GpModel
    normalizer: Normalizer
    true_quantiles: np.ndarray
    estimates: list[np.ndarray]             # de-normalised, one per executed step
    rmse_trace: list[float]
    initial_estimate: np.ndarray | None = None
    initial_rmse: float | None = None
    timings: dict = field(default_factory=dict)

    @property
    def final_estimate(self) -> np.ndarray:
        return self.estimates[-1]


def rmse(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def run_survey(env: GroundTruthField, sensor: SensorModel, strategy: str,
               objective: ObjectiveConfig | None, budget: int,
               theta: GpHyperparams, spec: QuantileSpec,
               planner: PlannerConfig | None = None, seed_count: int = 100,
               start=None, seed: int = 0) -> SurveyResult:
    """Survey ``env`` for ``budget`` steps with a POMCP objective or a baseline.

    ``strategy`` is ``"pomcp"`` (uses ``objective``) or one of ``BASELINES``.
    Traces hold one entry per executed step; the seeded-only belief is
    reported separately as ``initial_estimate`` / ``initial_rmse``.
    """
    world = env.world
    rng = np.random.default_rng(seed)
    timings = {"planning": 0.0, "gp_updates": 0.0}
    history = seed_measurements(env, seed_count)
    norm = Normalizer.fit(history.values)
    t0 = time.perf_counter()
    gp = condition(history.location_array(), norm.forward(history.values), theta)
    timings["gp_updates"] += time.perf_counter() - t0

    start = tuple(start) if start is not None else (0,) * world.ndim
    state = RobotState(start, 0, budget)
    history.positions.append(start)
    truth = quantile_values(env.values, spec)
    pts = world.measure_points

    def current():
        return norm.inverse(quantile_values(gp.predict_mean(pts), spec))

    def record():
        est = current()
        estimates.append(est)
        trace.append(rmse(truth, est))

    estimates: list[np.ndarray] = []
    trace: list[float] = []
    initial = current()

    if strategy == "coverage":
        queue = coverage_plan(world, budget, start)
    elif strategy == "random_walk" or strategy == "pomcp":
        queue = []
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "pomcp":
        if objective is None or planner is None:
            raise ValueError("pomcp needs an objective and a planner config")
        problem = IppProblem(world, sensor, objective)

    while state.remaining > 0:
        t0 = time.perf_counter()
        if strategy == "pomcp":
            belief = LatticeBelief.from_model(gp, pts)
            actions = plan(belief, state, problem, planner, rng)
        elif strategy == "random_walk":
            actions = [random_walk_plan(state, world, rng)]
        else:
            if not queue:
                break
            actions = [queue.pop(0)]
        timings["planning"] += time.perf_counter() - t0
        for action in actions[: state.remaining]:
            nxt = apply_action(state, action, world)
            idx = sensed_indices(world, sensor, state.position, nxt.position)
            vals = env.values[idx]
            history.record(idx, pts[idx], vals)
            history.actions.append(action)
            history.positions.append(nxt.position)
            state = nxt
            t0 = time.perf_counter()
            gp = gp.updated(pts[idx], norm.forward(vals))
            timings["gp_updates"] += time.perf_counter() - t0
            record()

    return SurveyResult(history, gp, norm, truth, estimates, trace,
                        initial_estimate=initial,
                        initial_rmse=rmse(truth, initial), timings=timings)
