"""Ground-truth fields, sensors and survey bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gp import GpHyperparams, _jittered_cholesky, kernel_matrix
from .grid import Action, GridWorld, RejectedActionError, RobotState

RASTER_MAGIC = "# quantile-ipp raster v1"


class RasterFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GroundTruthField:
    world: GridWorld
    values: np.ndarray
    units: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if len(v) != self.world.n_measure:
            raise ValueError(
                f"field has {len(v)} values, world has {self.world.n_measure} points")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def at(self, indices) -> np.ndarray:
        return self.values[np.asarray(indices, dtype=int)]

    def lookup(self, locations) -> np.ndarray:
        """Values at the X# points nearest to continuous ``locations``."""
        return self.values[self.world.nearest_measure_index(locations)]


@dataclass(frozen=True)
class SensorModel:
    """``camera``: a footprint lattice of X# cells centred on the pose.
    ``point``: ``samples`` evenly spaced reads along each move."""

    kind: str = "camera"
    footprint: tuple[int, ...] = (8, 5)
    samples: int = 5

    def __post_init__(self):
        if self.kind not in ("camera", "point"):
            raise ValueError(f"unknown sensor kind {self.kind!r}")
        object.__setattr__(self, "footprint", tuple(int(f) for f in self.footprint))
        if self.kind == "camera" and (not self.footprint or min(self.footprint) < 1):
            raise ValueError("camera footprint must be nonempty")
        if self.samples < 1:
            raise ValueError("point sensor needs at least one sample")


@dataclass
class SurveyHistory:
    indices: list[int] = field(default_factory=list)
    locations: list[np.ndarray] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    actions: list[Action] = field(default_factory=list)
    positions: list[tuple[int, ...]] = field(default_factory=list)
    n_seed: int = 0

    @property
    def steps(self) -> int:
        return len(self.actions)

    def record(self, indices, locations, values):
        self.indices.extend(int(i) for i in indices)
        self.locations.extend(np.asarray(locations, dtype=float))
        self.values.extend(float(v) for v in values)

    def location_array(self) -> np.ndarray:
        return np.array(self.locations, dtype=float)

    def to_dict(self) -> dict:
        return {
            "indices": list(self.indices),
            "values": list(self.values),
            "actions": [[a.axis, a.direction] for a in self.actions],
            "positions": [list(p) for p in self.positions],
            "n_seed": self.n_seed,
        }

    @classmethod
    def from_dict(cls, d: dict, world: GridWorld) -> SurveyHistory:
        idx = [int(i) for i in d["indices"]]
        return cls(
            indices=idx,
            locations=list(world.measure_points[idx]),
            values=[float(v) for v in d["values"]],
            actions=[Action(int(a), int(s)) for a, s in d["actions"]],
            positions=[tuple(p) for p in d["positions"]],
            n_seed=int(d["n_seed"]),
        )


def sample_gp_field(world: GridWorld, theta: GpHyperparams, seed: int,
                    units: str = "") -> GroundTruthField:
    """One draw from the zero-noise GP prior over X#."""
    pts = world.measure_points
    K = kernel_matrix(pts, pts, theta)
    L, _ = _jittered_cholesky(K, theta.signal_variance)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(len(pts))
    return GroundTruthField(world, theta.prior_mean + L @ z, units)


def write_raster(path, fld: GroundTruthField) -> None:
    dims = fld.world.measure_dims
    vals = fld.values.reshape(dims)
    lines = [RASTER_MAGIC,
             "dims " + " ".join(str(d) for d in dims),
             "units " + fld.units]
    rows = vals.reshape(-1, dims[-1])
    lines += [" ".join(repr(float(v)) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def load_raster(path, world: GridWorld) -> GroundTruthField:
    """Plain-text raster: magic line, ``dims``, ``units``, row-major payload."""
    lines = Path(path).read_text().splitlines()
    if len(lines) < 3 or lines[0].strip() != RASTER_MAGIC:
        raise RasterFormatError(f"{path}: missing raster header")
    if not lines[1].startswith("dims "):
        raise RasterFormatError(f"{path}: expected 'dims' line")
    if not lines[2].startswith("units"):
        raise RasterFormatError(f"{path}: expected 'units' line")
    try:
        dims = tuple(int(t) for t in lines[1].split()[1:])
        payload = [float(t) for line in lines[3:] for t in line.split()]
    except ValueError as e:
        raise RasterFormatError(f"{path}: {e}") from None
    units = lines[2][len("units"):].strip()
    if len(payload) != int(np.prod(dims)):
        raise RasterFormatError(
            f"{path}: header dims {dims} need {int(np.prod(dims))} values, "
            f"found {len(payload)}")
    if dims != world.measure_dims:
        raise ValueError(f"raster dims {dims} != world measurable dims "
                         f"{world.measure_dims}")
    vals = np.array(payload)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{path}: non-finite raster entries")
    return GroundTruthField(world, vals, units)


def camera_footprint(world: GridWorld, position, footprint) -> np.ndarray:
    """X# indices seen from plan point ``position``, clipped to bounds."""
    center = world.plan_cell(position)
    fp = tuple(footprint) + (1,) * (world.ndim - len(footprint))
    ranges = []
    for c, w, n in zip(center, fp, world.measure_dims):
        lo = c - w // 2
        ranges.append(np.arange(max(lo, 0), min(lo + w, n)))
    grids = np.meshgrid(*ranges, indexing="ij")
    return np.ravel_multi_index(tuple(g.reshape(-1) for g in grids),
                                world.measure_dims)


def traverse_samples(world: GridWorld, start, end, samples: int) -> np.ndarray:
    """``samples`` evenly spaced points from ``start`` to ``end`` snapped to X#."""
    a = np.array(world.plan_cell(start), dtype=float)
    b = np.array(world.plan_cell(end), dtype=float)
    t = np.linspace(0.0, 1.0, samples) if samples > 1 else np.array([1.0])
    cells = np.floor(a + t[:, None] * (b - a) + 0.5).astype(int)
    return np.ravel_multi_index(tuple(cells.T), world.measure_dims)


def sensed_indices(world: GridWorld, sensor: SensorModel, start, end) -> np.ndarray:
    """X# indices read while moving from plan point ``start`` to ``end``."""
    if sensor.kind == "camera":
        return camera_footprint(world, end, sensor.footprint)
    return traverse_samples(world, start, end, sensor.samples)


def measure(fld: GroundTruthField, sensor: SensorModel, from_state: RobotState,
            action: Action | None = None):
    """Noise-free reads for ``action`` taken from ``from_state``.

    With ``action=None`` the camera images the current pose; a point sensor
    then reads the single X# point under the robot.
    """
    world = fld.world
    if not world.contains(from_state.position):
        raise ValueError(f"invalid pose {from_state.position}")
    end = list(from_state.position)
    if action is not None:
        end[action.axis] += action.direction
        if not world.contains(end):
            raise RejectedActionError(f"{action} leaves the grid from {from_state.position}")
    idx = sensed_indices(world, sensor, from_state.position, end)
    return world.measure_points[idx], fld.values[idx]


def seed_measurements(fld: GroundTruthField, count: int) -> SurveyHistory:
    """``count`` distinct X# points evenly spaced in lattice order."""
    n = fld.world.n_measure
    if count > n:
        raise ValueError(f"cannot seed {count} points on {n} measurable locations")
    hist = SurveyHistory()
    if count <= 0:
        return hist
    idx = np.unique(np.round(np.linspace(0, n - 1, count)).astype(int))
    hist.record(idx, fld.world.measure_points[idx], fld.values[idx])
    hist.n_seed = len(idx)
    return hist
