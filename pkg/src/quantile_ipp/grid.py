"""Discrete planning workspace: plan points, measurable points and unit moves."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np


class RejectedActionError(ValueError):
    """An action would move the robot off the plan grid."""


class BudgetExhaustedError(RuntimeError):
    """No planning steps remain."""


@dataclass(frozen=True)
class Action:
    axis: int
    direction: int

    def __post_init__(self):
        if self.direction not in (-1, 1):
            raise ValueError(f"direction must be +1 or -1, got {self.direction}")

    def reversed(self) -> Action:
        return Action(self.axis, -self.direction)


@dataclass(frozen=True)
class RobotState:
    position: tuple[int, ...]
    steps_taken: int = 0
    budget: int = 0

    @property
    def remaining(self) -> int:
        return self.budget - self.steps_taken


@dataclass(frozen=True, eq=False)
class GridWorld:
    """Plan grid ``dims`` with a measurable lattice ``resolution`` times finer.

    Plan point ``g`` sits on measurable lattice cell ``g * resolution + margin``,
    so the measurable lattice has ``(d - 1) * resolution + 1 + 2 * margin``
    points per axis. ``margin`` pads the lattice past the plan grid (e.g. so a
    camera footprint never clips). Coordinates are measurable-lattice cells
    times ``cell_size``.
    """

    dims: tuple[int, ...]
    resolution: int = 1
    cell_size: float = 1.0
    margin: tuple[int, ...] | int = 0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        margin = self.margin
        if isinstance(margin, (int, np.integer)):
            margin = (int(margin),) * len(dims)
        margin = tuple(int(m) for m in margin) + (0,) * (len(dims) - len(margin))
        object.__setattr__(self, "margin", margin)
        if any(m < 0 for m in margin):
            raise ValueError("margin must be >= 0")
        if len(dims) not in (2, 3):
            raise ValueError("GridWorld supports 2 or 3 axes")
        if any(d < 1 for d in dims):
            raise ValueError(f"all dims must be >= 1, got {dims}")
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    def __eq__(self, other):
        if not isinstance(other, GridWorld):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def _key(self):
        return (self.dims, self.resolution, self.cell_size, self.margin)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def measure_dims(self) -> tuple[int, ...]:
        return tuple((d - 1) * self.resolution + 1 + 2 * m
                     for d, m in zip(self.dims, self.margin))

    @property
    def n_plan(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_measure(self) -> int:
        return int(np.prod(self.measure_dims))

    @cached_property
    def plan_points(self) -> np.ndarray:
        idx = np.indices(self.dims).reshape(self.ndim, -1).T
        pts = ((idx * self.resolution + np.array(self.margin)) * self.cell_size).astype(float)
        pts.flags.writeable = False
        return pts

    @cached_property
    def measure_points(self) -> np.ndarray:
        idx = np.indices(self.measure_dims).reshape(self.ndim, -1).T
        pts = (idx * self.cell_size).astype(float)
        pts.flags.writeable = False
        return pts

    @property
    def bounds(self) -> np.ndarray:
        """Axis-aligned hull of the measurable points, shape (ndim, 2)."""
        hi = (np.array(self.measure_dims) - 1) * self.cell_size
        return np.stack([np.zeros(self.ndim), hi.astype(float)], axis=1)

    def contains(self, position) -> bool:
        return len(position) == self.ndim and all(
            0 <= p < d for p, d in zip(position, self.dims))

    def plan_index(self, position) -> int:
        return int(np.ravel_multi_index(tuple(position), self.dims))

    def plan_position(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.dims))

    def measure_index(self, cell) -> int:
        return int(np.ravel_multi_index(tuple(cell), self.measure_dims))

    def measure_cell(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.measure_dims))

    def plan_cell(self, position) -> tuple[int, ...]:
        """X# lattice cell under plan point ``position``."""
        return tuple(p * self.resolution + m for p, m in zip(position, self.margin))

    def plan_to_measure(self, position) -> int:
        return self.measure_index(self.plan_cell(position))

    def nearest_measure_index(self, locations) -> np.ndarray:
        """Snap continuous coordinates to the nearest X# indices."""
        locs = np.atleast_2d(np.asarray(locations, dtype=float))
        cells = np.floor(locs / self.cell_size + 0.5).astype(int)
        cells = np.clip(cells, 0, np.array(self.measure_dims) - 1)
        return np.ravel_multi_index(tuple(cells.T), self.measure_dims)

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "resolution": self.resolution,
                "cell_size": self.cell_size, "margin": list(self.margin)}

    @classmethod
    def from_dict(cls, d: dict) -> GridWorld:
        margin = d.get("margin", 0)
        return cls(tuple(d["dims"]), int(d.get("resolution", 1)),
                   float(d.get("cell_size", 1.0)),
                   margin if isinstance(margin, int) else tuple(margin))


def neighbors(state: RobotState, world: GridWorld) -> list[Action]:
    """Axis-aligned unit moves that stay on the plan grid.

    Ordered axis-major, negative direction first, so tie-breaking downstream
    is reproducible.
    """
    out = []
    for axis in range(world.ndim):
        for direction in (-1, 1):
            p = state.position[axis] + direction
            if 0 <= p < world.dims[axis]:
                out.append(Action(axis, direction))
    return out


def apply_action(state: RobotState, action: Action, world: GridWorld) -> RobotState:
    if state.steps_taken >= state.budget:
        raise BudgetExhaustedError(
            f"budget of {state.budget} steps already used")
    pos = list(state.position)
    pos[action.axis] += action.direction
    if not world.contains(pos):
        raise RejectedActionError(f"{action} leaves the grid from {state.position}")
    return replace(state, position=tuple(pos), steps_taken=state.steps_taken + 1)
