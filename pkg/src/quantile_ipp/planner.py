"""POMCP action selection over the GP belief, plus non-adaptive baselines.

Simulated observations are the belief's own posterior mean, so a node's
belief and reward depend only on its action history. The tree is keyed by
actions and each node's reward and belief are computed once, on expansion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import stats

from .grid import Action, GridWorld, RobotState, neighbors


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    rollouts_per_step: int = 300
    max_depth: int = 7
    rollout_horizon: int = 5
    gamma: float = 0.9
    ucb_c: float = 1.0
    multi_step: bool = True
    significance: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.rollouts_per_step < 1:
            raise ValueError("rollouts_per_step must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.rollout_horizon < 0:
            raise ValueError("rollout_horizon must be >= 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.ucb_c < 0:
            raise ValueError("ucb_c must be >= 0")


class Problem(Protocol):
    """What the search needs from the IPP model."""

    world: GridWorld

    def step(self, belief, state: RobotState, action: Action):
        """Return ``(reward, next_belief, next_state)``."""


class SearchNode:
    __slots__ = ("state", "belief", "reward", "returns", "total", "children", "actions", "key")

    def __init__(self, state, belief, reward=0.0, key=()):
        self.state = state
        self.belief = belief
        self.reward = reward
        self.returns: list[float] = []
        self.total = 0.0
        self.children: dict[Action, SearchNode] = {}
        self.actions: list[Action] | None = None
        self.key = key

    @property
    def visits(self) -> int:
        return len(self.returns)

    @property
    def value(self) -> float:
        return self.total / len(self.returns) if self.returns else 0.0

    def add(self, g: float) -> None:
        self.returns.append(g)
        self.total += g

    def ranked_children(self) -> list[tuple[Action, SearchNode]]:
        """Visited children, best first: value, then visits, then action order."""
        order = {a: i for i, a in enumerate(self.actions or [])}
        kids = [(a, c) for a, c in self.children.items() if c.visits]
        kids.sort(key=lambda ac: (-ac[1].value, -ac[1].visits, order[ac[0]]))
        return kids


def discounted_return(rewards, gamma: float) -> float:
    g = 0.0
    for r in reversed(list(rewards)):
        g = r + gamma * g
    return g


def _ttest_pvalue(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        return 1.0
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        return 0.0 if a[0] != b[0] else 1.0
    with warnings.catch_warnings():
        # Near-identical samples trigger a precision warning; the p-value is still usable.
        warnings.simplefilter("ignore", RuntimeWarning)
        p = stats.ttest_ind(a, b, equal_var=False).pvalue
    return float(p) if np.isfinite(p) else 1.0


def commit_steps(root: SearchNode, significance: float = 0.05) -> int:
    """Length of the best-child chain whose choices are statistically settled.

    The best root action is always taken. The chain continues into the best
    child while, at the node just committed from, the best child's return
    samples beat the runner-up's under Welch's t-test with ``p < significance``.
    """
    node = root
    count = 0
    while True:
        ranked = node.ranked_children()
        if not ranked:
            break
        count += 1
        if len(ranked) < 2:
            break
        (_, best), (_, second) = ranked[0], ranked[1]
        if best.value <= second.value:
            break
        if _ttest_pvalue(best.returns, second.returns) >= significance:
            break
        node = best
    return max(count, 1)


def best_chain(root: SearchNode, length: int) -> list[Action]:
    out = []
    node = root
    for _ in range(length):
        ranked = node.ranked_children()
        if not ranked:
            break
        action, node = ranked[0]
        out.append(action)
    return out


class Pomcp:
    def __init__(self, problem: Problem, config: PlannerConfig,
                 rng: np.random.Generator | None = None):
        self.problem = problem
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.root: SearchNode | None = None

    def _legal(self, node: SearchNode) -> list[Action]:
        if node.actions is None:
            if node.state.remaining <= 0:
                node.actions = []
            else:
                node.actions = neighbors(node.state, self.problem.world)
        return node.actions

    def _expand(self, node: SearchNode, action: Action) -> SearchNode:
        r, belief, state = self.problem.step(node.belief, node.state, action)
        child = SearchNode(state, belief, r, node.key + (action,))
        node.children[action] = child
        return child

    def _select(self, node: SearchNode, c: float) -> Action:
        actions = self._legal(node)
        for a in actions:
            child = node.children.get(a)
            if child is None or not child.visits:
                return a
        log_n = math.log(node.visits)
        best, best_score = None, -math.inf
        for a in actions:
            child = node.children[a]
            score = child.value + c * math.sqrt(log_n / child.visits)
            if score > best_score:
                best, best_score = a, score
        return best

    def _rollout(self, belief, state: RobotState) -> float:
        rewards = []
        for _ in range(self.config.rollout_horizon):
            if state.remaining <= 0:
                break
            acts = neighbors(state, self.problem.world)
            a = acts[int(self.rng.integers(len(acts)))]
            r, belief, state = self.problem.step(belief, state, a)
            rewards.append(r)
        return discounted_return(rewards, self.config.gamma)

    def _exploration(self) -> float:
        rs = self.root.returns
        if len(rs) < 2:
            return 0.0
        return self.config.ucb_c * float(np.std(rs))

    def simulate(self) -> float:
        root = self.root
        path = [root]
        node = root
        depth = 0
        c = self._exploration()
        leaf_value = 0.0
        while depth < self.config.max_depth and self._legal(node):
            action = self._select(node, c)
            child = node.children.get(action)
            if child is None:
                child = self._expand(node, action)
                path.append(child)
                leaf_value = self._rollout(child.belief, child.state)
                break
            path.append(child)
            node = child
            depth += 1
        g = leaf_value
        for n in reversed(path[1:]):
            g = n.reward + self.config.gamma * g
            n.add(g)
        root.add(g)
        return g

    def search(self, belief, state: RobotState) -> SearchNode:
        self.root = SearchNode(state, belief)
        if not self._legal(self.root):
            raise PlanningError(f"no legal actions from {state}")
        for _ in range(self.config.rollouts_per_step):
            self.simulate()
        return self.root


def plan(belief, state: RobotState, problem: Problem, config: PlannerConfig,
         rng: np.random.Generator | None = None) -> list[Action]:
    """Search from ``state`` and return the root actions to execute (>= 1)."""
    if state.remaining <= 0:
        raise PlanningError("budget exhausted")
    legal = neighbors(state, problem.world)
    if not legal:
        raise PlanningError(f"no legal actions from {state}")
    if len(legal) == 1 and not config.multi_step:
        return legal
    planner = Pomcp(problem, config, rng)
    root = planner.search(belief, state)
    n = commit_steps(root, config.significance) if config.multi_step else 1
    n = min(n, state.remaining)
    return best_chain(root, n)


def coverage_plan(world: GridWorld, budget: int, start=None) -> list[Action]:
    """Boustrophedon sweep of the plan grid from a corner, truncated at ``budget``.

    The last axis is swept back and forth; the remaining axes advance in their
    own serpentine order. Every move is a legal unit step.
    """
    start = tuple(start) if start is not None else (0,) * world.ndim
    if any(s not in (0, d - 1) for s, d in zip(start, world.dims)):
        raise ValueError("coverage sweep starts from a corner")
    order = _serpentine(world.dims, start)
    actions = []
    for a, b in zip(order, order[1:]):
        diff = [j - i for i, j in zip(a, b)]
        axis = next(k for k, d in enumerate(diff) if d)
        actions.append(Action(axis, diff[axis]))
        if len(actions) >= budget:
            break
    return actions


def _serpentine(dims, start):
    """Cells in sweep order with consecutive cells one unit apart."""
    ndim = len(dims)
    flips = [s != 0 for s in start]

    def rec(axis, flip_state):
        n = dims[axis]
        seq = range(n - 1, -1, -1) if flip_state[axis] else range(n)
        if axis == ndim - 1:
            return [(i,) for i in seq], flip_state
        out = []
        for i in seq:
            sub, flip_state = rec(axis + 1, flip_state)
            out.extend((i,) + s for s in sub)
            # Deeper axes come back already set to continue from where they
            # ended; only the next axis reverses.
            flip_state = list(flip_state)
            flip_state[axis + 1] = not flip_state[axis + 1]
        return out, flip_state

    cells, _ = rec(0, list(flips))
    return cells


def random_walk_plan(state: RobotState, world: GridWorld,
                     rng: np.random.Generator) -> Action:
    acts = neighbors(state, world)
    if not acts:
        raise PlanningError(f"no legal actions from {state}")
    return acts[int(rng.integers(len(acts)))]
