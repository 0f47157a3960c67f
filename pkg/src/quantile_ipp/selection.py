"""Post-survey specimen-location selection.

Every method minimises

    loss(V~, Q) = || V~ - mu(Q) ||_2 + c_select * sum(var(Q))

over one continuous location per quantile fraction, inside the axis-aligned
hull of the measurable lattice. The stochastic optimisers work on flat
vectors of length ``|Q| * d`` and take a batched loss, so they are reusable on
any box-constrained problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .gp import GpHyperparams, condition

DEFAULT_C_SELECT = {"deciles": 15.0, "quartiles": 200.0, "extrema": 30.0}

BatchLoss = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AnnealingConfig:
    t_max: float = 5.0
    t_min: float = 0.001
    cooling_rate: float = 0.005
    reset_interval: int = 100
    step_fraction: float = 0.05

    def __post_init__(self):
        if not self.t_max > self.t_min > 0:
            raise ValueError("need t_max > t_min > 0")
        if not 0 < self.cooling_rate < 1:
            raise ValueError("cooling_rate must be in (0, 1)")


@dataclass(frozen=True)
class CrossEntropyConfig:
    alpha: float = 0.9
    elite_fraction: float = 0.9
    samples_per_iter: int = 50
    iterations: int = 100
    init_std_fraction: float = 0.25

    def __post_init__(self):
        if not 0 < self.elite_fraction <= 1:
            raise ValueError("elite_fraction must be in (0, 1]")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")


@dataclass(frozen=True)
class BayesOptConfig:
    init_random_count: int = 50
    iterations: int = 100
    candidates: int = 2000
    xi: float = 0.01


@dataclass(frozen=True)
class SelectionConfig:
    method: str = "ce"
    c_select: float = 15.0
    sa: AnnealingConfig = field(default_factory=AnnealingConfig)
    ce: CrossEntropyConfig = field(default_factory=CrossEntropyConfig)
    bo: BayesOptConfig = field(default_factory=BayesOptConfig)
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown selection method {self.method!r}")
        if self.c_select < 0:
            raise ValueError("c_select must be >= 0")


@dataclass
class SelectionResult:
    locations: np.ndarray            # (|Q|, d)
    predicted: np.ndarray            # posterior mean at the locations
    loss: float
    method: str
    evaluations: int


@dataclass
class OptimResult:
    x: np.ndarray
    loss: float
    evaluations: int
    history: list = field(default_factory=list)


def selection_loss(targets, candidate, gp, c_select: float) -> float:
    """Value mismatch norm plus ``c_select`` times summed posterior variance."""
    candidate = np.atleast_2d(np.asarray(candidate, dtype=float))
    targets = np.asarray(targets, dtype=float)
    if len(candidate) != len(targets):
        raise ValueError("one candidate location per target value is required")
    mu, var = gp.predict(candidate)
    return float(np.linalg.norm(targets - mu) + c_select * np.sum(var))


def batch_selection_loss(targets, gp, c_select: float, ndim: int) -> BatchLoss:
    targets = np.asarray(targets, dtype=float)
    k = len(targets)

    def loss(X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        mu, var = gp.predict(X.reshape(-1, ndim))
        mu = mu.reshape(len(X), k)
        var = var.reshape(len(X), k)
        return np.linalg.norm(targets[None, :] - mu, axis=1) + c_select * var.sum(1)

    return loss


def _box(bounds, k: int) -> tuple[np.ndarray, np.ndarray]:
    b = np.asarray(bounds, dtype=float)
    return np.tile(b[:, 0], k), np.tile(b[:, 1], k)


def best_visited(locations, targets, gp) -> SelectionResult:
    """Per target, the measured location whose posterior mean is nearest.

    Ties go to the earliest measurement; one location may serve several
    targets.
    """
    locs = np.atleast_2d(np.asarray(locations, dtype=float))
    if not len(locs):
        raise ValueError("best-visited selection needs a nonempty history")
    targets = np.asarray(targets, dtype=float)
    mu = gp.predict_mean(locs)
    pick = np.argmin(np.abs(mu[None, :] - targets[:, None]), axis=1)
    chosen = locs[pick]
    return SelectionResult(chosen, mu[pick], float(np.linalg.norm(targets - mu[pick])),
                           "bv", len(locs))


# --- generic box-constrained optimisers -----------------------------------

def anneal(loss: BatchLoss, x0, lower, upper, config: AnnealingConfig,
           rng: np.random.Generator, block: int = 1) -> OptimResult:
    """Simulated annealing with exponential cooling and periodic resets.

    Each step perturbs one randomly chosen block of ``block`` coordinates with
    Gaussian noise whose scale shrinks linearly from ``step_fraction`` of the
    box extent at ``t_max`` to half that at ``t_min``.
    """
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    extent = upper - lower
    cur = np.clip(np.asarray(x0, float), lower, upper)
    cur_e = float(loss(cur[None])[0])
    best, best_e = cur.copy(), cur_e
    n_blocks = len(cur) // block
    t = config.t_max
    evals = 1
    step = 0
    while t >= config.t_min:
        frac = (t - config.t_min) / (config.t_max - config.t_min)
        scale = config.step_fraction * extent * (0.5 + 0.5 * frac)
        j = int(rng.integers(n_blocks))
        sl = slice(j * block, (j + 1) * block)
        cand = cur.copy()
        cand[sl] += rng.standard_normal(block) * scale[sl]
        np.clip(cand, lower, upper, out=cand)
        e = float(loss(cand[None])[0])
        evals += 1
        de = e - cur_e
        if de <= 0 or rng.random() < np.exp(-de / t):
            cur, cur_e = cand, e
        if cur_e < best_e:
            best, best_e = cur.copy(), cur_e
        step += 1
        if config.reset_interval and step % config.reset_interval == 0:
            cur, cur_e = best.copy(), best_e
        t *= 1.0 - config.cooling_rate
    return OptimResult(best, best_e, evals)


def cross_entropy(loss: BatchLoss, mean0, lower, upper, config: CrossEntropyConfig,
                  rng: np.random.Generator, track_init: bool = True) -> OptimResult:
    """Diagonal-Gaussian cross-entropy method with smoothing and best-ever tracking.

    ``alpha`` weights the refit from the elites against the previous
    parameters.
    """
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    mu = np.clip(np.asarray(mean0, float), lower, upper)
    sigma = config.init_std_fraction * (upper - lower)
    n_elite = max(1, int(np.ceil(config.elite_fraction * config.samples_per_iter)))
    best, best_e, evals = mu.copy(), np.inf, 0
    if track_init:
        best_e = float(loss(mu[None])[0])
        evals = 1
    sig_hist = []
    for _ in range(config.iterations):
        X = mu + rng.standard_normal((config.samples_per_iter, len(mu))) * sigma
        np.clip(X, lower, upper, out=X)
        E = loss(X)
        evals += len(X)
        order = np.argsort(E, kind="stable")
        if E[order[0]] < best_e:
            best, best_e = X[order[0]].copy(), float(E[order[0]])
        elite = X[order[:n_elite]]
        mu = config.alpha * elite.mean(0) + (1 - config.alpha) * mu
        sigma = config.alpha * elite.std(0) + (1 - config.alpha) * sigma
        sig_hist.append(sigma.copy())
    return OptimResult(best, best_e, evals, sig_hist)


def _fit_surrogate(X, y, lower, upper):
    """GP on unit-box inputs with the lengthscale picked by marginal likelihood."""
    span = np.where(upper > lower, upper - lower, 1.0)
    U = (X - lower) / span
    m, s = float(np.mean(y)), float(np.std(y)) or 1.0
    z = (y - m) / s
    best = None
    for ls in (0.05, 0.1, 0.2, 0.35, 0.5, 1.0):
        theta = GpHyperparams(lengthscale=ls * np.sqrt(X.shape[1]),
                              signal_variance=1.0, noise_variance=1e-6)
        gp = condition(U, z, theta)
        nll = 0.5 * z @ gp.alpha + np.sum(np.log(np.diag(gp.L)))
        if best is None or nll < best[0]:
            best = (nll, gp)
    return best[1], span, m, s


def bayes_opt(loss: BatchLoss, lower, upper, config: BayesOptConfig,
              rng: np.random.Generator, init=None) -> OptimResult:
    """EI-driven Bayesian optimisation; ``init`` points are evaluated first."""
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    d = len(lower)
    X = lower + rng.random((config.init_random_count, d)) * (upper - lower)
    if init is not None:
        X = np.vstack([X, np.atleast_2d(init)])
    y = loss(X)
    evals = len(X)
    for _ in range(config.iterations):
        try:
            gp, span, m, s = _fit_surrogate(X, y, lower, upper)
        except np.linalg.LinAlgError:
            break
        i_best = int(np.argmin(y))
        # Candidates: uniform in the box plus local moves around the incumbent.
        n_local = config.candidates // 2
        local = X[i_best] + rng.standard_normal((n_local, d)) * 0.05 * (upper - lower)
        cand = np.vstack([lower + rng.random((config.candidates - n_local, d)) * (upper - lower),
                          np.clip(local, lower, upper)])
        mu, var = gp.predict((cand - lower) / span)
        sd = np.sqrt(np.maximum(var, 1e-18))
        f_best = (y[i_best] - m) / s
        imp = f_best - mu - config.xi
        z = imp / sd
        ei = imp * ndtr(z) + sd * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
        x_new = cand[int(np.argmax(ei))]
        X = np.vstack([X, x_new])
        y = np.append(y, loss(x_new[None])[0])
        evals += 1
    i = int(np.argmin(y))
    return OptimResult(X[i].copy(), float(y[i]), evals)


# --- selection wrappers ----------------------------------------------------

def _finish(x, targets, gp, c_select, ndim, method, evals, start) -> SelectionResult:
    """Package ``x``, falling back to ``start`` unless ``x`` is at least as good.

    Optimisers score candidates in batches; re-scoring both here with the same
    call keeps the comparison with the starting point exact.
    """
    locs = x.reshape(len(targets), ndim)
    loss = selection_loss(targets, locs, gp, c_select)
    if start is not None:
        start_loss = selection_loss(targets, start, gp, c_select)
        if start_loss < loss:
            locs, loss = start, start_loss
    return SelectionResult(locs, gp.predict_mean(locs), loss, method, evals)


def _bv_start(targets, gp, locations):
    bv = best_visited(locations, targets, gp)
    return bv.locations.reshape(-1), bv


def simulated_annealing_select(targets, gp, config: SelectionConfig, bounds,
                               locations) -> SelectionResult:
    """SA started at the Best Visited solution."""
    ndim = len(bounds)
    x0, bv = _bv_start(targets, gp, locations)
    lo, hi = _box(bounds, len(targets))
    rng = np.random.default_rng(config.seed)
    res = anneal(batch_selection_loss(targets, gp, config.c_select, ndim),
                 x0, lo, hi, config.sa, rng, block=ndim)
    return _finish(res.x, targets, gp, config.c_select, ndim, "sa", res.evaluations,
                   bv.locations)


def cross_entropy_select(targets, gp, config: SelectionConfig, bounds,
                         locations) -> SelectionResult:
    """CE centred on the Best Visited solution, best-ever tracked from it."""
    ndim = len(bounds)
    x0, bv = _bv_start(targets, gp, locations)
    lo, hi = _box(bounds, len(targets))
    rng = np.random.default_rng(config.seed)
    res = cross_entropy(batch_selection_loss(targets, gp, config.c_select, ndim),
                        x0, lo, hi, config.ce, rng)
    return _finish(res.x, targets, gp, config.c_select, ndim, "ce", res.evaluations,
                   bv.locations)


def bayesian_opt_select(targets, gp, config: SelectionConfig, bounds,
                        locations) -> SelectionResult:
    """BO from ``init_random_count`` random configurations plus Best Visited."""
    ndim = len(bounds)
    x0, bv = _bv_start(targets, gp, locations)
    lo, hi = _box(bounds, len(targets))
    rng = np.random.default_rng(config.seed)
    res = bayes_opt(batch_selection_loss(targets, gp, config.c_select, ndim),
                    lo, hi, config.bo, rng, init=x0)
    return _finish(res.x, targets, gp, config.c_select, ndim, "bo", res.evaluations,
                   bv.locations)


def best_visited_select(targets, gp, config: SelectionConfig, bounds,
                        locations) -> SelectionResult:
    bv = best_visited(locations, targets, gp)
    return SelectionResult(bv.locations, bv.predicted,
                           selection_loss(targets, bv.locations, gp, config.c_select),
                           "bv", bv.evaluations)


METHODS = {
    "bv": best_visited_select,
    "sa": simulated_annealing_select,
    "ce": cross_entropy_select,
    "bo": bayesian_opt_select,
}


def select(targets, gp, config: SelectionConfig, bounds, locations) -> SelectionResult:
    return METHODS[config.method](targets, gp, config, bounds, locations)
