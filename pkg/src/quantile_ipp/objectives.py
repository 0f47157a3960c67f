"""Planning rewards for a candidate measurement set.

Quantile objectives score ``delta / |Q| + c_plan * sum(var_prev)``, where
``delta`` compares quantile statistics of the posterior mean over every
measurable point before and after a hypothetical update (unseen values are
filled with the current posterior mean). The entropy and expected-improvement
baselines are plain sums over the candidate points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .quantiles import QuantileSpec, quantile_standard_error, quantile_values

QUANTILE_KINDS = ("quantile_change", "quantile_se")
KINDS = QUANTILE_KINDS + ("entropy", "expected_improvement")

DEFAULT_C_PLAN = {"quantile_change": 1e-6, "quantile_se": 1e-2}

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str = "quantile_se"
    spec: QuantileSpec | None = None
    c_plan: float | None = None
    xi: float = 0.01
    ei_denominator: str = "variance"
    # Fraction of X# used for the quantile statistics; None uses all of it.
    subsample: float | None = None
    subsample_seed: int = 0
    _subset: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective {self.kind!r}")
        if self.c_plan is None:
            object.__setattr__(self, "c_plan", DEFAULT_C_PLAN.get(self.kind, 0.0))
        if self.c_plan < 0:
            raise ValueError("c_plan must be >= 0")
        if self.xi < 0:
            raise ValueError("xi must be >= 0")
        if self.kind in QUANTILE_KINDS and self.spec is None:
            raise ValueError(f"{self.kind} needs a quantile spec")
        if self.ei_denominator not in ("variance", "stddev"):
            raise ValueError("ei_denominator must be 'variance' or 'stddev'")
        if self.subsample is not None and not 0 < self.subsample <= 1:
            raise ValueError("subsample must be in (0, 1]")


def _fractions(spec):
    return spec.fractions if isinstance(spec, QuantileSpec) else tuple(spec)


def _mean_stat(gp, x_all, spec, stat: str) -> np.ndarray:
    """Quantile values or standard errors of the posterior mean over ``x_all``.

    Memoised on beliefs that carry a ``memo`` dict (lattice beliefs share it
    while their mean is unchanged).
    """
    memo = getattr(gp, "memo", None)
    key = None
    if memo is not None:
        key = (stat, _fractions(spec), None if x_all is None else x_all.tobytes())
        if key in memo:
            return memo[key]
    mu = gp.predict_mean(x_all)
    if stat == "value":
        out = quantile_values(mu, spec)
    else:
        out = quantile_standard_error(mu, spec)
    if key is not None:
        memo[key] = out
    return out


def delta_quantile_change(gp_prev, gp_next, x_all, spec) -> float:
    a = _mean_stat(gp_prev, x_all, spec, "value")
    b = _mean_stat(gp_next, x_all, spec, "value")
    return float(np.sum(np.abs(a - b)))


def delta_quantile_se(gp_prev, gp_next, x_all, spec) -> float:
    a = _mean_stat(gp_prev, x_all, spec, "se")
    b = _mean_stat(gp_next, x_all, spec, "se")
    return float(np.sum(np.abs(a - b)))


def entropy_terms(var, noise_variance: float) -> np.ndarray:
    var = np.maximum(np.asarray(var, dtype=float), noise_variance + 1e-12)
    return 0.5 * np.log(2.0 * np.pi * np.e * var)


def entropy_reward(gp, x_new) -> float:
    _, var = gp.predict(x_new)
    return float(np.sum(entropy_terms(var, _noise(gp))))


def ei_terms(mu, var, best: float, xi: float, denominator: str = "variance"):
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    improvement = mu - best - xi
    sd = np.sqrt(var)
    out = np.maximum(improvement, 0.0)
    ok = var > 0
    if ok.any():
        denom = var[ok] if denominator == "variance" else sd[ok]
        z = improvement[ok] / denom
        out[ok] = (improvement[ok] * ndtr(z)
                   + sd[ok] * _INV_SQRT_2PI * np.exp(-0.5 * z * z))
    return out


def ei_reward(gp, x_new, x_all, xi: float, denominator: str = "variance") -> float:
    mu, var = gp.predict(x_new)
    best = float(np.max(gp.predict_mean(x_all)))
    return float(np.sum(ei_terms(mu, var, best, xi, denominator)))


def _noise(gp) -> float:
    hp = getattr(gp, "hyperparams", None)
    return hp.noise_variance if hp is not None else gp.noise


def _stat_points(config: ObjectiveConfig, x_all, n_all: int):
    if config.subsample is None:
        return x_all
    key = (n_all,)
    if key not in config._subset:
        rng = np.random.default_rng(config.subsample_seed)
        k = max(2, int(round(config.subsample * n_all)))
        config._subset[key] = np.sort(rng.choice(n_all, size=min(k, n_all), replace=False))
    sel = config._subset[key]
    return sel if x_all is None else np.asarray(x_all)[sel]


def evaluate(config: ObjectiveConfig, gp_prev, x_new, x_all=None):
    """Reward of measuring ``x_new`` and the hypothetically updated belief.

    ``x_all`` is the measurable set: coordinates for a :class:`GpModel`, or
    ``None`` (all points) for a lattice belief.
    """
    if len(x_new) == 0:
        raise ValueError("reward needs a nonempty candidate set")
    _, var_prev = gp_prev.predict(x_new)
    gp_next = gp_prev.hypothetical_update(x_new)
    kind = config.kind
    if kind in QUANTILE_KINDS:
        n_all = len(gp_prev) if x_all is None else len(x_all)
        pts = _stat_points(config, x_all, n_all)
        delta_fn = delta_quantile_change if kind == "quantile_change" else delta_quantile_se
        delta = delta_fn(gp_prev, gp_next, pts, config.spec)
        value = delta / len(_fractions(config.spec)) + config.c_plan * float(np.sum(var_prev))
    elif kind == "entropy":
        value = float(np.sum(entropy_terms(var_prev, _noise(gp_prev))))
    else:
        mu_prev = gp_prev.predict_mean(x_new)
        best = float(np.max(gp_prev.predict_mean(x_all)))
        value = float(np.sum(ei_terms(mu_prev, var_prev, best, config.xi,
                                      config.ei_denominator)))
    return value, gp_next


def reward(config: ObjectiveConfig, gp_prev, x_new, x_all=None) -> float:
    return evaluate(config, gp_prev, x_new, x_all)[0]
