"""Sample quantiles, Gaussian KDE and the quantile standard error."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SQRT_2PI = np.sqrt(2.0 * np.pi)
DENSITY_FLOOR = 1e-12

FAMILIES = {
    "deciles": (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
    "quartiles": (0.25, 0.5, 0.75),
    "extrema": (0.9, 0.95, 0.99),
}


class DegenerateSampleError(ValueError):
    """Too few distinct values to estimate a density."""


@dataclass(frozen=True)
class QuantileSpec:
    fractions: tuple[float, ...]

    def __post_init__(self):
        fr = tuple(float(q) for q in self.fractions)
        object.__setattr__(self, "fractions", fr)
        if not fr:
            raise ValueError("at least one quantile fraction is required")
        if any(not 0.0 < q < 1.0 for q in fr):
            raise ValueError(f"fractions must lie in (0, 1): {fr}")
        if any(b <= a for a, b in zip(fr, fr[1:])):
            raise ValueError(f"fractions must be strictly increasing: {fr}")

    @classmethod
    def family(cls, name: str) -> QuantileSpec:
        try:
            return cls(FAMILIES[name])
        except KeyError:
            raise ValueError(f"unknown quantile family {name!r}") from None

    def __len__(self):
        return len(self.fractions)


@dataclass(frozen=True)
class QuantileEstimate:
    spec: QuantileSpec
    values: np.ndarray
    standard_errors: np.ndarray | None = field(default=None)
    n: int = 0


def _fractions(spec) -> np.ndarray:
    if isinstance(spec, QuantileSpec):
        return np.asarray(spec.fractions)
    return np.asarray(spec, dtype=float)


def _check(values) -> np.ndarray:
    x = np.asarray(values, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("cannot take quantiles of an empty sample")
    if np.isnan(x).any():
        raise ValueError("sample contains NaN")
    return x


def quantile_values(values, spec) -> np.ndarray:
    """Linear interpolation between 1-indexed order statistics.

    ``h = (n - 1) q + 1``; the estimate is
    ``x[floor h] + (h - floor h) * (x[ceil h] - x[floor h])``.
    """
    x = np.sort(_check(values))
    q = _fractions(spec)
    h = (len(x) - 1) * q + 1
    lo = np.floor(h)
    hi = np.ceil(h)
    xlo = x[lo.astype(int) - 1]
    xhi = x[hi.astype(int) - 1]
    return xlo + (h - lo) * (xhi - xlo)


def estimate_quantiles(values, spec: QuantileSpec) -> QuantileEstimate:
    x = _check(values)
    return QuantileEstimate(spec, quantile_values(x, spec), None, len(x))


def kde_bandwidth(x: np.ndarray) -> float:
    """Scott's rule, floored at 1e-6 of the sample range."""
    n = len(x)
    b = n ** -0.2 * np.std(x, ddof=1)
    return max(b, 1e-6 * (x.max() - x.min()))


def kde_density(values, at) -> np.ndarray | float:
    x = _check(values)
    if len(np.unique(x)) < 2:
        raise DegenerateSampleError("kernel density needs >= 2 distinct values")
    b = kde_bandwidth(x)
    at_arr = np.asarray(at, dtype=float)
    z = (at_arr.reshape(-1, 1) - x[None, :]) / b
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (len(x) * b * SQRT_2PI)
    return float(dens[0]) if at_arr.ndim == 0 else dens.reshape(at_arr.shape)


def quantile_standard_error(values, spec, density=None) -> np.ndarray:
    """``sqrt(q (1 - q)) / (sqrt(n) p(v_q))`` with ``p`` a Gaussian KDE.

    ``density`` overrides the KDE (a callable ``values, at -> density``).
    """
    x = _check(values)
    q = _fractions(spec)
    v = quantile_values(x, q)
    p = (density or kde_density)(x, v)
    p = np.maximum(np.asarray(p, dtype=float), DENSITY_FLOOR)
    return np.sqrt(q * (1.0 - q)) / (np.sqrt(len(x)) * p)


def estimate_with_errors(values, spec: QuantileSpec) -> QuantileEstimate:
    x = _check(values)
    return QuantileEstimate(spec, quantile_values(x, spec),
                            quantile_standard_error(x, spec), len(x))
