"""Exact Gaussian-process belief with a squared exponential kernel.

Two belief types share the duck-typed interface used by the objectives and
the planner (``predict``, ``predict_mean``, ``hypothetical_update``):

* :class:`GpModel` works on continuous coordinates.
* :class:`LatticeBelief` is the posterior of a :class:`GpModel` restricted to
  a fixed finite point set (the measurable lattice). Conditioning it on
  lattice points is exact, since a GP restricted to finitely many inputs is a
  multivariate normal. Locations are lattice indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

JITTER_LADDER = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


class ConditioningError(LinAlgError):
    """Gram matrix stayed singular after the full jitter ladder."""


@dataclass(frozen=True)
class GpHyperparams:
    lengthscale: float = 12.0
    signal_variance: float = 1.0
    noise_variance: float = 1e-4
    prior_mean: float = 0.0

    def __post_init__(self):
        if not self.lengthscale > 0:
            raise ValueError("lengthscale must be > 0")
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be > 0")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be >= 0")


def kernel(a, b, theta: GpHyperparams) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d2 = float(np.sum((a - b) ** 2))
    return theta.signal_variance * np.exp(-d2 / (2.0 * theta.lengthscale ** 2))


def kernel_matrix(A, B, theta: GpHyperparams) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    d2 = (np.sum(A ** 2, 1)[:, None] + np.sum(B ** 2, 1)[None, :]
          - 2.0 * A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return theta.signal_variance * np.exp(-d2 / (2.0 * theta.lengthscale ** 2))


def _jittered_cholesky(K: np.ndarray, scale: float, start: float = 0.0):
    """Lower Cholesky factor of ``K``, escalating diagonal jitter on failure.

    Returns ``(L, jitter)``; jitter is relative to ``scale``.
    """
    for j in JITTER_LADDER:
        if j < start:
            continue
        try:
            Kj = K + (j * scale) * np.eye(len(K)) if j else K
            return cholesky(Kj, lower=True, check_finite=False), j
        except LinAlgError:
            continue
    raise ConditioningError("Gram matrix is not positive definite after jitter 1e-4")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class GpModel:
    """Exact GP posterior; immutable once built. Use :func:`condition`."""

    def __init__(self, hyperparams: GpHyperparams, X, Y, L, jitter: float):
        self.hyperparams = hyperparams
        self.X = _frozen(np.asarray(X, dtype=float))
        self.Y = _frozen(np.asarray(Y, dtype=float))
        self.L = None if L is None else _frozen(L)
        self.jitter = jitter
        if len(self.X):
            r = self.Y - hyperparams.prior_mean
            w = solve_triangular(self.L, r, lower=True, check_finite=False)
            self.alpha = _frozen(solve_triangular(
                self.L.T, w, lower=False, check_finite=False))
        else:
            self.alpha = np.zeros(0)

    def __len__(self):
        return len(self.X)

    @property
    def ndim(self) -> int | None:
        return self.X.shape[1] if self.X.ndim == 2 and len(self.X) else None

    def predict_mean(self, Xs) -> np.ndarray:
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        m = self.hyperparams.prior_mean
        if not len(self.X):
            return np.full(len(Xs), m)
        return m + kernel_matrix(Xs, self.X, self.hyperparams) @ self.alpha

    def predict(self, Xs) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and latent variance at ``Xs``."""
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        hp = self.hyperparams
        if not len(self.X):
            return np.full(len(Xs), hp.prior_mean), np.full(len(Xs), hp.signal_variance)
        Ks = kernel_matrix(Xs, self.X, hp)
        mu = hp.prior_mean + Ks @ self.alpha
        V = solve_triangular(self.L, Ks.T, lower=True, check_finite=False)
        var = hp.signal_variance - np.sum(V * V, axis=0)
        return mu, np.clip(var, 0.0, hp.signal_variance)

    def updated(self, Xn, Yn) -> GpModel:
        """Condition on extra observations by extending the Cholesky factor."""
        Xn = np.atleast_2d(np.asarray(Xn, dtype=float))
        Yn = np.asarray(Yn, dtype=float).reshape(-1)
        if len(Xn) != len(Yn):
            raise ValueError("locations and values must align")
        if not np.all(np.isfinite(Yn)):
            raise ValueError("values must be finite")
        if not len(self.X):
            return condition(Xn, Yn, self.hyperparams)
        hp = self.hyperparams
        K12 = kernel_matrix(self.X, Xn, hp)
        K22 = kernel_matrix(Xn, Xn, hp) + hp.noise_variance * np.eye(len(Xn))
        L21 = solve_triangular(self.L, K12, lower=True, check_finite=False).T
        S = K22 - L21 @ L21.T
        L22, jitter = _jittered_cholesky(S, hp.signal_variance, start=self.jitter)
        n, m = len(self.X), len(Xn)
        L = np.zeros((n + m, n + m))
        L[:n, :n] = self.L
        L[n:, :n] = L21
        L[n:, n:] = L22
        return GpModel(hp, np.vstack([self.X, Xn]), np.concatenate([self.Y, Yn]),
                       L, max(jitter, self.jitter))

    def hypothetical_update(self, Xi) -> GpModel:
        """GP_i with the unseen values filled in by this model's mean."""
        Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
        if not len(Xi):
            raise ValueError("hypothetical update needs at least one location")
        mu, var = self.predict(Xi)
        hp = self.hyperparams
        if hp.noise_variance == 0.0 and len(self.X):
            # Noise-free and already pinned down: observing the mean there is
            # certain, so conditioning on it is the identity.
            _, first = np.unique(Xi, axis=0, return_index=True)
            keep = np.zeros(len(Xi), bool)
            keep[first] = True
            keep &= var > 10.0 * max(self.jitter, 1e-12 * hp.signal_variance)
            if not keep.any():
                return self
            Xi, mu = Xi[keep], mu[keep]
        return self.updated(Xi, mu)


def condition(X, Y, theta: GpHyperparams) -> GpModel:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if X.size == 0:
        return GpModel(theta, np.zeros((0, 0)), np.zeros(0), None, 0.0)
    X = np.atleast_2d(X)
    if len(X) != len(Y):
        raise ValueError(f"{len(X)} locations but {len(Y)} values")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("training data must be finite")
    K = kernel_matrix(X, X, theta) + theta.noise_variance * np.eye(len(X))
    L, jitter = _jittered_cholesky(K, theta.signal_variance)
    return GpModel(theta, X, Y, L, jitter)


def predict(model: GpModel, Xs) -> tuple[np.ndarray, np.ndarray]:
    return model.predict(Xs)


def hypothetical_update(model, Xi):
    return model.hypothetical_update(Xi)


class LatticeBelief:
    """Posterior over a finite point set, cheaply extendable by hypotheticals.

    The root holds the posterior mean ``mean0`` and covariance ``cov0`` over
    all lattice points. Each child stores only what it adds: the observed
    indices ``j``, the stacked whitened cross-covariance ``S`` of all earlier
    observations at ``j`` and the inverse Cholesky factor ``Linv`` of the
    conditional covariance there. Children that only add mean-imputed
    observations share the parent's mean array (the innovation is exactly
    zero), along with ``memo`` for statistics computed from that mean.
    """

    __slots__ = ("mean0", "cov0", "noise", "scale", "chain", "idx", "offset",
                 "j", "S", "Linv", "_mean", "memo", "_last")

    def __init__(self, mean0, cov0, noise, scale, parent=None, j=None, S=None,
                 Linv=None, mean=None, memo=None):
        self.mean0 = mean0
        self.cov0 = cov0
        self.noise = noise
        self.scale = scale
        self.j = j
        self.S = S
        self.Linv = Linv
        if parent is None:
            self.chain, self.idx, self.offset = (), np.zeros(0, dtype=int), 0
        else:
            self.chain = parent.chain + (self,)
            self.offset = len(parent.idx)
            self.idx = np.concatenate([parent.idx, j])
        self._mean = mean0 if mean is None else mean
        self.memo = {} if memo is None else memo
        self._last = None

    @classmethod
    def from_model(cls, model: GpModel, points) -> LatticeBelief:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        hp = model.hyperparams
        if len(model):
            Ks = kernel_matrix(points, model.X, hp)
            mean0 = hp.prior_mean + Ks @ model.alpha
            V = solve_triangular(model.L, Ks.T, lower=True, check_finite=False)
            cov0 = kernel_matrix(points, points, hp) - V.T @ V
        else:
            mean0 = np.full(len(points), hp.prior_mean)
            cov0 = kernel_matrix(points, points, hp)
        return cls(_frozen(mean0), _frozen(cov0), hp.noise_variance,
                   hp.signal_variance)

    def __len__(self):
        return len(self.mean0)

    @property
    def mean(self) -> np.ndarray:
        return self._mean

    def _cross(self, q: np.ndarray) -> np.ndarray:
        """Whitened cross-covariance of all observations with points ``q``.

        The posterior covariance is ``cov0[a, b] - W[:, a].T @ W[:, b]``.
        Memoised for the most recent ``q``.
        """
        key = q.tobytes()
        if self._last is not None and self._last[0] == key:
            return self._last[1]
        R = self.cov0[self.idx[:, None], q]
        W = np.empty_like(R)
        for node in self.chain:
            a, b = node.offset, node.offset + len(node.j)
            rhs = R[a:b] - node.S.T @ W[:a] if a else R[a:b]
            W[a:b] = node.Linv @ rhs
        self._last = (key, W)
        return W

    def predict_mean(self, j=None) -> np.ndarray:
        return self.mean if j is None else self.mean[np.asarray(j, dtype=int)]

    def predict(self, j) -> tuple[np.ndarray, np.ndarray]:
        j = np.atleast_1d(np.asarray(j, dtype=int))
        W = self._cross(j)
        var = np.diag(self.cov0)[j] - np.einsum("ij,ij->j", W, W)
        return self.mean[j], np.clip(var, 0.0, self.scale)

    def updated(self, j, y) -> LatticeBelief:
        j = np.atleast_1d(np.asarray(j, dtype=int))
        y = np.asarray(y, dtype=float).reshape(-1)
        S = self._cross(j)
        C = self.cov0[j[:, None], j] + self.noise * np.eye(len(j)) - S.T @ S
        L22, _ = _jittered_cholesky(C, self.scale)
        Linv = solve_triangular(L22, np.eye(len(j)), lower=True, check_finite=False)
        resid = y - self.mean[j]
        if resid.any():
            # Gain over all points: cov(., j) C^{-1} resid.
            W = self._cross(np.arange(len(self)))
            cov_aj = self.cov0[:, j] - W.T @ S
            mean, memo = _frozen(self.mean + cov_aj @ (Linv.T @ (Linv @ resid))), None
        else:
            mean, memo = self._mean, self.memo
        return LatticeBelief(self.mean0, self.cov0, self.noise, self.scale,
                             self, j, S, Linv, mean, memo)

    def hypothetical_update(self, j) -> LatticeBelief:
        j = np.atleast_1d(np.asarray(j, dtype=int))
        if not len(j):
            raise ValueError("hypothetical update needs at least one location")
        return self.updated(j, self.mean[j])
