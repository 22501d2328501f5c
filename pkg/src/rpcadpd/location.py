"""Robust location estimators used to center the data before the robust SVD."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_data_matrix
from .errors import ConfigError, ConvergenceError
from .rsvddpd import sigma2_step

_COINCIDE = 1e-12
_SIGMA_FLOOR = 1e-12


def coordinatewise_median(X) -> np.ndarray:
    return np.median(as_data_matrix(X), axis=0)


def l1_objective(X, m) -> float:
    """Sum of Euclidean distances from the rows of ``X`` to ``m``."""
    return float(np.linalg.norm(np.asarray(X) - m, axis=1).sum())


def l1_median(X, tol: float = 1e-8, max_iter: int = 500, *, trace: list | None = None) -> np.ndarray:
    """Geometric (L1) median by the Weiszfeld iteration with the Vardi-Zhang fix.

    Starts from the coordinatewise median.  When the iterate lands on a data
    point the singular term is dropped and the subgradient condition decides
    whether that point is already optimal.  If ``trace`` is a list, the
    objective value at every iterate is appended to it.
    """
    X = as_data_matrix(X)
    m = np.median(X, axis=0)
    if X.shape[0] == 1:
        return m
    for _ in range(max_iter):
        if trace is not None:
            trace.append(l1_objective(X, m))
        diff = X - m
        d = np.linalg.norm(diff, axis=1)
        near = d < _COINCIDE
        eta = float(near.sum())
        far = ~near
        if not far.any():
            return m
        inv = 1.0 / d[far]
        T = (X[far] * inv[:, None]).sum(axis=0) / inv.sum()
        if eta == 0:
            new = T
        else:
            R = (diff[far] * inv[:, None]).sum(axis=0)
            rnorm = np.linalg.norm(R)
            if rnorm <= eta:
                # zero is in the subdifferential at the data point
                return m
            g = eta / rnorm
            new = (1.0 - g) * T + g * m
        step = np.linalg.norm(new - m)
        m = new
        if step < tol * (1.0 + np.linalg.norm(m)):
            return m
    raise ConvergenceError(f"Weiszfeld iteration did not converge in {max_iter} steps", last=m)


def _mdpde_column(x, alpha, tol, max_iter):
    mu = float(np.median(x))
    spread = np.abs(x - mu)
    if np.all(spread == 0):
        return mu
    s = 1.4826 * np.median(spread)
    s2 = s * s if s > 0 else float(np.mean(spread ** 2))
    s2 = max(s2, _SIGMA_FLOOR)
    for _ in range(max_iter):
        w = np.exp(-alpha * (x - mu) ** 2 / (2.0 * s2))
        new_mu = float(np.sum(w * x) / np.sum(w))
        new_s2 = sigma2_step(x - new_mu, alpha, s2, sigma_floor=_SIGMA_FLOOR)
        done = (abs(new_mu - mu) < tol * (1.0 + abs(mu))
                and abs(new_s2 - s2) < tol * max(s2, _SIGMA_FLOOR))
        mu, s2 = new_mu, new_s2
        if done:
            return mu
    raise ConvergenceError(f"coordinatewise MDPDE did not converge in {max_iter} steps", last=mu)


def coordinatewise_mdpde(X, alpha: float, tol: float = 1e-8, max_iter: int = 500) -> np.ndarray:
    """Per-column minimum-DPD location under a normal model with unknown scale.

    Alternates the weighted-mean update for the location with the scale
    fixed point of :func:`rpcadpd.rsvddpd.sigma2_step`.
    """
    X = as_data_matrix(X)
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return X.mean(axis=0)
    out = np.empty(X.shape[1])
    last = np.full(X.shape[1], np.nan)
    for j in range(X.shape[1]):
        try:
            out[j] = _mdpde_column(X[:, j], alpha, tol, max_iter)
        except ConvergenceError as exc:
            last[:j] = out[:j]
            last[j] = exc.last
            raise ConvergenceError(f"column {j}: {exc}", last=last) from exc
    return out


@dataclass(frozen=True)
class LocationEstimator:
    """A location estimator choice: ``"l1"``, ``"median"`` or ``"mdpde"``."""

    kind: str = "l1"
    alpha: float = 0.5
    tol: float = 1e-8
    max_iter: int = 500

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown location estimator {self.kind!r}; choose from {sorted(KINDS)}")
        if self.kind == "mdpde" and not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")

    def __call__(self, X) -> np.ndarray:
        if self.kind == "l1":
            return l1_median(X, self.tol, self.max_iter)
        if self.kind == "median":
            return coordinatewise_median(X)
        return coordinatewise_mdpde(X, self.alpha, self.tol, self.max_iter)


KINDS = {"l1", "median", "mdpde"}
