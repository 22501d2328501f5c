"""Robust PCA: robust centering, rSVDdpd, eigenpair conversion and tuning."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Spectrum, as_data_matrix, center_columns
from .errors import ConfigError, DimensionError, RankError
from .location import LocationEstimator
from .rsvddpd import DpdConfig, SvdFit, fit_rsvddpd

DEFAULT_ALPHA_GRID = tuple(round(0.1 * k, 1) for k in range(11))
DEFAULT_DELTA = 0.10


@dataclass
class PcaFit:
    center: np.ndarray
    spectrum: Spectrum
    alpha_used: float
    rank_used: int
    sigma2: float
    converged: bool
    objective_trace: np.ndarray
    iterations: int = 0
    svd: SvdFit | None = field(default=None, repr=False)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues

    @property
    def vectors(self) -> np.ndarray:
        return self.spectrum.vectors

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


def _resolve_rank(r, n, p):
    full = min(n, p)
    if r is None or r == "full":
        return full
    r = int(r)
    if not 1 <= r <= full:
        raise DimensionError(f"rank must lie in [1, {full}], got {r}")
    return r


def fit_rpcadpd(X, alpha: float = 0.5, r=None, loc: LocationEstimator | None = None,
                cfg: DpdConfig | None = None) -> PcaFit:
    """Robust PCA of the rows of ``X``.

    Parameters
    ----------
    X : array_like, shape (n, p)
    alpha : float
        DPD robustness parameter in [0, 1]; 0 is the Gaussian likelihood.
    r : int, "full" or None
        Number of components; None and "full" mean ``min(n, p)``.
    loc : LocationEstimator, optional
        Centering rule, L1-median by default.
    cfg : DpdConfig, optional
        Solver settings; its ``alpha`` and ``rank`` are overridden.

    Returns
    -------
    PcaFit
        Eigenvalues are ``lambda_k**2 / n`` and eigenvectors are the right
        singular vectors of the centered data.
    """
    X = as_data_matrix(X)
    n, p = X.shape
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    r = _resolve_rank(r, n, p)
    loc = loc or LocationEstimator()
    cfg = (cfg or DpdConfig()).with_(alpha=float(alpha), rank=r)
    mu = loc(X)
    Z = center_columns(X, mu)
    svd = fit_rsvddpd(Z, cfg)
    gamma = svd.lambdas ** 2 / n
    return PcaFit(center=mu, spectrum=Spectrum(gamma, svd.right), alpha_used=float(alpha),
                  rank_used=r, sigma2=svd.sigma2, converged=svd.converged,
                  objective_trace=svd.objective_trace, iterations=svd.iterations, svd=svd)


def select_rank(eigenvalues, delta: float = DEFAULT_DELTA) -> int:
    """Smallest r whose leading eigenvalues explain strictly more than 1 - delta."""
    g = np.asarray(eigenvalues, dtype=np.float64).ravel()
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    if g.size == 0 or np.any(g < 0):
        raise RankError("eigenvalues must be a non-empty list of non-negative values")
    total = g.sum()
    if not total > 0:
        raise RankError("all eigenvalues are zero")
    share = np.cumsum(np.sort(g)[::-1]) / total
    hits = np.flatnonzero(share > 1.0 - delta)
    # rounding can leave the full sum a hair below 1 - delta only if delta ~ 0
    return int(hits[0]) + 1 if hits.size else g.size


def fit_auto_rank(X, alpha: float = 0.5, delta: float = DEFAULT_DELTA,
                  loc: LocationEstimator | None = None, cfg: DpdConfig | None = None) -> PcaFit:
    """Full-rank fit, pick the rank with :func:`select_rank`, then refit."""
    full = fit_rpcadpd(X, alpha, None, loc, cfg)
    r = select_rank(full.eigenvalues, delta)
    if r == full.rank_used:
        return full
    return fit_rpcadpd(X, alpha, r, loc, cfg)


@dataclass(frozen=True)
class AlphaSelection:
    grid: tuple
    criterion_values: np.ndarray
    chosen_alpha: float
    sigma2: np.ndarray


def _align(fit: SvdFit, ref: SvdFit):
    s = np.sign(np.sum(fit.left * ref.left, axis=0))
    s[s == 0] = 1.0
    return fit.left * s, fit.right * s


def alpha_criterion(fit: SvdFit, ref: SvdFit, n: int, p: int) -> float:
    """Conditional-MSE criterion of ``fit`` measured against the alpha = 1 fit ``ref``."""
    a = fit.alpha
    r = fit.rank
    U, V = _align(fit, ref)
    pen_u = np.sum((U * fit.lambdas - ref.left * ref.lambdas) ** 2) / r
    pen_v = np.sum((V * fit.lambdas - ref.right * ref.lambdas) ** 2) / r
    return float((n + p) * fit.sigma2 * (1.0 + a * a / (1.0 + 2.0 * a)) ** 1.5 + pen_u + pen_v)


def select_alpha(X, r: int, grid=DEFAULT_ALPHA_GRID, loc: LocationEstimator | None = None,
                 cfg: DpdConfig | None = None) -> AlphaSelection:
    """Choose alpha on ``grid`` by the conditional-MSE criterion.

    Every candidate is compared with the alpha = 1 fit, so ``grid`` must
    contain 1.  Ties go to the larger alpha.
    """
    grid = tuple(float(a) for a in grid)
    if not grid or any(not 0.0 <= a <= 1.0 for a in grid):
        raise ConfigError("alpha grid must be a non-empty subset of [0, 1]")
    if 1.0 not in grid:
        raise ConfigError("alpha grid must contain 1")
    X = as_data_matrix(X)
    n, p = X.shape
    r = _resolve_rank(r, n, p)
    loc = loc or LocationEstimator()
    base = (cfg or DpdConfig()).with_(rank=r)
    Z = center_columns(X, loc(X))
    ref = fit_rsvddpd(Z, base.with_(alpha=1.0))
    values, s2 = [], []
    for a in grid:
        fit = ref if a == 1.0 else fit_rsvddpd(Z, base.with_(alpha=a))
        values.append(alpha_criterion(fit, ref, n, p))
        s2.append(fit.sigma2)
    values = np.array(values)
    best = values.min()
    tied = [a for a, v in zip(grid, values) if v <= best + 1e-12 * abs(best)]
    return AlphaSelection(grid=grid, criterion_values=values, chosen_alpha=max(tied),
                          sigma2=np.array(s2))
