"""Robust SVD by alternating DPD regressions (rSVDdpd).

The data matrix Z (already centered) is modelled cell by cell as
``Z[i, j] = sum_k u[i, k] * lam[k] * v[j, k] + e[i, j]`` with Gaussian
errors of variance ``sigma2``.  Each half-step solves one robust regression
per column (or row) with the DPD loss, using IRLS.  IRLS is a
majorize-minimize scheme for this loss, so every accepted step lowers the
cell-averaged objective.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .core import as_data_matrix, fix_signs, gram_schmidt
from .errors import ConfigError, DimensionError, DomainError

_RIDGE = 1e-8
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class DpdConfig:
    """Settings for :func:`fit_rsvddpd`.

    ``restarts`` adds that many random orthonormal starting points to the
    classical-SVD start; the run with the lowest final objective wins.
    """

    alpha: float = 0.5
    rank: int = 1
    tol: float = 1e-9
    max_iter: int = 100
    irls_sweeps: int = 1
    restarts: int = 0
    seed: int | None = 0
    sigma_floor: float = 1e-12

    def validate(self, n: int | None = None, p: int | None = None) -> "DpdConfig":
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.rank < 1:
            raise DimensionError(f"rank must be >= 1, got {self.rank}")
        if n is not None and self.rank > min(n, p):
            raise DimensionError(f"rank {self.rank} exceeds min(n, p) = {min(n, p)}")
        if self.tol <= 0 or self.max_iter < 1 or self.irls_sweeps < 1 or self.restarts < 0:
            raise ConfigError("tol must be positive; max_iter and irls_sweeps >= 1; restarts >= 0")
        if self.sigma_floor <= 0:
            raise ConfigError("sigma_floor must be positive")
        return self

    def with_(self, **changes) -> "DpdConfig":
        return replace(self, **changes)


@dataclass
class SvdFit:
    lambdas: np.ndarray
    left: np.ndarray
    right: np.ndarray
    sigma2: float
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    alpha: float
    ridge_used: bool = False

    @property
    def rank(self) -> int:
        return len(self.lambdas)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])

    def fitted(self) -> np.ndarray:
        return (self.left * self.lambdas) @ self.right.T


# ---------------------------------------------------------------------------
# loss and objective

def _cell_loss(e, sigma2, alpha):
    e = np.asarray(e, dtype=np.float64)
    if alpha == 0.0:
        return e * e / (2.0 * sigma2)
    scale = (2.0 * math.pi * sigma2) ** (-alpha / 2.0)
    return scale * ((1.0 + alpha) ** -0.5
                    - (1.0 + alpha) / alpha * np.exp(-alpha * e * e / (2.0 * sigma2)))


def dpd_loss_v(y, c, d, sigma2: float, alpha: float):
    """DPD loss of the cell ``y`` against the prediction ``sum(c * d)``.

    ``c`` and ``d`` may be scalars or coefficient vectors (last axis summed).
    ``alpha = 0`` gives the squared-error loss ``e**2 / (2 sigma2)``.
    """
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    pred = np.sum(np.asarray(c, dtype=np.float64) * np.asarray(d, dtype=np.float64), axis=-1)
    out = _cell_loss(np.asarray(y, dtype=np.float64) - pred, sigma2, alpha)
    return float(out) if np.ndim(out) == 0 else out


def dpd_objective(residuals, sigma2: float, alpha: float) -> float:
    """Cell-averaged DPD loss.

    For ``alpha = 0`` the Gaussian log-normalizer ``log(2 pi sigma2) / 2`` is
    added, which is the ``alpha -> 0`` limit of the loss up to the constant
    ``-1/alpha``; without it the scale update could not be a descent step.
    """
    val = float(np.mean(_cell_loss(residuals, sigma2, alpha)))
    if alpha == 0.0:
        val += 0.5 * math.log(2.0 * math.pi * sigma2)
    return val


# ---------------------------------------------------------------------------
# building blocks

def _irls_batch(Y, R, sigma2, alpha, start, sweeps):
    """IRLS for many targets sharing one regressor matrix.

    Y: m x q targets, R: m x r regressors, start: q x r coefficients.
    Returns (q x r coefficients, ridge_engaged).
    """
    C = np.array(start, dtype=np.float64, copy=True)
    ridge = False
    eye = np.eye(R.shape[1])
    for _ in range(sweeps):
        if alpha == 0.0:
            W = np.ones_like(Y)
        else:
            E = Y - R @ C.T
            logw = -alpha * E * E / (2.0 * sigma2)
            # per-target rescaling leaves each weighted LS solution unchanged
            logw -= logw.max(axis=0)
            W = np.exp(logw)
        G = np.einsum("ik,iq,il->qkl", R, W, R)
        b = np.einsum("ik,iq->qk", R, W * Y)
        bad = np.linalg.cond(G) > _COND_LIMIT
        if np.any(bad):
            ridge = True
            G[bad] += _RIDGE * eye
        C = np.linalg.solve(G, b[..., None])[..., 0]
    return C, ridge


def irls_coeff_step(targets, regressors, sigma2: float, alpha: float, start=None,
                    sweeps: int = 1, *, return_flag: bool = False):
    """IRLS updates of the coefficients of one DPD regression.

    Each sweep weights the observations by ``exp(-alpha e**2 / (2 sigma2))``
    at the current residuals and solves the weighted normal equations.
    With ``return_flag`` the second return value says whether the ridge
    fallback for an ill-conditioned system was used.
    """
    y = np.asarray(targets, dtype=np.float64).ravel()
    R = np.asarray(regressors, dtype=np.float64)
    if R.ndim == 1:
        R = R[:, None]
    if R.shape[0] != y.shape[0]:
        raise DimensionError("targets and regressors disagree on the number of observations")
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    if start is None:
        start = np.linalg.lstsq(R, y, rcond=None)[0]
    start = np.asarray(start, dtype=np.float64).reshape(1, -1)
    C, ridge = _irls_batch(y[:, None], R, sigma2, alpha, start, sweeps)
    return (C[0], ridge) if return_flag else C[0]


def _sigma2_profile(e2, alpha):
    a = (1.0 + alpha) ** -0.5
    c = (1.0 + alpha) / alpha

    def h(log_s):
        s = math.exp(log_s)
        return s ** (-alpha / 2.0) * (a - c * np.mean(np.exp(-alpha * e2 / (2.0 * s))))

    return h


def sigma2_step(residuals, alpha: float, sigma2_start: float, sigma_floor: float = 1e-12,
                tol: float = 1e-10, max_iter: int = 1000) -> float:
    """Minimize the cell-averaged DPD loss over the error variance.

    Iterates ``s <- sum(w e^2) / (sum(w) - N alpha (1 + alpha)^(-3/2))`` with
    ``w = exp(-alpha e^2 / (2 s))``.  A non-positive denominator (or no
    convergence) switches to a bounded scalar search over ``log s`` on
    ``[sigma_floor, 10 max e^2]``.
    """
    e2 = np.square(np.asarray(residuals, dtype=np.float64)).ravel()
    if e2.size == 0 or not np.any(e2 > 0):
        return sigma_floor
    if alpha == 0.0:
        return max(float(e2.mean()), sigma_floor)
    corr = e2.size * alpha * (1.0 + alpha) ** -1.5
    s = max(float(sigma2_start), sigma_floor)
    for _ in range(max_iter):
        w = np.exp(-alpha * e2 / (2.0 * s))
        den = w.sum() - corr
        if den <= 0:
            break
        new = max(float(np.dot(w, e2) / den), sigma_floor)
        if abs(new - s) < tol * s:
            return new
        s = new
    hi = 10.0 * float(e2.max())
    if hi <= sigma_floor:
        return sigma_floor
    res = minimize_scalar(_sigma2_profile(e2, alpha), bounds=(math.log(sigma_floor), math.log(hi)),
                          method="bounded", options={"xatol": 1e-10})
    return max(math.exp(res.x), sigma_floor)


def _robust_sigma2(E, floor):
    s = 1.4826 * float(np.median(np.abs(E)))
    return max(s * s, floor)


def _from_right(U, B):
    # fitted = U B^T; rotate into SVD form without changing the product
    P, S, Wt = np.linalg.svd(B, full_matrices=False)
    return U @ Wt.T, S, P


def _from_left(A, V):
    # fitted = A V^T
    P, S, Wt = np.linalg.svd(A, full_matrices=False)
    return P, S, V @ Wt.T


def _fitted(U, lam, V):
    return (U * lam) @ V.T


def _run(Z, U, lam, V, cfg):
    alpha, floor = cfg.alpha, cfg.sigma_floor
    s2 = _robust_sigma2(Z - _fitted(U, lam, V), floor)
    f = dpd_objective(Z - _fitted(U, lam, V), s2, alpha)
    trace = [f]
    ridge = False
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        f_cycle = f
        # (a) column regressions on the left vectors
        B, flag = _irls_batch(Z, U, s2, alpha, V * lam, cfg.irls_sweeps)
        ridge |= flag
        cand = _from_right(U, B)
        f_new = dpd_objective(Z - _fitted(*cand), s2, alpha)
        if f_new <= f:
            (U, lam, V), f = cand, f_new
        # (b) row regressions on the right vectors
        A, flag = _irls_batch(Z.T, V, s2, alpha, U * lam, cfg.irls_sweeps)
        ridge |= flag
        cand = _from_left(A, V)
        f_new = dpd_objective(Z - _fitted(*cand), s2, alpha)
        if f_new <= f:
            (U, lam, V), f = cand, f_new
        # (c) error variance
        E = Z - _fitted(U, lam, V)
        s2_new = sigma2_step(E, alpha, s2, floor)
        f_new = dpd_objective(E, s2_new, alpha)
        if f_new <= f:
            s2, f = s2_new, f_new
        trace.append(f)
        if abs(f_cycle - f) <= cfg.tol * max(abs(f_cycle), 1e-300):
            converged = True
            break
    return dict(U=U, lam=lam, V=V, sigma2=s2, trace=np.array(trace), iterations=it,
                converged=converged, ridge=ridge)


def _classical_start(Z, r):
    U, S, Vt = np.linalg.svd(Z, full_matrices=False)
    return U[:, :r], S[:r], Vt[:r].T


def _random_start(Z, r, rng):
    U0 = gram_schmidt(rng.standard_normal((Z.shape[0], r)))
    return _from_right(U0, Z.T @ U0)


def fit_rsvddpd(Z, cfg: DpdConfig) -> SvdFit:
    """Rank-``cfg.rank`` robust SVD of ``Z`` under the DPD loss.

    Alternates column regressions, row regressions and the variance update
    until the relative change of the objective over a full cycle drops
    below ``cfg.tol``.  Steps that would raise the objective are rejected,
    so ``objective_trace`` never increases.  If the iteration cap is hit
    the last iterate is returned with ``converged=False``.
    """
    Z = as_data_matrix(Z)
    n, p = Z.shape
    cfg.validate(n, p)
    r = cfg.rank
    starts = [_classical_start(Z, r)]
    if cfg.restarts:
        rng = np.random.default_rng(cfg.seed)
        starts += [_random_start(Z, r, rng) for _ in range(cfg.restarts)]
    best = None
    for U, lam, V in starts:
        res = _run(Z, U, lam, V, cfg)
        if best is None or res["trace"][-1] < best["trace"][-1]:
            best = res
    order = np.argsort(best["lam"], kind="stable")[::-1]
    V, U = fix_signs(best["V"][:, order], best["U"][:, order])
    return SvdFit(lambdas=best["lam"][order], left=U, right=V, sigma2=best["sigma2"],
                  objective_trace=best["trace"], iterations=best["iterations"],
                  converged=best["converged"], alpha=cfg.alpha, ridge_used=best["ridge"])
