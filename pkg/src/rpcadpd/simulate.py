"""Monte Carlo harness: contaminated Brownian-covariance scenarios and eigen-metrics."""
from __future__ import annotations

import csv
import io
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import classical_pca
from .errors import ConfigError, DimensionError, HarnessError, RpcaError
from .location import LocationEstimator
from .rpca import fit_rpcadpd
from .rsvddpd import DpdConfig

# id -> (delta, f1, f2, tail)
SCENARIOS = {
    "S1": (0.0, 0.0, 1.0, "gaussian"),
    "S2a": (0.1, 3.0, 1.0, "gaussian"),
    "S2b": (0.2, 3.0, 1.0, "gaussian"),
    "S2c": (0.1, 3.0, 5.0, "gaussian"),
    "S2d": (0.2, 3.0, 5.0, "gaussian"),
    "S3a": (0.1, 3.0, 1.0, "t5"),
    "S3b": (0.2, 3.0, 1.0, "t5"),
    "S3c": (0.1, 3.0, 5.0, "t5"),
    "S3d": (0.2, 3.0, 5.0, "t5"),
}
CSV_HEADER = ["scenario", "p", "method", "alpha", "component", "bias", "mae", "sre", "B", "seed"]
MAX_FAILURE_RATE = 0.05


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    n: int = 50
    p: int = 10
    delta: float = 0.0
    f1: float = 0.0
    f2: float = 1.0
    tail: str = "gaussian"

    @classmethod
    def from_id(cls, sid: str, n: int = 50, p: int = 10) -> "ScenarioSpec":
        if sid not in SCENARIOS:
            raise ConfigError(f"unknown scenario {sid!r}; valid ids: {', '.join(SCENARIOS)}")
        if n < 1 or p < 1:
            raise ConfigError("n and p must be positive")
        delta, f1, f2, tail = SCENARIOS[sid]
        return cls(sid, n, p, delta, f1, f2, tail)

    @property
    def shift(self) -> np.ndarray:
        mu = np.zeros(self.p)
        mu[: math.ceil(0.1 * self.p)] = self.f1
        return mu


def scenario_covariance(p: int) -> np.ndarray:
    """Covariance of a Brownian path sampled at ``1/p, 2/p, ..., 1``."""
    idx = np.arange(1, p + 1)
    return np.minimum.outer(idx, idx) / p


def true_spectrum(p: int, r: int | None = None):
    w, V = np.linalg.eigh(scenario_covariance(p))
    order = np.argsort(w)[::-1][: r or p]
    return w[order], V[:, order]


def _row_stream(seed: int, replicate: int, row: int) -> np.random.Generator:
    # counter-style substream: the key fixes the stream independently of scheduling
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate, row)))


def sample_scenario(spec: ScenarioSpec, seed: int, replicate: int = 0):
    """Draw one data set; returns ``(X, mask)`` with ``mask`` marking contaminated rows.

    Every row consumes its own random stream, keyed by (seed, replicate, row).
    """
    L = np.linalg.cholesky(scenario_covariance(spec.p))
    L_out = L / math.sqrt(spec.f2)
    mu = spec.shift
    X = np.empty((spec.n, spec.p))
    mask = np.zeros(spec.n, dtype=bool)
    for i in range(spec.n):
        g = _row_stream(seed, replicate, i)
        bad = g.random() < spec.delta
        z = g.standard_normal(spec.p)
        if not bad:
            X[i] = L @ z
            continue
        mask[i] = True
        x = L_out @ z
        if spec.tail == "t5":
            x /= math.sqrt(g.chisquare(5) / 5.0)
        X[i] = mu + x
    return X, mask


def metric_bias_mae(estimates, truth):
    E = np.atleast_2d(np.asarray(estimates, dtype=np.float64))
    t = np.asarray(truth, dtype=np.float64).ravel()
    if E.shape[1] != t.shape[0]:
        raise DimensionError("estimates and truth differ in the number of components")
    D = E - t
    return D.mean(axis=0), np.abs(D).mean(axis=0)


def metric_sre(estimated_bases, true_basis) -> float:
    """Average of ``2 (r - tr(P_hat P))`` over the estimated bases."""
    V = np.asarray(true_basis, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    bases = list(estimated_bases)
    if not bases:
        raise DimensionError("no estimated bases")
    P = V @ V.T
    out = 0.0
    for B in bases:
        B = np.asarray(B, dtype=np.float64)
        if B.ndim == 1:
            B = B[:, None]
        if B.shape != V.shape:
            raise DimensionError(f"basis shape {B.shape} differs from truth {V.shape}")
        # tr(B B^T P) without forming the p x p projector
        out += 2.0 * (V.shape[1] - float(np.sum((B.T @ P) * B.T)))
    return out / len(bases)


@dataclass(frozen=True)
class MetricsRow:
    scenario: str
    p: int
    method: str
    alpha: float | None
    bias: np.ndarray
    mae: np.ndarray
    sre: float
    B: int
    seed: int
    failures: int = 0

    @property
    def bias_total(self) -> float:
        return float(self.bias.sum())

    @property
    def mae_total(self) -> float:
        return float(self.mae.sum())

    def csv_rows(self, digits: int = 17) -> list:
        f = lambda x: f"{x:.{digits}g}"
        a = "" if self.alpha is None else f(self.alpha)
        head = [self.scenario, str(self.p), self.method, a]
        tail = [f(self.sre), str(self.B), str(self.seed)]
        rows = [head + [str(k + 1), f(b), f(m)] + tail for k, (b, m) in enumerate(zip(self.bias, self.mae))]
        rows.append(head + ["all", f(self.bias_total), f(self.mae_total)] + tail)
        return rows


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerows(row.csv_rows())
    return buf.getvalue()


def parse_method(label: str):
    """``"classical"`` or ``"dpd:<alpha>"`` (also ``"dpd<alpha>"``) -> (label, alpha or None)."""
    s = label.strip().lower()
    if s == "classical":
        return ("classical", None)
    if s.startswith("dpd"):
        try:
            a = float(s[3:].lstrip(":=_"))
        except ValueError:
            raise ConfigError(f"cannot read alpha from method {label!r}") from None
        if not 0.0 <= a <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {a}")
        return (f"dpd{a:g}", a)
    raise ConfigError(f"unknown method {label!r}; use 'classical' or 'dpd:<alpha>'")


def default_threads() -> int:
    raw = os.environ.get("RPCADPD_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _one_replicate(spec, methods, r, seed, b, loc, cfg):
    X, _ = sample_scenario(spec, seed, b)
    out = []
    for _, alpha in methods:
        try:
            if alpha is None:
                sp = classical_pca(X, r)
                out.append((sp.eigenvalues, sp.vectors))
            else:
                fit = fit_rpcadpd(X, alpha, r, loc, cfg)
                out.append((fit.eigenvalues, fit.vectors))
        except (RpcaError, np.linalg.LinAlgError, FloatingPointError):
            out.append(None)
    return out


def run_replications(spec: ScenarioSpec, methods, r: int | None = None, B: int = 100, seed: int = 0,
                     *, threads: int | None = None, loc: LocationEstimator | None = None,
                     cfg: DpdConfig | None = None) -> list:
    """Fit every method on ``B`` independent draws of ``spec`` and aggregate.

    ``methods`` holds ``(label, alpha)`` pairs (``alpha=None`` is classical
    PCA) or labels understood by :func:`parse_method`.  Replicates run on a
    thread pool of size ``threads`` (default from ``RPCADPD_THREADS``);
    results are gathered in replicate order, so the output does not depend
    on the pool size.
    """
    r = min(spec.n, spec.p) if r is None else int(r)
    if not 1 <= r <= min(spec.n, spec.p):
        raise DimensionError(f"rank {r} outside [1, {min(spec.n, spec.p)}]")
    if B < 1:
        raise ConfigError("B must be at least 1")
    methods = [parse_method(m) if isinstance(m, str) else (str(m[0]), m[1]) for m in methods]
    threads = threads or default_threads()
    job = lambda b: _one_replicate(spec, methods, r, seed, b, loc, cfg)
    if threads == 1:
        results = [job(b) for b in range(B)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(B)))
    gamma, V = true_spectrum(spec.p, r)
    rows = []
    for k, (label, alpha) in enumerate(methods):
        ok = [res[k] for res in results if res[k] is not None]
        failed = B - len(ok)
        if failed > MAX_FAILURE_RATE * B:
            raise HarnessError(f"{label}: {failed} of {B} fits failed")
        if failed:
            warnings.warn(f"{label}: {failed} of {B} fits failed and were excluded", RuntimeWarning)
        bias, mae = metric_bias_mae(np.array([g for g, _ in ok]), gamma)
        sre = metric_sre([v for _, v in ok], V)
        rows.append(MetricsRow(spec.id, spec.p, label, alpha, bias, mae, sre, B, seed, failed))
    return rows
