"""Score and orthogonal distances of observations to a fitted principal subspace."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import chi2, norm

from .core import Spectrum, as_data_matrix, center_columns
from .errors import ConfigError, DegenerateSpectrumError, DimensionError

MAD_SCALE = 1.4826


class Flag(str, Enum):
    REGULAR = "Regular"
    GOOD_LEVERAGE = "GoodLeverage"
    ORTHOGONAL_OUTLIER = "OrthogonalOutlier"
    BAD_LEVERAGE = "BadLeverage"


def _parts(X, fit):
    X = as_data_matrix(X)
    V = np.asarray(fit.spectrum.vectors, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != X.shape[1]:
        raise DimensionError("eigenvectors do not match the number of data columns")
    Z = center_columns(X, fit.center)
    return Z, V, np.asarray(fit.spectrum.eigenvalues, dtype=np.float64)


def score_distances(X, fit) -> np.ndarray:
    """``sqrt(sum_k t_ik**2 / gamma_k)`` with ``t_ik`` the score of row i on component k."""
    Z, V, gamma = _parts(X, fit)
    if np.any(gamma <= 0):
        raise DegenerateSpectrumError("score distance needs strictly positive eigenvalues")
    T = Z @ V
    return np.sqrt(np.sum(T * T / gamma, axis=1))


def orthogonal_distances(X, fit) -> np.ndarray:
    """Euclidean norm of each centered row after removing its projection on the subspace."""
    Z, V, _ = _parts(X, fit)
    return np.linalg.norm(Z - (Z @ V) @ V.T, axis=1)


def sd_cutoff(r: int, quantile: float = 0.975) -> float:
    return float(np.sqrt(chi2.ppf(quantile, r)))


def od_cutoff(od, quantile: float = 0.975) -> float:
    """Cutoff from a normal approximation to ``od ** (2/3)`` (median and scaled MAD)."""
    t = np.asarray(od, dtype=np.float64) ** (2.0 / 3.0)
    m = float(np.median(t))
    s = MAD_SCALE * float(np.median(np.abs(t - m)))
    return float(max(m + s * norm.ppf(quantile), 0.0) ** 1.5)


@dataclass(frozen=True)
class DiagnosticReport:
    score_distance: np.ndarray
    orthogonal_distance: np.ndarray
    sd_cutoff: float
    od_cutoff: float
    flags: tuple
    quantile: float = 0.975

    def counts(self) -> dict:
        return {f.value: sum(1 for g in self.flags if g is f) for f in Flag}

    def to_csv(self, digits: int = 17) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "score_distance", "orthogonal_distance", "flag"])
        for i, (sd, od, fl) in enumerate(zip(self.score_distance, self.orthogonal_distance, self.flags)):
            w.writerow([i, f"{sd:.{digits}g}", f"{od:.{digits}g}", fl.value])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"sd_cutoff": self.sd_cutoff, "od_cutoff": self.od_cutoff,
                "quantile": self.quantile, "counts": self.counts()}

    def to_json(self) -> str:
        doc = dict(self.summary(), score_distance=self.score_distance.tolist(),
                   orthogonal_distance=self.orthogonal_distance.tolist(),
                   flags=[f.value for f in self.flags])
        return json.dumps(doc, indent=2) + "\n"


def flag_outliers(score_distance, orthogonal_distance, r: int,
                  quantile: float = 0.975) -> DiagnosticReport:
    """Classify rows by comparing both distances against their cutoffs.

    A row is flagged when its distance is strictly above the cutoff.
    """
    if r < 1:
        raise ConfigError("at least one component is needed to flag outliers")
    if not 0.0 < quantile < 1.0:
        raise ConfigError(f"quantile must lie in (0, 1), got {quantile}")
    sd = np.asarray(score_distance, dtype=np.float64)
    od = np.asarray(orthogonal_distance, dtype=np.float64)
    if sd.shape != od.shape:
        raise DimensionError("score and orthogonal distances differ in length")
    c_sd, c_od = sd_cutoff(r, quantile), od_cutoff(od, quantile)
    table = {(False, False): Flag.REGULAR, (True, False): Flag.GOOD_LEVERAGE,
             (False, True): Flag.ORTHOGONAL_OUTLIER, (True, True): Flag.BAD_LEVERAGE}
    flags = tuple(table[(bool(a), bool(b))] for a, b in zip(sd > c_sd, od > c_od))
    return DiagnosticReport(sd, od, c_sd, c_od, flags, quantile)


@dataclass(frozen=True)
class _Subspace:
    center: np.ndarray
    spectrum: object


def diagnose(X, fit, quantile: float = 0.975) -> DiagnosticReport:
    """Distances and flags for every row of ``X``.

    Components with zero variance carry no score information and are left
    out of the score distance (they still count towards the subspace for
    the orthogonal distance).  With no positive eigenvalue at all every
    score distance is zero.
    """
    gamma = np.asarray(fit.spectrum.eigenvalues, dtype=np.float64)
    r = len(gamma)
    keep = gamma > 0
    od = orthogonal_distances(X, fit)
    if keep.all():
        sd = score_distances(X, fit)
    elif keep.any():
        sub = _Subspace(fit.center, Spectrum(gamma[keep], np.asarray(fit.spectrum.vectors)[:, keep]))
        sd = score_distances(X, sub)
    else:
        sd = np.zeros_like(od)
    return flag_outliers(sd, od, r, quantile)
