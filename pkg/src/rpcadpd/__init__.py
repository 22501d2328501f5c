"""Robust principal component analysis with the density power divergence."""
from .core import Spectrum, center_columns, classical_pca, gram_schmidt
from .diagnostics import DiagnosticReport, Flag, diagnose, flag_outliers, orthogonal_distances, score_distances
from .errors import (ConfigError, ConvergenceError, DegenerateBasisError, DegenerateSpectrumError,
                     DimensionError, DomainError, HarnessError, RankError, RpcaError)
from .location import LocationEstimator, coordinatewise_mdpde, coordinatewise_median, l1_median
from .rpca import AlphaSelection, PcaFit, fit_auto_rank, fit_rpcadpd, select_alpha, select_rank
from .rsvddpd import DpdConfig, SvdFit, dpd_loss_v, fit_rsvddpd, irls_coeff_step, sigma2_step
from .simulate import (MetricsRow, ScenarioSpec, metric_bias_mae, metric_sre, run_replications,
                       sample_scenario, scenario_covariance)

__version__ = "0.1.0"
