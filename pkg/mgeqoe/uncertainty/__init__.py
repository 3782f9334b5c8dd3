from mgeqoe.uncertainty.ensemble import (
    Ensemble,
    EnsembleSpec,
    align_longitudes,
    eigenspace_projection,
    ensemble_mean_cov,
    propagate_ensemble,
    sample_initial_ensemble,
    sample_mean_cov,
)
from mgeqoe.uncertainty.henze_zirkler import (
    HzResult,
    HzSeries,
    hz_beta,
    hz_null_lognormal,
    hz_pvalue,
    hz_series,
    hz_statistic,
    hz_test,
    mahalanobis,
)

__all__ = [
    "Ensemble",
    "EnsembleSpec",
    "HzResult",
    "HzSeries",
    "align_longitudes",
    "eigenspace_projection",
    "ensemble_mean_cov",
    "hz_beta",
    "hz_null_lognormal",
    "hz_pvalue",
    "hz_series",
    "hz_statistic",
    "hz_test",
    "mahalanobis",
    "propagate_ensemble",
    "sample_initial_ensemble",
    "sample_mean_cov",
]
