"""Henze-Zirkler test of multivariate normality."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
import structlog
from scipy.linalg import LinAlgError, cho_factor, solve_triangular
from scipy.spatial.distance import cdist, pdist, squareform
from scipy.stats import lognorm
from toolz import partition_all

from mgeqoe.constants import DEFAULT_ALPHA
from mgeqoe.exceptions import DegenerateCovariance, InvalidArgument, InvalidMoments
from mgeqoe.lib.parallel import parallel_map, worker_count
from mgeqoe.uncertainty.ensemble import Ensemble, sample_mean_cov

logger = structlog.get_logger(__name__)

Samples = npt.NDArray[np.float64]

# pairs per block of the O(N^2) kernel
DEFAULT_BLOCK_SIZE = 1024


def _whiten(samples: Samples, mean: npt.ArrayLike, cov: npt.ArrayLike) -> Samples:
    """Solve ``L z = x - m`` with ``cov = L L^T``."""
    cov = np.asarray(cov, dtype=np.float64)
    if not np.all(np.isfinite(cov)):
        raise DegenerateCovariance("covariance has non-finite entries")
    try:
        factor, lower = cho_factor(cov, lower=True, check_finite=False)
    except LinAlgError as e:
        raise DegenerateCovariance(f"covariance is not positive definite: {e}") from e
    centered = np.asarray(samples, dtype=np.float64) - np.asarray(mean, dtype=np.float64)
    whitened: Samples = solve_triangular(factor, centered.T, lower=lower, check_finite=False).T
    return whitened


def mahalanobis(
    samples: Samples, mean: npt.ArrayLike, cov: npt.ArrayLike
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Squared Mahalanobis distances to the mean and between every pair.

    Examples
    --------
    >>> x = np.array([[1.0, 0.0], [0.0, 2.0]])
    >>> d_i, d_ij = mahalanobis(x, np.zeros(2), np.eye(2))
    >>> d_i.tolist(), d_ij.tolist()
    ([1.0, 4.0], [[0.0, 5.0], [5.0, 0.0]])
    """
    whitened = _whiten(samples, mean, cov)
    d_i = np.einsum("ij,ij->i", whitened, whitened)
    d_ij = squareform(pdist(whitened, "sqeuclidean"))
    return d_i, d_ij


def hz_beta(n_samples: int, n_dim: int) -> float:
    """Smoothing parameter of the test.

    >>> round(hz_beta(10_000, 6), 3)
    1.998
    """
    if n_samples < 2 or n_dim < 1:
        raise InvalidArgument(f"invalid sample shape ({n_samples}, {n_dim})")
    return float((n_samples * (2 * n_dim + 1) / 4.0) ** (1.0 / (n_dim + 4)) / math.sqrt(2.0))


def _pair_kernel_block(args: Tuple[Samples, Samples, float]) -> float:
    block, whitened, beta = args
    return float(np.exp(-0.5 * beta * beta * cdist(block, whitened, "sqeuclidean")).sum())


def _pair_kernel_sum(
    whitened: Samples, beta: float, block_size: int, n_jobs: Optional[int]
) -> float:
    blocks = [
        (whitened[list(rows)], whitened, beta)
        for rows in partition_all(block_size, range(len(whitened)))
    ]
    # fixed block order keeps the sum independent of the number of workers
    partials = parallel_map(_pair_kernel_block, blocks, n_jobs if len(blocks) > 1 else 1)
    return float(np.sum(partials))


def hz_statistic(
    samples: Samples,
    *,
    n_jobs: Optional[int] = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> Tuple[float, float]:
    """Henze-Zirkler statistic of a sample set, with its smoothing parameter.

    Arguments
    ---------
        samples:
            ``(N, n)`` array, one sample per row

    Keyword Arguments
    -----------------
        n_jobs:
            workers for the pair kernel
        block_size:
            rows per block of the pair kernel

    Returns
    -------
        hz:
            the statistic, ``N`` times the weighted distance between the
            empirical and the Gaussian characteristic functions
        beta:
            smoothing parameter
    """
    samples = np.asarray(samples, dtype=np.float64)
    n_samples, n_dim = samples.shape
    beta = hz_beta(n_samples, n_dim)
    mean, cov = sample_mean_cov(samples)
    whitened = _whiten(samples, mean, cov)
    d_i = np.einsum("ij,ij->i", whitened, whitened)

    beta2 = beta * beta
    gamma = 1.0 + beta2
    pair_term = _pair_kernel_sum(whitened, beta, block_size, n_jobs) / n_samples**2
    center_term = 2.0 * gamma ** (-n_dim / 2.0) * np.exp(-beta2 * d_i / (2.0 * gamma)).sum()
    constant_term = (1.0 + 2.0 * beta2) ** (-n_dim / 2.0)
    hz = n_samples * (pair_term - center_term / n_samples + constant_term)
    return float(hz), beta


def hz_null_lognormal(n_samples: int, n_dim: int, beta: float) -> Tuple[float, float]:
    """Log-space mean and standard deviation of the log-normal null distribution."""
    n = n_dim
    b2 = beta * beta
    b4 = b2 * b2
    b8 = b4 * b4
    a = 1.0 + 2.0 * b2
    w = (1.0 + b2) * (1.0 + 3.0 * b2)
    mean = 1.0 - a ** (-n / 2.0) * (1.0 + n * b2 / a + n * (n + 2) * b4 / (2.0 * a * a))
    variance = (
        2.0 * (1.0 + 4.0 * b2) ** (-n / 2.0)
        + 2.0 * a ** (-n) * (1.0 + 2.0 * n * b4 / a**2 + 3.0 * n * (n + 2) * b8 / (4.0 * a**4))
        - 4.0
        * w ** (-n / 2.0)
        * (1.0 + 3.0 * n * b4 / (2.0 * w) + n * (n + 2) * b8 / (2.0 * w**2))
    )
    if not (mean > 0.0 and variance > 0.0):
        raise InvalidMoments(
            f"null moments must be positive, got mean={mean!r}, variance={variance!r} "
            f"for N={n_samples}, n={n_dim}"
        )
    log_var = math.log1p(variance / (mean * mean))
    return math.log(mean) - log_var / 2.0, math.sqrt(log_var)


def hz_pvalue(hz: float, log_mean: float, log_sd: float) -> float:
    """Upper tail probability of ``hz`` under the log-normal null.

    >>> round(hz_pvalue(math.exp(0.3), 0.3, 0.5), 12)
    0.5
    """
    if not hz > 0.0:
        raise InvalidArgument(f"the statistic must be strictly positive, got {hz}")
    if not log_sd > 0.0:
        raise InvalidArgument(f"log_sd must be strictly positive, got {log_sd}")
    return float(lognorm.sf(hz, log_sd, scale=math.exp(log_mean)))


@dataclass(frozen=True)
class HzResult:
    hz: float
    p_value: float
    reject: bool
    beta: float


def hz_test(
    samples: Samples,
    alpha: float = DEFAULT_ALPHA,
    *,
    n_jobs: Optional[int] = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> HzResult:
    """Test one sample set; the null hypothesis is rejected when ``p_value <= alpha``."""
    _check_alpha(alpha)
    samples = np.asarray(samples, dtype=np.float64)
    n_samples, n_dim = samples.shape
    hz, beta = hz_statistic(samples, n_jobs=n_jobs, block_size=block_size)
    log_mean, log_sd = hz_null_lognormal(n_samples, n_dim, beta)
    p_value = hz_pvalue(hz, log_mean, log_sd) if hz > 0.0 else 1.0
    return HzResult(hz=hz, p_value=p_value, reject=p_value <= alpha, beta=beta)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise InvalidArgument(f"alpha must lie in (0, 1), got {alpha}")


@dataclass(frozen=True)
class HzSeries:
    epochs: npt.NDArray[np.float64]
    hz: npt.NDArray[np.float64]
    p_value: npt.NDArray[np.float64]
    reject: npt.NDArray[np.bool_]
    beta: npt.NDArray[np.float64]
    alpha: float = DEFAULT_ALPHA
    n_dim: int = 6

    def with_alpha(self, alpha: float) -> HzSeries:
        """Same statistics, thresholded against another significance level."""
        _check_alpha(alpha)
        return replace(self, alpha=alpha, reject=self.p_value <= alpha)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "epoch": self.epochs,
                "hz": self.hz,
                "p_value": self.p_value,
                "reject": self.reject,
                "beta": self.beta,
            }
        )


def hz_series(
    ensemble: Ensemble,
    alpha: float = DEFAULT_ALPHA,
    *,
    subsample: Optional[int] = None,
    n_jobs: Optional[int] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> HzSeries:
    """Test every epoch of an ensemble.

    ``subsample`` keeps the first K samples to bound the quadratic cost. A
    degenerate covariance counts as a rejection with an infinite statistic.
    """
    _check_alpha(alpha)
    n_samples = ensemble.n_samples
    if subsample is not None:
        if not 2 <= subsample:
            raise InvalidArgument(f"subsample must be at least 2, got {subsample}")
        n_samples = min(subsample, n_samples)
    n_jobs = worker_count(n_jobs)

    results = []
    for epoch, samples in zip(ensemble.epochs, ensemble.samples):
        try:
            results.append(
                hz_test(samples[:n_samples], alpha, n_jobs=n_jobs, block_size=block_size)
            )
        except DegenerateCovariance as e:
            logger.warning("degenerate ensemble covariance", epoch=float(epoch), error=str(e))
            beta = hz_beta(n_samples, ensemble.n_dim)
            results.append(HzResult(hz=math.inf, p_value=0.0, reject=True, beta=beta))

    logger.info(
        "henze-zirkler series",
        kind=ensemble.kind.value,
        n_epochs=len(results),
        n_samples=n_samples,
        n_rejected=sum(result.reject for result in results),
    )
    return HzSeries(
        epochs=np.array(ensemble.epochs, dtype=np.float64),
        hz=np.array([result.hz for result in results]),
        p_value=np.array([result.p_value for result in results]),
        reject=np.array([result.reject for result in results], dtype=bool),
        beta=np.array([result.beta for result in results]),
        alpha=alpha,
        n_dim=ensemble.n_dim,
    )
