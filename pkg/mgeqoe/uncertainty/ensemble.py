"""Monte Carlo ensembles and their sample statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
import structlog
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat

from mgeqoe.core import Body, CanonicalUnits, CartesianState
from mgeqoe.elements import cart_to_mgeqoe
from mgeqoe.exceptions import InvalidArgument, NumericalError, SamplePropagationError
from mgeqoe.lib.parallel import parallel_map
from mgeqoe.lib.rng import sample_generators
from mgeqoe.propagation import DynamicsConfig, OdeSettings, TrajectoryKind, propagate

logger = structlog.get_logger(__name__)

Samples = npt.NDArray[np.float64]


class EnsembleSpec(BaseModel):
    """Size, 1-sigma spreads (km, km/s, per axis) and seed of a Monte Carlo run."""

    model_config = ConfigDict(frozen=True)

    n_samples: int = Field(ge=2)
    sigma_pos: PositiveFloat
    sigma_vel: PositiveFloat
    seed: int = Field(ge=0, lt=2**64)


@dataclass(frozen=True)
class Ensemble:
    """Samples of every epoch, shaped ``(n_epochs, n_samples, 6)``."""

    kind: TrajectoryKind
    epochs: npt.NDArray[np.float64]
    samples: npt.NDArray[np.float64]
    center: Body = Body.EARTH
    u_offset: float = 0.0

    def __post_init__(self) -> None:
        epochs = np.array(self.epochs, dtype=np.float64).reshape(-1)
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 3 or samples.shape[0] != len(epochs):
            raise InvalidArgument(
                f"expected samples shaped ({len(epochs)}, n_samples, n_dim), got {samples.shape}"
            )
        if np.any(np.diff(epochs) <= 0):
            raise InvalidArgument("ensemble epochs must be strictly increasing")
        epochs.setflags(write=False)
        samples.setflags(write=False)
        object.__setattr__(self, "kind", TrajectoryKind(self.kind))
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[1])

    @property
    def n_dim(self) -> int:
        return int(self.samples.shape[2])

    def at(self, index: int) -> Samples:
        return self.samples[index]


def sample_initial_ensemble(
    mean: CartesianState, spec: EnsembleSpec, units: CanonicalUnits
) -> Samples:
    """Gaussian draws around a canonical mean state.

    Sample ``i`` is drawn from its own substream of ``spec.seed``, so a sample
    does not depend on how many others are drawn or where.
    """
    sigmas = np.array(
        [spec.sigma_pos / units.l_star] * 3 + [spec.sigma_vel / units.v_star] * 3
    )
    center = mean.as_vector()
    return np.array(
        [
            center + sigmas * generator.standard_normal(6)
            for generator in sample_generators(spec.seed, spec.n_samples)
        ]
    )


def _propagate_sample(
    item: Tuple[int, Samples],
    kind: TrajectoryKind,
    config: DynamicsConfig,
    settings: OdeSettings,
    span: Tuple[float, float],
) -> Samples:
    sample_id, y0 = item
    t0 = span[0]
    try:
        state = CartesianState.from_vector(y0)
        if kind == TrajectoryKind.CARTESIAN:
            trajectory = propagate(kind, state, span, config, settings)
        else:
            elements = cart_to_mgeqoe(
                state, config.potential(state.r, t0), config.mu_central, epoch=t0
            )
            trajectory = propagate(kind, elements, span, config, settings)
    except NumericalError as e:
        raise SamplePropagationError(e.detail, sample_id=sample_id, epoch=e.epoch) from e
    return trajectory.states


def align_longitudes(samples: Samples, *, unwrap: bool = False) -> Samples:
    """Put the longitude of every sample on one branch.

    ``samples`` is shaped ``(n_epochs, n_samples, 6)``. Each sample is shifted
    by whole turns so that its first longitude lies within pi of the circular
    mean of the first epoch. Integrated longitudes are already continuous;
    ``unwrap`` is for series mapped from Cartesian states, where consecutive
    epochs are assumed to move the longitude by less than pi.
    """
    aligned = np.array(samples, dtype=np.float64)
    longitudes = aligned[:, :, 5]
    if unwrap:
        longitudes = np.unwrap(longitudes, axis=0)
    first = longitudes[0]
    reference = math.atan2(float(np.sin(first).sum()), float(np.cos(first).sum()))
    turns = np.round((first - reference) / (2.0 * np.pi))
    aligned[:, :, 5] = longitudes - 2.0 * np.pi * turns
    return aligned


def propagate_ensemble(
    samples: Samples,
    kind: TrajectoryKind,
    config: DynamicsConfig,
    settings: OdeSettings,
    epochs: npt.ArrayLike,
    *,
    n_jobs: Optional[int] = None,
) -> Ensemble:
    """Propagate every Cartesian sample from ``epochs[0]`` to ``epochs[-1]``.

    For element ensembles the samples are converted with the offset already on
    ``config``. Any failing sample aborts the whole run.
    """
    kind = TrajectoryKind(kind)
    epochs = np.asarray(epochs, dtype=np.float64)
    if len(epochs) < 2:
        raise InvalidArgument("an ensemble needs at least two epochs")
    samples = np.asarray(samples, dtype=np.float64)
    span = (float(epochs[0]), float(epochs[-1]))
    settings = settings.with_grid(epochs)

    log = logger.bind(kind=kind.value, n_samples=len(samples), n_epochs=len(epochs))
    log.info("propagating ensemble")
    propagate_one = partial(
        _propagate_sample, kind=kind, config=config, settings=settings, span=span
    )
    trajectories = parallel_map(propagate_one, list(enumerate(samples)), n_jobs)
    stacked = np.stack(trajectories, axis=1)
    if kind == TrajectoryKind.MGEQOE:
        stacked = align_longitudes(stacked)
    log.info("ensemble propagated")
    return Ensemble(
        kind=kind,
        epochs=epochs,
        samples=stacked,
        center=config.central,
        u_offset=config.perturbations.u_offset,
    )


def sample_mean_cov(samples: Samples) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Sample mean and covariance, normalized by N.

    >>> mean, cov = sample_mean_cov(np.array([[1.0, 2.0], [-1.0, -2.0]]))
    >>> mean.tolist(), cov.tolist()
    ([0.0, 0.0], [[1.0, 2.0], [2.0, 4.0]])
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or len(samples) < 2:
        raise InvalidArgument(f"expected at least two samples in rows, got shape {samples.shape}")
    mean = samples.mean(axis=0)
    centered = samples - mean
    cov = centered.T @ centered / len(samples)
    return mean, cov


def ensemble_mean_cov(
    ensemble: Ensemble,
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Per-epoch means ``(n_epochs, n_dim)`` and covariances ``(n_epochs, n_dim, n_dim)``."""
    moments = [sample_mean_cov(samples) for samples in ensemble.samples]
    return np.array([mean for mean, _ in moments]), np.array([cov for _, cov in moments])


def eigenspace_projection(samples: Samples) -> Samples:
    """Centered samples expressed in the eigenbasis of their covariance.

    Columns follow decreasing eigenvalues. Each eigenvector is signed so that
    its largest-magnitude component is positive.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if not np.all(np.isfinite(samples)):
        raise InvalidArgument("cannot project non-finite samples")
    mean, cov = sample_mean_cov(samples)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues, kind="stable")[::-1]
    eigenvectors = eigenvectors[:, order]
    pivots = np.argmax(np.abs(eigenvectors), axis=0)
    signs = np.sign(eigenvectors[pivots, np.arange(eigenvectors.shape[1])])
    signs[signs == 0] = 1.0
    projected: Samples = (samples - mean) @ (eigenvectors * signs)
    return projected
