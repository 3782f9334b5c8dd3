"""Scenario orchestration behind the command line."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
import structlog

from mgeqoe.constants import DEFAULT_ALPHA, SECONDS_PER_DAY
from mgeqoe.core import (
    Body,
    BodyConstants,
    CanonicalUnits,
    CartesianState,
    dimensionalize,
    inertial_to_rotating,
    load_constants,
    nondimensionalize,
)
from mgeqoe.elements import keplerian_to_cartesian
from mgeqoe.ephemeris import (
    AnalyticEphemeris,
    EphemerisProvider,
    TabulatedEphemeris,
    centered_on,
    default_analytic_config,
)
from mgeqoe.exceptions import InvalidArgument, MgeqoeError
from mgeqoe.forces import BodyTerm, PerturbationModel
from mgeqoe.io import (
    METADATA_SUFFIX,
    STATE_COLUMNS,
    Outputs,
    frame_to_csv_text,
    metadata_text,
    trajectory_metadata,
    trajectory_to_frame,
)
from mgeqoe.propagation import (
    DynamicsConfig,
    OdeSettings,
    Span,
    Trajectory,
    TrajectoryKind,
    compare_trajectories,
    initialize_mgeqoe,
    periapsis_index,
    propagate,
    sample_grid,
    to_cartesian,
    to_mgeqoe,
)
from mgeqoe.scenario import Scenario
from mgeqoe.uncertainty import (
    Ensemble,
    eigenspace_projection,
    hz_series,
    propagate_ensemble,
    sample_initial_ensemble,
)

logger = structlog.get_logger(__name__)

DEFAULT_GRID_INTERVALS = 1000
ELEMENT_COLUMNS = ["p_tilde", "p1", "p2", "q1", "q2", "L"]
DIMENSIONAL_COLUMNS = ["x_km", "y_km", "z_km", "vx_kms", "vy_kms", "vz_kms"]


@dataclass(frozen=True)
class ScenarioRun:
    """A scenario resolved into canonical quantities."""

    scenario: Scenario
    constants: BodyConstants
    units: CanonicalUnits
    config: DynamicsConfig
    initial_state: CartesianState
    span: Span
    settings: OdeSettings

    @property
    def grid(self) -> npt.NDArray[np.float64]:
        return np.array(self.settings.output_grid)


def build_ephemeris(scenario: Scenario, constants: BodyConstants) -> EphemerisProvider:
    section = scenario.ephemeris
    provider: EphemerisProvider
    if section.provider == "tabulated":
        assert section.file is not None  # nosec
        provider = TabulatedEphemeris.from_csv(section.file, section.center)
    else:
        provider = AnalyticEphemeris(
            default_analytic_config(
                constants,
                moon_phase=math.radians(section.moon_phase_deg),
                sun_phase=math.radians(section.sun_phase_deg),
            )
        )
    return centered_on(provider, scenario.central)


def build_perturbations(scenario: Scenario, constants: BodyConstants) -> PerturbationModel:
    """Earth or Moon as third-body potential, the Sun as an external force."""
    central = scenario.central
    if central == Body.SUN:
        raise InvalidArgument("the central body must be the Earth or the Moon")
    other = Body.MOON if central == Body.EARTH else Body.EARTH
    potential_bodies = []
    force_bodies = []
    if scenario.forces.third_body:
        potential_bodies.append(BodyTerm(body=other, mu=constants.canonical_mu(other)))
    if scenario.forces.sun:
        force_bodies.append(BodyTerm(body=Body.SUN, mu=constants.canonical_mu(Body.SUN)))
    return PerturbationModel(
        central=central,
        potential_bodies=tuple(potential_bodies),
        force_bodies=tuple(force_bodies),
    )


def build_initial_state(
    scenario: Scenario, constants: BodyConstants, units: CanonicalUnits
) -> CartesianState:
    section = scenario.initial_state
    if section.is_cartesian:
        state_km = CartesianState(r=section.position_km, v=section.velocity_kms)
    else:
        assert section.a_km is not None and section.e is not None  # nosec
        state_km = keplerian_to_cartesian(
            section.a_km,
            section.e,
            math.radians(section.i_deg),
            math.radians(section.raan_deg),
            math.radians(section.argp_deg),
            math.radians(section.nu_deg),
            constants.mu(scenario.central),
        )
    return nondimensionalize(state_km, units)


def prepare(scenario: Scenario) -> ScenarioRun:
    constants = load_constants(scenario.constants) if scenario.constants else BodyConstants()
    units = constants.units()
    t0 = scenario.initial_state.epoch_days * SECONDS_PER_DAY / units.t_star
    span = (t0, t0 + scenario.propagation.span_days * SECONDS_PER_DAY / units.t_star)
    if scenario.propagation.grid_step_s is None:
        step = (span[1] - span[0]) / DEFAULT_GRID_INTERVALS
    else:
        step = scenario.propagation.grid_step_s / units.t_star
    config = DynamicsConfig(
        central=scenario.central,
        perturbations=build_perturbations(scenario, constants),
        ephemeris=build_ephemeris(scenario, constants),
        mu_central=constants.canonical_mu(scenario.central),
    )
    return ScenarioRun(
        scenario=scenario,
        constants=constants,
        units=units,
        config=config,
        initial_state=build_initial_state(scenario, constants, units),
        span=span,
        settings=scenario.ode.with_grid(sample_grid(span, step)),
    )


def _dimensional_frame(epochs: npt.ArrayLike, states: npt.ArrayLike) -> pd.DataFrame:
    df = pd.DataFrame(np.asarray(states), columns=DIMENSIONAL_COLUMNS)
    df.insert(0, "epoch", np.asarray(epochs))
    return df


def inertial_view(traj: Trajectory, units: CanonicalUnits) -> pd.DataFrame:
    states = [
        dimensionalize(CartesianState.from_vector(y), units).as_vector() for y in traj.states
    ]
    return _dimensional_frame(traj.epochs, states)


def rotating_view(
    traj: Trajectory, config: DynamicsConfig, units: CanonicalUnits
) -> Optional[pd.DataFrame]:
    """Earth-Moon rotating-frame view, or None when the ephemeris lacks the Moon."""
    ephemeris = config.ephemeris
    known = ephemeris.bodies | {ephemeris.center}
    if not {Body.EARTH, Body.MOON} <= known:
        logger.warning("rotating view skipped, ephemeris lacks the Earth or the Moon")
        return None
    states = []
    for t, y in zip(traj.epochs, traj.states):
        earth = CartesianState(*ephemeris.state_of(Body.EARTH, float(t)))
        moon = CartesianState(*ephemeris.state_of(Body.MOON, float(t)))
        rotating = inertial_to_rotating(CartesianState.from_vector(y), earth, moon, float(t))
        states.append(dimensionalize(rotating, units).as_vector())
    return _dimensional_frame(traj.epochs, states)


def element_history(traj: Trajectory) -> pd.DataFrame:
    df = pd.DataFrame(traj.states, columns=ELEMENT_COLUMNS)
    df.insert(0, "epoch", traj.epochs)
    return df


def _run_metadata(run: ScenarioRun, **extra: object) -> Dict[str, object]:
    return {
        "scenario": run.scenario.name,
        "l_star_km": run.units.l_star,
        "t_star_s": run.units.t_star,
        "v_star_kms": run.units.v_star,
        **extra,
    }


@dataclass(frozen=True)
class PropagationResult:
    trajectories: Dict[TrajectoryKind, Trajectory]
    cartesian: Dict[TrajectoryKind, Trajectory]
    elements: Dict[TrajectoryKind, Trajectory]
    errors: Optional[pd.DataFrame]
    u_offset: float


def run_propagation(run: ScenarioRun) -> PropagationResult:
    """Cartesian pre-pass, offset selection, element initialization, requested runs."""
    kinds = run.scenario.propagation.kinds
    init = initialize_mgeqoe(run.initial_state, run.span, run.config, run.settings)
    config = init.config
    trajectories: Dict[TrajectoryKind, Trajectory] = {}
    if TrajectoryKind.CARTESIAN in kinds:
        trajectories[TrajectoryKind.CARTESIAN] = init.reference
    if TrajectoryKind.MGEQOE in kinds:
        trajectories[TrajectoryKind.MGEQOE] = propagate(
            TrajectoryKind.MGEQOE, init.elements, run.span, config, run.settings
        )
    cartesian = {kind: to_cartesian(traj, config) for kind, traj in trajectories.items()}
    elements = {kind: to_mgeqoe(traj, config) for kind, traj in trajectories.items()}
    errors = None
    if len(trajectories) == 2:
        errors = compare_trajectories(
            cartesian[TrajectoryKind.MGEQOE], cartesian[TrajectoryKind.CARTESIAN], run.units
        )
        logger.info(
            "cross-propagator errors",
            max_pos_err_km=float(errors["pos_err_km"].max()),
            max_vel_err_kms=float(errors["vel_err_kms"].max()),
        )
    return PropagationResult(
        trajectories=trajectories,
        cartesian=cartesian,
        elements=elements,
        errors=errors,
        u_offset=config.perturbations.u_offset,
    )


def propagation_outputs(run: ScenarioRun, result: PropagationResult) -> Outputs:
    outputs: Outputs = {}
    for kind, traj in result.trajectories.items():
        name = kind.value
        outputs[f"trajectory_{name}.csv"] = frame_to_csv_text(trajectory_to_frame(traj))
        outputs[f"trajectory_{name}{METADATA_SUFFIX}"] = metadata_text(
            trajectory_metadata(traj, **_run_metadata(run))
        )
        outputs[f"inertial_{name}.csv"] = frame_to_csv_text(
            inertial_view(result.cartesian[kind], run.units)
        )
        rotating = rotating_view(result.cartesian[kind], run.config, run.units)
        if rotating is not None:
            outputs[f"rotating_{name}.csv"] = frame_to_csv_text(rotating)
        outputs[f"elements_{name}.csv"] = frame_to_csv_text(element_history(result.elements[kind]))
    if result.errors is not None:
        outputs["errors.csv"] = frame_to_csv_text(result.errors)
    return outputs


def snapshot_indices(
    run: ScenarioRun, reference: Trajectory, epochs_days: Optional[Sequence[float]] = None
) -> List[int]:
    """Grid indices for pairs-plot snapshots.

    Requested epochs (days since the initial epoch) map to the closest grid
    epoch; by default the first epoch, the periapsis and the last epoch are used.
    """
    grid = run.grid
    if not epochs_days:
        indices = [0, periapsis_index(reference), len(grid) - 1]
    else:
        indices = []
        for days in epochs_days:
            t = run.span[0] + days * SECONDS_PER_DAY / run.units.t_star
            if not run.span[0] <= t <= run.span[1]:
                raise InvalidArgument(f"snapshot epoch {days} days lies outside the span")
            indices.append(int(np.argmin(np.abs(grid - t))))
    return sorted(set(indices))


@dataclass(frozen=True)
class MonteCarloResult:
    ensembles: Dict[TrajectoryKind, Ensemble]
    hz: Dict[TrajectoryKind, pd.DataFrame]
    snapshots: List[int]
    u_offset: float


def run_montecarlo(
    run: ScenarioRun,
    *,
    alpha: float = DEFAULT_ALPHA,
    epochs_days: Optional[Sequence[float]] = None,
    hz_subsample: Optional[int] = None,
    n_jobs: Optional[int] = None,
) -> MonteCarloResult:
    spec = run.scenario.ensemble
    if spec is None:
        raise InvalidArgument(f"scenario {run.scenario.name} has no [ensemble] section")
    init = initialize_mgeqoe(run.initial_state, run.span, run.config, run.settings)
    samples = sample_initial_ensemble(run.initial_state, spec, run.units)

    ensembles: Dict[TrajectoryKind, Ensemble] = {}
    hz: Dict[TrajectoryKind, pd.DataFrame] = {}
    for kind in run.scenario.propagation.kinds:
        config = init.config if kind == TrajectoryKind.MGEQOE else run.config
        ensemble = propagate_ensemble(
            samples, kind, config, run.settings, run.grid, n_jobs=n_jobs
        )
        ensembles[kind] = ensemble
        hz[kind] = hz_series(ensemble, alpha, subsample=hz_subsample, n_jobs=n_jobs).to_frame()
    return MonteCarloResult(
        ensembles=ensembles,
        hz=hz,
        snapshots=snapshot_indices(run, init.reference, epochs_days),
        u_offset=init.config.perturbations.u_offset,
    )


def _snapshot_frame(ensemble: Ensemble, indices: Sequence[int]) -> pd.DataFrame:
    frames = []
    for index in indices:
        df = pd.DataFrame(ensemble.at(index), columns=STATE_COLUMNS)
        df.insert(0, "epoch", ensemble.epochs[index])
        df.insert(0, "sample_id", np.arange(ensemble.n_samples))
        frames.append(df)
    return pd.concat(frames, ignore_index=True)


def _eigenspace_frame(ensemble: Ensemble, index: int) -> pd.DataFrame:
    projected = eigenspace_projection(ensemble.at(index))
    df = pd.DataFrame(projected, columns=[f"lambda_{i}" for i in range(1, 7)])
    df.insert(0, "sample_id", np.arange(ensemble.n_samples))
    return df


def montecarlo_outputs(run: ScenarioRun, result: MonteCarloResult) -> Outputs:
    spec = run.scenario.ensemble
    assert spec is not None  # nosec
    outputs: Outputs = {}
    for kind, ensemble in result.ensembles.items():
        name = kind.value
        outputs[f"hz_{name}.csv"] = frame_to_csv_text(result.hz[kind])
        outputs[f"ensemble_{name}.csv"] = frame_to_csv_text(
            _snapshot_frame(ensemble, result.snapshots)
        )
        outputs[f"ensemble_{name}{METADATA_SUFFIX}"] = metadata_text(
            _run_metadata(
                run,
                kind=name,
                center=ensemble.center.value,
                seed=spec.seed,
                n_samples=spec.n_samples,
                sigma_pos_km=spec.sigma_pos,
                sigma_vel_kms=spec.sigma_vel,
                u_offset=ensemble.u_offset,
            )
        )
        for position, index in enumerate(result.snapshots):
            outputs[f"eigenspace_{name}_t{position}.csv"] = frame_to_csv_text(
                _eigenspace_frame(ensemble, index)
            )
            epoch = float(ensemble.epochs[index])
            outputs[f"eigenspace_{name}_t{position}{METADATA_SUFFIX}"] = metadata_text(
                _run_metadata(
                    run,
                    kind=name,
                    center=ensemble.center.value,
                    grid_index=index,
                    epoch=epoch,
                    epoch_days=epoch * run.units.t_star / SECONDS_PER_DAY,
                )
            )
    return outputs


def failure_epoch(error: MgeqoeError, run: Optional[ScenarioRun]) -> Optional[Tuple[float, float]]:
    """Canonical epoch of a failure and the matching days, when known."""
    epoch = getattr(error, "epoch", None)
    if epoch is None or run is None:
        return None
    return epoch, epoch * run.units.t_star / SECONDS_PER_DAY
