"""Dynamics, adaptive integration and trajectory utilities."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
import numpy.typing as npt
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, PositiveFloat, field_validator, model_validator
from scipy.integrate import DOP853

from mgeqoe._typing import Epoch, RightHandSide, StateVector, Vector3
from mgeqoe.constants import DEFAULT_OFFSET_MARGIN, ECCENTRICITY_SINGULARITY_TOLERANCE
from mgeqoe.core import Body, CanonicalUnits, CartesianState
from mgeqoe.elements import (
    MGeqoeState,
    cart_to_mgeqoe,
    mgeqoe_to_cart,
    orbit_geometry,
    osculating_angular_momentum,
    unwrap_longitude,
)
from mgeqoe.ephemeris import BodyState, EphemerisProvider
from mgeqoe.exceptions import (
    DegenerateGeometry,
    GeneralizedEccentricitySingularity,
    GridMismatch,
    InvalidArgument,
    NumericalError,
    ProximityError,
    StepSizeError,
    UnknownBody,
)
from mgeqoe.forces import (
    PerturbationModel,
    energy_rate,
    offset_for_trajectory,
    potential_time_partial,
    project_forces,
    third_body_acceleration,
    third_body_potential,
)

logger = structlog.get_logger(__name__)

Span = Tuple[Epoch, Epoch]


class TrajectoryKind(str, Enum):
    CARTESIAN = "cartesian"
    MGEQOE = "mgeqoe"


class OdeSettings(BaseModel):
    """Step control of the embedded Runge-Kutta integrator (canonical time).

    An empty ``output_grid`` emits the two ends of the integration span only.
    """

    model_config = ConfigDict(frozen=True)

    rel_tol: PositiveFloat = 1e-12
    abs_tol: PositiveFloat = 1e-13
    h_init: PositiveFloat = 1e-4
    h_min: PositiveFloat = 1e-13
    # unbounded unless set
    h_max: PositiveFloat = math.inf
    output_grid: Tuple[float, ...] = ()

    @field_validator("output_grid")
    @classmethod
    def check_sorted(cls, grid: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("output grid must be strictly increasing")
        if not all(math.isfinite(t) for t in grid):
            raise ValueError("output grid must be finite")
        return grid

    @model_validator(mode="after")
    def check_steps(self) -> OdeSettings:
        if not self.h_min <= self.h_init <= self.h_max:
            raise ValueError(
                f"expected h_min <= h_init <= h_max, got {self.h_min}, {self.h_init}, {self.h_max}"
            )
        return self

    def with_grid(self, grid: npt.ArrayLike) -> OdeSettings:
        return OdeSettings(
            **{**self.model_dump(), "output_grid": tuple(float(t) for t in np.ravel(grid))}
        )

    def grid_for(self, span: Span) -> npt.NDArray[np.float64]:
        t0, t1 = span
        if not (math.isfinite(t0) and math.isfinite(t1)) or t1 <= t0:
            raise InvalidArgument(f"integration span must be finite and forward, got {span}")
        if not self.output_grid:
            return np.array([t0, t1])
        grid = np.array(self.output_grid)
        if grid[0] < t0 or grid[-1] > t1:
            raise InvalidArgument(f"output grid [{grid[0]}, {grid[-1]}] leaves the span {span}")
        return grid


@dataclass(frozen=True)
class Trajectory:
    kind: TrajectoryKind
    epochs: npt.NDArray[np.float64]
    states: npt.NDArray[np.float64]
    center: Body
    u_offset: float = 0.0

    def __post_init__(self) -> None:
        epochs = np.array(self.epochs, dtype=np.float64).reshape(-1)
        states = np.array(self.states, dtype=np.float64).reshape(-1, 6)
        if len(epochs) != len(states):
            raise InvalidArgument(f"{len(epochs)} epochs for {len(states)} states")
        if np.any(np.diff(epochs) <= 0):
            raise InvalidArgument("trajectory epochs must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise InvalidArgument("trajectory states must be finite")
        epochs.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "kind", TrajectoryKind(self.kind))
        object.__setattr__(self, "center", Body.from_name(self.center))
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def is_cartesian(self) -> bool:
        return self.kind == TrajectoryKind.CARTESIAN


@dataclass(frozen=True)
class DynamicsConfig:
    """Everything the right-hand sides need: central body, perturbations, ephemeris.

    ``ephemeris`` must be centered on ``central`` and know every perturbing body.
    """

    central: Body
    perturbations: PerturbationModel
    ephemeris: EphemerisProvider
    mu_central: float

    def __post_init__(self) -> None:
        if self.mu_central <= 0.0:
            raise InvalidArgument(f"mu_central must be strictly positive, got {self.mu_central}")
        if self.perturbations.central != self.central:
            raise InvalidArgument("perturbation model and dynamics disagree on the central body")
        if self.ephemeris.center != self.central:
            raise InvalidArgument(
                f"ephemeris is centered on {self.ephemeris.center.value}, "
                f"expected {self.central.value}"
            )
        missing = {term.body for term in self.perturbations.perturbing_bodies}.difference(
            self.ephemeris.bodies
        )
        if missing:
            raise UnknownBody(f"ephemeris cannot provide {sorted(b.value for b in missing)}")

    def with_offset(self, u_offset: float) -> DynamicsConfig:
        return dataclasses.replace(self, perturbations=self.perturbations.with_offset(u_offset))

    def body_state(self, body: Body, epoch: Epoch) -> BodyState:
        return self.ephemeris.state_of(body, epoch)

    def raw_potential(self, position: Vector3, epoch: Epoch) -> float:
        """Perturbing potential without the offset."""
        total = 0.0
        for term in self.perturbations.potential_bodies:
            r_CP, _ = self.body_state(term.body, epoch)
            total += third_body_potential(position, r_CP, term.mu)
        return total

    def potential(self, position: Vector3, epoch: Epoch) -> float:
        """Perturbing potential, offset included."""
        return self.raw_potential(position, epoch) + self.perturbations.u_offset

    def potential_time_partial(self, position: Vector3, epoch: Epoch) -> float:
        total = 0.0
        for term in self.perturbations.potential_bodies:
            r_CP, v_CP = self.body_state(term.body, epoch)
            total += potential_time_partial(position, r_CP, v_CP, term.mu)
        return total

    def accelerations(self, position: Vector3, epoch: Epoch) -> Tuple[Vector3, Vector3]:
        """Total perturbing force F and its non-potential part P, per unit mass."""
        total = np.zeros(3)
        external = np.zeros(3)
        for term in self.perturbations.potential_bodies:
            r_CP, _ = self.body_state(term.body, epoch)
            total += third_body_acceleration(position, r_CP, term.mu)
        for term in self.perturbations.force_bodies:
            r_CP, _ = self.body_state(term.body, epoch)
            acceleration = third_body_acceleration(position, r_CP, term.mu)
            total += acceleration
            external += acceleration
        return total, external


def cartesian_rhs(epoch: Epoch, state: StateVector, config: DynamicsConfig) -> StateVector:
    """Relative N-body equations of motion about the central body."""
    r, v = state[:3], state[3:6]
    radius = float(np.linalg.norm(r))
    if radius == 0.0:
        raise ProximityError("object at the center of the central body", epoch=epoch)
    acceleration = -config.mu_central * r / radius**3
    for term in config.perturbations.perturbing_bodies:
        r_CP, _ = config.body_state(term.body, epoch)
        acceleration = acceleration + third_body_acceleration(r, r_CP, term.mu)
    return np.concatenate([v, acceleration])


def mgeqoe_rhs(
    epoch: Epoch, elts: Union[MGeqoeState, StateVector], config: DynamicsConfig
) -> StateVector:
    """Time derivatives of the six elements under the configured perturbations."""
    if not isinstance(elts, MGeqoeState):
        elts = MGeqoeState.from_vector(elts)
    mu = config.mu_central
    geometry = orbit_geometry(elts, mu, epoch=epoch)
    r, X, Y, r_dot, h_tilde = geometry.r, geometry.X, geometry.Y, geometry.r_dot, geometry.h_tilde
    U = config.potential(geometry.position, epoch)
    h = osculating_angular_momentum(h_tilde, r, U, epoch=epoch)
    if h == 0.0:
        raise DegenerateGeometry("zero angular momentum", epoch=epoch)

    X_dot = r_dot * X / r - h * Y / (r * r)
    Y_dot = r_dot * Y / r + h * X / (r * r)
    state = CartesianState(
        r=geometry.position, v=X_dot * geometry.basis.e_X + Y_dot * geometry.basis.e_Y
    )
    F, P = config.accelerations(geometry.position, epoch)
    forces = project_forces(F, P, state)
    dU_dt = config.potential_time_partial(geometry.position, epoch)
    E_dot = energy_rate(dU_dt, r_dot, h, r, forces.P_r, forces.P_f)

    p_tilde, p1, p2, q1, q2 = elts.p_tilde, elts.p1, elts.p2, elts.q1, elts.q2
    eccentricity_squared = p1 * p1 + p2 * p2
    if eccentricity_squared >= 1.0 - ECCENTRICITY_SINGULARITY_TOLERANCE:
        raise GeneralizedEccentricitySingularity(
            f"p1^2 + p2^2 = {eccentricity_squared!r} leaves the elliptic branch", epoch=epoch
        )
    a_tilde = p_tilde / (1.0 - eccentricity_squared)
    sin_l, cos_l = math.sin(elts.L), math.cos(elts.L)

    Q = 2.0 * U - r * forces.F_r
    w = (r / h) * forces.F_h
    w_X = w * cos_l
    w_Y = w * sin_l
    # tan(i/2) sin(omega + theta)
    zeta = q2 * sin_l - q1 * cos_l
    w_h = -w * zeta
    s_squared = 1.0 + q1 * q1 + q2 * q2
    spin = (h - h_tilde) / (r * r)

    p_tilde_dot = (2.0 * h_tilde / mu) * (r * r * E_dot / h_tilde + r * r_dot * Q / h_tilde)
    p1_dot = (
        p2 * (spin - w_h)
        + (X / a_tilde + 2.0 * p2) * Q / h_tilde
        + (Y * (r + p_tilde) + r * r * p1) * E_dot / (h_tilde * h_tilde)
    )
    p2_dot = (
        p1 * (w_h - spin)
        - (Y / a_tilde + 2.0 * p1) * Q / h_tilde
        + (X * (r + p_tilde) + r * r * p2) * E_dot / (h_tilde * h_tilde)
    )
    q1_dot = 0.5 * w_Y * s_squared
    q2_dot = 0.5 * w_X * s_squared
    L_dot = h / (r * r) + w * zeta
    return np.array([p_tilde_dot, p1_dot, p2_dot, q1_dot, q2_dot, L_dot])


def integrate(
    rhs: RightHandSide,
    y0: npt.ArrayLike,
    span: Span,
    settings: OdeSettings,
    *,
    kind: TrajectoryKind = TrajectoryKind.CARTESIAN,
    center: Body = Body.EARTH,
    u_offset: float = 0.0,
) -> Trajectory:
    """Integrate ``rhs`` with an adaptive 8(5,3) Dormand-Prince pair.

    The solver is restarted on every output interval with the interval end as
    its bound, so states land exactly on the grid epochs; the step size
    accepted last is carried over to the next interval.

    Arguments
    ---------
        rhs:
            ``(epoch, y) -> dy/dt``
        y0:
            state at ``span[0]``
        span:
            ``(t0, t1)`` with ``t1 > t0``
        settings:
            tolerances, step bounds and output grid

    Keyword Arguments
    -----------------
        kind, center, u_offset:
            metadata recorded on the returned trajectory
    """
    grid = settings.grid_for(span)
    t = float(span[0])
    y = np.array(y0, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(y)):
        raise InvalidArgument("initial state must be finite")

    step = settings.h_init
    n_steps = 0
    states = []
    for target in grid:
        target = float(target)
        if target > t:
            solver = DOP853(
                rhs,
                t,
                y,
                target,
                rtol=settings.rel_tol,
                atol=settings.abs_tol,
                max_step=settings.h_max,
                first_step=min(step, target - t),
            )
            while solver.status == "running":
                message = solver.step()
                n_steps += 1
                if solver.status == "failed":
                    raise StepSizeError(f"integration failed: {message}", epoch=solver.t)
                if not np.all(np.isfinite(solver.y)):
                    raise NumericalError("integration produced a non-finite state", epoch=solver.t)
                if solver.status == "running":
                    if solver.h_abs < settings.h_min:
                        raise StepSizeError(
                            f"step size {solver.h_abs:.3e} fell below h_min {settings.h_min:.3e}",
                            epoch=solver.t,
                        )
                    step = min(solver.h_abs, settings.h_max)
            t, y = float(solver.t), np.array(solver.y)
        states.append(y.copy())

    logger.debug(
        "integrated", kind=kind.value, span=list(span), n_steps=n_steps, n_outputs=len(grid)
    )
    return Trajectory(
        kind=kind, epochs=grid, states=np.array(states), center=center, u_offset=u_offset
    )


def propagate(
    kind: TrajectoryKind,
    ic: Union[CartesianState, MGeqoeState],
    span: Span,
    config: DynamicsConfig,
    settings: OdeSettings,
) -> Trajectory:
    """Propagate an initial state with the right-hand side matching ``kind``.

    For element propagation the potential offset must already be set on ``config``.
    """
    kind = TrajectoryKind(kind)
    if kind == TrajectoryKind.CARTESIAN:
        if not isinstance(ic, CartesianState):
            raise InvalidArgument("Cartesian propagation expects a CartesianState")

        def rhs(t: Epoch, y: StateVector) -> StateVector:
            return cartesian_rhs(t, y, config)

    else:
        if not isinstance(ic, MGeqoeState):
            raise InvalidArgument("element propagation expects an MGeqoeState")

        def rhs(t: Epoch, y: StateVector) -> StateVector:
            return mgeqoe_rhs(t, y, config)

    return integrate(
        rhs,
        ic.as_vector(),
        span,
        settings,
        kind=kind,
        center=config.central,
        u_offset=config.perturbations.u_offset,
    )


def to_cartesian(traj: Trajectory, config: DynamicsConfig) -> Trajectory:
    """Map an element trajectory to Cartesian states with the offset of ``config``."""
    if traj.is_cartesian:
        return traj
    states = [
        mgeqoe_to_cart(
            MGeqoeState.from_vector(y), config.mu_central, config.potential, float(t)
        ).as_vector()
        for t, y in zip(traj.epochs, traj.states)
    ]
    return dataclasses.replace(traj, kind=TrajectoryKind.CARTESIAN, states=np.array(states))


def to_mgeqoe(traj: Trajectory, config: DynamicsConfig) -> Trajectory:
    """Map a Cartesian trajectory to elements, with an unwrapped longitude."""
    if not traj.is_cartesian:
        return traj
    states = np.array(
        [
            cart_to_mgeqoe(
                CartesianState.from_vector(y),
                config.potential(y[:3], float(t)),
                config.mu_central,
                epoch=float(t),
            ).as_vector()
            for t, y in zip(traj.epochs, traj.states)
        ]
    )
    states[:, 5] = unwrap_longitude(states[:, 5])
    return dataclasses.replace(
        traj,
        kind=TrajectoryKind.MGEQOE,
        states=states,
        u_offset=config.perturbations.u_offset,
    )


@dataclass(frozen=True)
class MGeqoeInitialization:
    config: DynamicsConfig
    elements: MGeqoeState
    reference: Trajectory


def initialize_mgeqoe(
    ic: CartesianState,
    span: Span,
    config: DynamicsConfig,
    settings: OdeSettings,
    *,
    margin: float = DEFAULT_OFFSET_MARGIN,
) -> MGeqoeInitialization:
    """Prepare an element propagation.

    The Cartesian state is first propagated over ``span`` on the output grid,
    the potential offset is selected along that reference trajectory and the
    initial elements are computed with the offset-inclusive potential. Without
    potential bodies the potential vanishes and no offset is needed.
    """
    reference = propagate(TrajectoryKind.CARTESIAN, ic, span, config, settings)
    if config.perturbations.potential_bodies:
        u_offset = offset_for_trajectory(
            reference, config.raw_potential, config.mu_central, margin=margin
        )
    else:
        u_offset = 0.0
    config = config.with_offset(u_offset)
    t0 = float(span[0])
    elements = cart_to_mgeqoe(ic, config.potential(ic.r, t0), config.mu_central, epoch=t0)
    reference = dataclasses.replace(reference, u_offset=u_offset)
    return MGeqoeInitialization(config=config, elements=elements, reference=reference)


def periapsis_index(traj: Trajectory, config: Optional[DynamicsConfig] = None) -> int:
    """Grid index of the smallest radius."""
    if not traj.is_cartesian:
        if config is None:
            raise InvalidArgument("an element trajectory needs its dynamics to find periapsis")
        traj = to_cartesian(traj, config)
    return int(np.argmin(np.linalg.norm(traj.states[:, :3], axis=1)))


def compare_trajectories(
    a: Trajectory,
    b: Trajectory,
    units: CanonicalUnits,
    config: Optional[DynamicsConfig] = None,
) -> pd.DataFrame:
    """Per-epoch position (km) and velocity (km/s) differences.

    Element trajectories are mapped to Cartesian states with ``config`` first.
    """
    if a.center != b.center:
        raise GridMismatch(
            f"trajectories have different centers {a.center.value}, {b.center.value}"
        )
    if len(a) != len(b) or not np.array_equal(a.epochs, b.epochs):
        raise GridMismatch("trajectories are not sampled on the same epochs")
    cartesian = []
    for traj in (a, b):
        if not traj.is_cartesian and config is None:
            raise InvalidArgument("comparing element trajectories requires a dynamics config")
        cartesian.append(traj if traj.is_cartesian else to_cartesian(traj, _require(config)))
    difference = cartesian[0].states - cartesian[1].states
    return pd.DataFrame(
        {
            "epoch": a.epochs,
            "pos_err_km": np.linalg.norm(difference[:, :3], axis=1) * units.l_star,
            "vel_err_kms": np.linalg.norm(difference[:, 3:], axis=1) * units.v_star,
        }
    )


def _require(config: Optional[DynamicsConfig]) -> DynamicsConfig:
    if config is None:
        raise InvalidArgument("missing dynamics config")
    return config


def sample_grid(span: Span, step: float) -> npt.NDArray[np.float64]:
    """Uniform grid from ``span[0]`` with spacing ``step``, ending exactly at ``span[1]``.

    >>> sample_grid((0.0, 1.0), 0.4).tolist()
    [0.0, 0.4, 0.8, 1.0]
    """
    t0, t1 = span
    if step <= 0.0 or t1 <= t0:
        raise InvalidArgument(f"invalid grid: span {span}, step {step}")
    count = int(math.floor((t1 - t0) / step * (1.0 + 1e-12)))
    grid = t0 + step * np.arange(count + 1)
    if t1 - grid[-1] > 1e-9 * step:
        grid = np.append(grid, t1)
    else:
        grid[-1] = t1
    return grid
