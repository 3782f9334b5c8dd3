"""Third-body potentials and forces, energy bookkeeping and the potential offset."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Tuple

import numpy as np
import numpy.typing as npt
import structlog
from pydantic import BaseModel, ConfigDict, PositiveFloat, model_validator

from mgeqoe._typing import PotentialFunction, Vector3
from mgeqoe.constants import DEFAULT_OFFSET_MARGIN, PROXIMITY_TOLERANCE
from mgeqoe.core import Body, CartesianState, orbital_frame_basis
from mgeqoe.elements import radial_velocity
from mgeqoe.exceptions import InvalidArgument, ProximityError

if TYPE_CHECKING:
    from mgeqoe.propagation import Trajectory

logger = structlog.get_logger(__name__)


class BodyTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    body: Body
    mu: PositiveFloat


class PerturbationModel(BaseModel):
    """Perturbations acting on an object orbiting ``central``.

    Bodies in ``potential_bodies`` enter the perturbing potential U, bodies in
    ``force_bodies`` act as external forces P. ``u_offset`` is added to U.
    """

    model_config = ConfigDict(frozen=True)

    central: Body
    potential_bodies: Tuple[BodyTerm, ...] = ()
    force_bodies: Tuple[BodyTerm, ...] = ()
    u_offset: float = 0.0

    @model_validator(mode="after")
    def check_bodies(self) -> PerturbationModel:
        bodies = [term.body for term in self.potential_bodies + self.force_bodies]
        if self.central in bodies:
            raise ValueError(f"central body {self.central.value} cannot perturb itself")
        if len(set(bodies)) != len(bodies):
            raise ValueError("a perturbing body may appear only once")
        if not math.isfinite(self.u_offset):
            raise ValueError(f"u_offset must be finite, got {self.u_offset}")
        return self

    @property
    def perturbing_bodies(self) -> Tuple[BodyTerm, ...]:
        return self.potential_bodies + self.force_bodies

    def with_offset(self, u_offset: float) -> PerturbationModel:
        return self.model_copy(update={"u_offset": float(u_offset)})


@dataclass(frozen=True)
class ForceProjection:
    F_r: float
    F_f: float
    F_h: float
    P_r: float
    P_f: float
    P_h: float


def _check_proximity(r: Vector3, r_CP: Vector3) -> Tuple[npt.NDArray[np.float64], float, float]:
    offset = np.asarray(r, dtype=np.float64) - np.asarray(r_CP, dtype=np.float64)
    distance = float(np.linalg.norm(offset))
    perturber_distance = float(np.linalg.norm(r_CP))
    if distance <= PROXIMITY_TOLERANCE or perturber_distance <= PROXIMITY_TOLERANCE:
        raise ProximityError(
            f"object at distance {distance:.3e} from the perturber, "
            f"perturber at distance {perturber_distance:.3e} from the central body"
        )
    return offset, distance, perturber_distance


def third_body_potential(r: Vector3, r_CP: Vector3, mu_P: float) -> float:
    """Third-body potential ``-mu_P (1/|r - r_CP| - r . r_CP / |r_CP|^3)``.

    The sign makes ``-grad U`` the usual tidal acceleration.

    >>> third_body_potential(np.zeros(3), np.array([2.0, 0.0, 0.0]), 1.0)
    -0.5
    """
    _, distance, perturber_distance = _check_proximity(r, r_CP)
    return float(-mu_P * (1.0 / distance - np.dot(r, r_CP) / perturber_distance**3))


def third_body_acceleration(r: Vector3, r_CP: Vector3, mu_P: float) -> Vector3:
    """Tidal acceleration of a third body on an object relative to the central body."""
    offset, distance, perturber_distance = _check_proximity(r, r_CP)
    acceleration: Vector3 = mu_P * (-offset / distance**3 - r_CP / perturber_distance**3)
    return acceleration


def potential_time_partial(r: Vector3, r_CP: Vector3, v_CP: Vector3, mu_P: float) -> float:
    """Time partial of ``third_body_potential`` at fixed ``r``.

    ``v_CP`` is the perturber velocity relative to the central body.
    """
    offset, distance, perturber_distance = _check_proximity(r, r_CP)
    r_dot_rcp = float(np.dot(r, r_CP))
    return float(
        -mu_P
        * (
            np.dot(offset, v_CP) / distance**3
            - np.dot(r, v_CP) / perturber_distance**3
            + 3.0 * r_dot_rcp * np.dot(r_CP, v_CP) / perturber_distance**5
        )
    )


def project_forces(F_total: Vector3, P_ext: Vector3, state: CartesianState) -> ForceProjection:
    """Project the total and external forces onto the orbital frame."""
    e_r, e_f, e_h = orbital_frame_basis(state)
    return ForceProjection(
        F_r=float(np.dot(F_total, e_r)),
        F_f=float(np.dot(F_total, e_f)),
        F_h=float(np.dot(F_total, e_h)),
        P_r=float(np.dot(P_ext, e_r)),
        P_f=float(np.dot(P_ext, e_f)),
        P_h=float(np.dot(P_ext, e_h)),
    )


def energy_rate(dU_dt: float, r_dot: float, h: float, r: float, P_r: float, P_f: float) -> float:
    """Rate of change of the total energy.

    >>> energy_rate(0.0, 0.0, 1.0, 2.0, 0.0, 0.5)
    0.25
    """
    if r <= 0.0:
        raise InvalidArgument(f"radius must be strictly positive, got {r}")
    return dU_dt + r_dot * P_r + (h / r) * P_f


def instantaneous_offset(state: CartesianState, U: float, mu: float) -> float:
    """Smallest offset that keeps the effective potential non-negative at ``state``.

    >>> instantaneous_offset(CartesianState(r=[1, 0, 0], v=[0, 1, 0]), -1.0, 1.0)
    1.0
    """
    r = state.radius
    if r <= 0.0:
        raise InvalidArgument("offset undefined at zero radius")
    h_vec = np.cross(state.r, state.v)
    h_squared = float(np.dot(h_vec, h_vec))
    r_dot = radial_velocity(state)
    return -U - h_squared / (2.0 * r * r) - r_dot * r_dot / 4.0 + mu / (2.0 * r)


def offset_for_trajectory(
    traj: Trajectory,
    potential_at: PotentialFunction,
    mu: float,
    *,
    margin: float = DEFAULT_OFFSET_MARGIN,
) -> float:
    """Constant potential offset valid along a whole Cartesian trajectory.

    Arguments
    ---------
        traj:
            Cartesian trajectory, usually the pre-propagation pass
        potential_at:
            perturbing potential without offset
        mu:
            gravitational parameter of the central body

    Keyword Arguments
    -----------------
        margin:
            added to the maximum of the instantaneous offsets
    """
    if len(traj.epochs) == 0:
        raise InvalidArgument("cannot select an offset from an empty trajectory")
    if not traj.is_cartesian:
        raise InvalidArgument("the potential offset is selected along a Cartesian trajectory")

    offsets = [
        instantaneous_offset(
            CartesianState.from_vector(y), potential_at(np.asarray(y[:3]), float(t)), mu
        )
        for t, y in zip(traj.epochs, traj.states)
    ]
    worst = int(np.argmax(offsets))
    u_offset = offsets[worst] + margin
    logger.info(
        "selected potential offset",
        u_offset=u_offset,
        worst_epoch=float(traj.epochs[worst]),
        n_epochs=len(offsets),
    )
    return u_offset
