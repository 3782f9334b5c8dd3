"""Modified generalized equinoctial elements and their Cartesian transformations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt

from mgeqoe._typing import Epoch, PotentialFunction, StateVector, Vector3
from mgeqoe.constants import RETROGRADE_TOLERANCE
from mgeqoe.core import CartesianState, orbital_frame_basis
from mgeqoe.exceptions import (
    HyperbolicBranch,
    InconsistentPotential,
    InvalidArgument,
    NegativeEffectivePotential,
    SingularOrientation,
)


@dataclass(frozen=True)
class MGeqoeState:
    """The six elements ``(p_tilde, p1, p2, q1, q2, L)``.

    ``L`` is the true longitude in radians. Along a trajectory it is kept
    unwrapped; ``cart_to_mgeqoe`` reports it in (-pi, pi].
    """

    p_tilde: float
    p1: float
    p2: float
    q1: float
    q2: float
    L: float

    @classmethod
    def from_vector(cls, y: StateVector) -> MGeqoeState:
        return cls(*(float(value) for value in np.asarray(y).reshape(6)))

    def as_vector(self) -> StateVector:
        return np.array(
            [self.p_tilde, self.p1, self.p2, self.q1, self.q2, self.L], dtype=np.float64
        )


@dataclass(frozen=True)
class EquinoctialBasis:
    e_X: Vector3
    e_Y: Vector3
    e_Z: Vector3


@dataclass(frozen=True)
class GeneralizedQuantities:
    """Intermediate quantities of the Cartesian to element transformation."""

    U: float
    U_eff: float
    h: float
    h_tilde: float
    e_tilde: Vector3
    E_total: float
    r: float
    r_dot: float
    Psi: float


@dataclass(frozen=True)
class OrbitGeometry:
    """Position-level quantities rebuilt from elements, without any potential."""

    r: float
    X: float
    Y: float
    position: Vector3
    basis: EquinoctialBasis
    h_tilde: float
    r_dot: float


def effective_potential(state: CartesianState, U: float) -> float:
    """Effective potential ``h^2 / (2 r^2) + U``.

    >>> effective_potential(CartesianState(r=[1, 0, 0], v=[0, 1, 0]), -0.5)
    0.0
    """
    r2 = float(np.dot(state.r, state.r))
    h = np.cross(state.r, state.v)
    return float(np.dot(h, h)) / (2.0 * r2) + U


def generalized_angular_momentum(
    r: float, U_eff: float, *, epoch: Optional[Epoch] = None
) -> float:
    """Generalized angular momentum ``sqrt(2 r^2 U_eff)``.

    A negative effective potential means the potential offset is missing or too small.

    >>> generalized_angular_momentum(1.0, 0.5)
    1.0
    """
    if U_eff < 0.0:
        raise NegativeEffectivePotential(
            f"effective potential {U_eff:.6e} is negative, raise the potential offset",
            epoch=epoch,
        )
    return math.sqrt(2.0 * r * r * U_eff)


def radial_velocity(state: CartesianState) -> float:
    return float(np.dot(state.r, state.v) / np.linalg.norm(state.r))


def generalized_eccentricity(state: CartesianState, h_tilde: float, mu: float) -> Vector3:
    """Generalized eccentricity vector, in the orbital plane."""
    if mu <= 0.0:
        raise InvalidArgument(f"mu must be strictly positive, got {mu}")
    e_r, e_f, _ = orbital_frame_basis(state)
    r = np.linalg.norm(state.r)
    v_tilde = radial_velocity(state) * e_r + (h_tilde / r) * e_f
    e_tilde: Vector3 = np.cross(v_tilde, np.cross(state.r, v_tilde)) / mu - e_r
    return e_tilde


def equinoctial_basis(q1: float, q2: float) -> EquinoctialBasis:
    """Axes of the equinoctial frame.

    >>> basis = equinoctial_basis(1.0, 0.0)
    >>> basis.e_Z.tolist()
    [1.0, 0.0, 0.0]
    """
    q1q1, q2q2, q1q2 = q1 * q1, q2 * q2, q1 * q2
    scale = 1.0 / (1.0 + q1q1 + q2q2)
    return EquinoctialBasis(
        # 0.0 - x keeps zero components positive
        e_X=scale * np.array([1.0 - q1q1 + q2q2, 2.0 * q1q2, 0.0 - 2.0 * q1]),
        e_Y=scale * np.array([2.0 * q1q2, 1.0 + q1q1 - q2q2, 2.0 * q2]),
        e_Z=scale * np.array([2.0 * q1, 0.0 - 2.0 * q2, 1.0 - q1q1 - q2q2]),
    )


def total_energy(state: CartesianState, U: float, mu: float) -> float:
    """Keplerian energy plus the perturbing potential."""
    return float(0.5 * np.dot(state.v, state.v) - mu / np.linalg.norm(state.r) + U)


def generalized_quantities(
    state: CartesianState, U: float, mu: float, *, epoch: Optional[Epoch] = None
) -> GeneralizedQuantities:
    """Evaluate every generalized quantity at a Cartesian state.

    Arguments
    ---------
        state:
            canonical Cartesian state relative to the central body
        U:
            perturbing potential at the state, offset included
        mu:
            gravitational parameter of the central body

    Keyword Arguments
    -----------------
        epoch:
            only used to label errors
    """
    r = float(np.linalg.norm(state.r))
    if r == 0.0:
        raise InvalidArgument("generalized quantities undefined at zero radius")
    U_eff = effective_potential(state, U)
    h_tilde = generalized_angular_momentum(r, U_eff, epoch=epoch)
    e_tilde = generalized_eccentricity(state, h_tilde, mu)
    basis = equinoctial_basis(*_orientation(state))
    return GeneralizedQuantities(
        U=U,
        U_eff=U_eff,
        h=float(np.linalg.norm(np.cross(state.r, state.v))),
        h_tilde=h_tilde,
        e_tilde=e_tilde,
        E_total=total_energy(state, U, mu),
        r=r,
        r_dot=radial_velocity(state),
        Psi=math.atan2(float(np.dot(e_tilde, basis.e_Y)), float(np.dot(e_tilde, basis.e_X))),
    )


def _orientation(state: CartesianState, epoch: Optional[Epoch] = None) -> Tuple[float, float]:
    _, _, e_h = orbital_frame_basis(state)
    denominator = 1.0 + e_h[2]
    if denominator <= RETROGRADE_TOLERANCE:
        raise SingularOrientation(
            "equinoctial elements are singular for retrograde equatorial orbits", epoch=epoch
        )
    return float(e_h[0] / denominator), float(-e_h[1] / denominator)


def cart_to_mgeqoe(
    state: CartesianState, U: float, mu: float, *, epoch: Optional[Epoch] = None
) -> MGeqoeState:
    """Transform a Cartesian state into elements.

    Examples
    --------
    >>> cart_to_mgeqoe(CartesianState(r=[1, 0, 0], v=[0, 1, 0]), 0.0, 1.0)
    MGeqoeState(p_tilde=1.0, p1=0.0, p2=0.0, q1=0.0, q2=0.0, L=0.0)
    """
    q1, q2 = _orientation(state, epoch)
    r = float(np.linalg.norm(state.r))
    h_tilde = generalized_angular_momentum(r, effective_potential(state, U), epoch=epoch)
    e_tilde = generalized_eccentricity(state, h_tilde, mu)
    basis = equinoctial_basis(q1, q2)
    X = float(np.dot(state.r, basis.e_X))
    Y = float(np.dot(state.r, basis.e_Y))
    return MGeqoeState(
        p_tilde=h_tilde * h_tilde / mu,
        p1=float(np.dot(e_tilde, basis.e_Y)) + 0.0,
        p2=float(np.dot(e_tilde, basis.e_X)) + 0.0,
        q1=q1 + 0.0,
        q2=q2 + 0.0,
        L=wrap_angle(math.atan2(Y, X)) + 0.0,
    )


def orbit_geometry(
    elts: MGeqoeState, mu: float, *, epoch: Optional[Epoch] = None
) -> OrbitGeometry:
    """Radius, in-plane coordinates and radial rate rebuilt from elements."""
    if elts.p_tilde <= 0.0:
        raise InvalidArgument(f"p_tilde must be strictly positive, got {elts.p_tilde}")
    sin_l, cos_l = math.sin(elts.L), math.cos(elts.L)
    denominator = 1.0 + elts.p1 * sin_l + elts.p2 * cos_l
    if denominator <= 0.0:
        raise HyperbolicBranch(
            f"radius denominator {denominator:.6e} is not positive", epoch=epoch
        )
    r = elts.p_tilde / denominator
    X, Y = r * cos_l, r * sin_l
    basis = equinoctial_basis(elts.q1, elts.q2)
    h_tilde = math.sqrt(elts.p_tilde * mu)
    return OrbitGeometry(
        r=r,
        X=X,
        Y=Y,
        position=X * basis.e_X + Y * basis.e_Y,
        basis=basis,
        h_tilde=h_tilde,
        r_dot=(mu / h_tilde) * (elts.p2 * sin_l - elts.p1 * cos_l),
    )


def osculating_angular_momentum(
    h_tilde: float, r: float, U: float, *, epoch: Optional[Epoch] = None
) -> float:
    """Recover ``h`` from ``h_tilde^2 - 2 r^2 U``."""
    h_squared = h_tilde * h_tilde - 2.0 * r * r * U
    if h_squared < 0.0:
        raise InconsistentPotential(
            f"h_tilde^2 - 2 r^2 U = {h_squared:.6e} is negative", epoch=epoch
        )
    return math.sqrt(h_squared)


def mgeqoe_to_cart(
    elts: MGeqoeState, mu: float, potential_at: PotentialFunction, epoch: Epoch
) -> CartesianState:
    """Transform elements back into a Cartesian state.

    The position needs no potential, so it is rebuilt first and the potential is
    then evaluated there to recover the transverse velocity.

    Examples
    --------
    >>> circular = MGeqoeState(1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    >>> state = mgeqoe_to_cart(circular, 1.0, lambda r, t: 0.0, 0.0)
    >>> state.r.tolist(), state.v.tolist()
    ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    """
    geometry = orbit_geometry(elts, mu, epoch=epoch)
    U = potential_at(geometry.position, epoch)
    h = osculating_angular_momentum(geometry.h_tilde, geometry.r, U, epoch=epoch)
    r, X, Y = geometry.r, geometry.X, geometry.Y
    X_dot = geometry.r_dot * X / r - h * Y / (r * r)
    Y_dot = geometry.r_dot * Y / r + h * X / (r * r)
    return CartesianState(
        r=geometry.position,
        v=X_dot * geometry.basis.e_X + Y_dot * geometry.basis.e_Y,
    )


def keplerian_to_cartesian(
    a: float, e: float, i: float, raan: float, argp: float, nu: float, mu: float
) -> CartesianState:
    """Cartesian state from classical elliptic elements (angles in radians).

    >>> state = keplerian_to_cartesian(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0)
    >>> state.r.tolist(), state.v.tolist()
    ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    """
    if a <= 0.0 or not 0.0 <= e < 1.0:
        raise InvalidArgument(f"expected an elliptic orbit, got a={a}, e={e}")
    p = a * (1.0 - e * e)
    r = p / (1.0 + e * math.cos(nu))
    perifocal_r = np.array([r * math.cos(nu), r * math.sin(nu), 0.0])
    speed = math.sqrt(mu / p)
    perifocal_v = np.array([-speed * math.sin(nu), speed * (e + math.cos(nu)), 0.0])
    rotation = _perifocal_rotation(i, raan, argp)
    return CartesianState(r=rotation @ perifocal_r + 0.0, v=rotation @ perifocal_v + 0.0)


def _perifocal_rotation(i: float, raan: float, argp: float) -> npt.NDArray[np.float64]:
    cos_o, sin_o = math.cos(raan), math.sin(raan)
    cos_w, sin_w = math.cos(argp), math.sin(argp)
    cos_i, sin_i = math.cos(i), math.sin(i)
    return np.array(
        [
            [
                cos_o * cos_w - sin_o * sin_w * cos_i,
                -cos_o * sin_w - sin_o * cos_w * cos_i,
                sin_o * sin_i,
            ],
            [
                sin_o * cos_w + cos_o * sin_w * cos_i,
                -sin_o * sin_w + cos_o * cos_w * cos_i,
                -cos_o * sin_i,
            ],
            [sin_w * sin_i, cos_w * sin_i, cos_i],
        ]
    )


def wrap_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi].

    >>> wrap_angle(3 * math.pi / 2) == -math.pi / 2
    True
    """
    wrapped = math.remainder(angle, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def unwrap_longitude(longitudes: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Remove the 2 pi jumps of a longitude series."""
    return np.unwrap(np.asarray(longitudes, dtype=np.float64))
