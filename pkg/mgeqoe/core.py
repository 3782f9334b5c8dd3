from __future__ import annotations

import math
import tomllib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, PositiveFloat, ValidationError

from mgeqoe._typing import Epoch, Matrix, StateVector, Vector3
from mgeqoe.constants import (
    DEGENERATE_TOLERANCE,
    L_STAR_KM,
    MU_EARTH_KM3S2,
    MU_MOON_KM3S2,
    MU_SUN_KM3S2,
)
from mgeqoe.exceptions import (
    ConfigurationError,
    DegenerateGeometry,
    InvalidArgument,
    UnknownBody,
)

logger = structlog.get_logger(__name__)


class Body(str, Enum):
    EARTH = "earth"
    MOON = "moon"
    SUN = "sun"

    @classmethod
    def from_name(cls, name: Union[str, Body]) -> Body:
        """Resolve a body from its (case-insensitive) name.

        >>> Body.from_name("Moon")
        <Body.MOON: 'moon'>
        """
        if isinstance(name, Body):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            known = [b.value for b in cls]
            raise UnknownBody(f"unknown body {name!r}, expected one of {known}") from None


class CanonicalUnits(BaseModel):
    """Characteristic scales of the Earth-Moon system.

    Build it with ``make_canonical_units`` so that ``t_star`` and ``v_star`` stay
    consistent with ``l_star`` and ``gm_sum``.
    """

    model_config = ConfigDict(frozen=True)

    l_star: PositiveFloat
    gm_sum: PositiveFloat
    t_star: PositiveFloat
    v_star: PositiveFloat


class BodyConstants(BaseModel):
    """Gravitational parameters (km^3/s^2) and the characteristic length (km)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mu_earth: PositiveFloat = MU_EARTH_KM3S2
    mu_moon: PositiveFloat = MU_MOON_KM3S2
    mu_sun: PositiveFloat = MU_SUN_KM3S2
    l_star: PositiveFloat = L_STAR_KM

    def mu(self, body: Body) -> float:
        return {
            Body.EARTH: self.mu_earth,
            Body.MOON: self.mu_moon,
            Body.SUN: self.mu_sun,
        }[Body.from_name(body)]

    def canonical_mu(self, body: Body) -> float:
        """Gravitational parameter scaled by mu_earth + mu_moon.

        >>> round(BodyConstants(mu_earth=3.0, mu_moon=1.0).canonical_mu(Body.MOON), 3)
        0.25
        """
        return self.mu(body) / (self.mu_earth + self.mu_moon)

    def units(self) -> CanonicalUnits:
        return make_canonical_units(self.l_star, self.mu_earth, self.mu_moon)


@dataclass(frozen=True)
class CartesianState:
    """Position and velocity, canonical units unless stated otherwise."""

    r: Vector3
    v: Vector3

    def __post_init__(self) -> None:
        r = np.array(self.r, dtype=np.float64).reshape(3)
        v = np.array(self.v, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise InvalidArgument(f"non-finite Cartesian state r={r}, v={v}")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_vector(cls, y: StateVector) -> CartesianState:
        y = np.asarray(y, dtype=np.float64)
        return cls(r=y[:3], v=y[3:6])

    def as_vector(self) -> StateVector:
        return np.concatenate([self.r, self.v])

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.r))


def make_canonical_units(l_star: float, mu_earth: float, mu_moon: float) -> CanonicalUnits:
    """Build the canonical units of the Earth-Moon system.

    Arguments
    ---------
        l_star:
            characteristic length (km)
        mu_earth, mu_moon:
            gravitational parameters (km^3/s^2)

    Examples
    --------
    >>> units = make_canonical_units(1.0, 0.5, 0.5)
    >>> units.t_star, units.v_star
    (1.0, 1.0)
    """
    for name, value in (("l_star", l_star), ("mu_earth", mu_earth), ("mu_moon", mu_moon)):
        if not (math.isfinite(value) and value > 0):
            raise InvalidArgument(f"{name} must be strictly positive, got {value}")
    gm_sum = mu_earth + mu_moon
    t_star = math.sqrt(l_star**3 / gm_sum)
    return CanonicalUnits(l_star=l_star, gm_sum=gm_sum, t_star=t_star, v_star=l_star / t_star)


def nondimensionalize(state: CartesianState, units: CanonicalUnits) -> CartesianState:
    """Convert a state in km and km/s into canonical units."""
    return CartesianState(r=state.r / units.l_star, v=state.v / units.v_star)


def dimensionalize(state: CartesianState, units: CanonicalUnits) -> CartesianState:
    """Convert a canonical state back into km and km/s."""
    return CartesianState(r=state.r * units.l_star, v=state.v * units.v_star)


def orbital_frame_basis(state: CartesianState) -> Tuple[Vector3, Vector3, Vector3]:
    """Radial, transverse and normal unit vectors of the orbital frame.

    Examples
    --------
    >>> e_r, e_f, e_h = orbital_frame_basis(CartesianState(r=[1, 0, 0], v=[0, 1, 0]))
    >>> e_f.tolist(), e_h.tolist()
    ([0.0, 1.0, 0.0], [0.0, 0.0, 1.0])
    """
    r_norm = np.linalg.norm(state.r)
    if r_norm == 0.0:
        raise DegenerateGeometry("orbital frame undefined at zero radius")
    h_vec = np.cross(state.r, state.v)
    h_norm = np.linalg.norm(h_vec)
    if h_norm <= DEGENERATE_TOLERANCE * r_norm * max(np.linalg.norm(state.v), 1.0):
        raise DegenerateGeometry("orbital frame undefined for rectilinear motion")
    e_r = state.r / r_norm
    e_h = h_vec / h_norm
    e_f = np.cross(e_h, e_r)
    return e_r, e_f, e_h


def _rotating_frame(
    earth_state: CartesianState, moon_state: CartesianState, epoch: Epoch
) -> Tuple[Matrix, Vector3]:
    separation = moon_state.r - earth_state.r
    relative_velocity = moon_state.v - earth_state.v
    distance = np.linalg.norm(separation)
    momentum = np.cross(separation, relative_velocity)
    momentum_norm = np.linalg.norm(momentum)
    if distance <= DEGENERATE_TOLERANCE or momentum_norm <= DEGENERATE_TOLERANCE * distance:
        raise DegenerateGeometry(
            "Earth-Moon rotating frame undefined for coincident primaries", epoch=epoch
        )
    x_hat = separation / distance
    z_hat = momentum / momentum_norm
    y_hat = np.cross(z_hat, x_hat)
    rotation = np.vstack([x_hat, y_hat, z_hat])
    omega = momentum / distance**2
    return rotation, omega


def inertial_to_rotating(
    state: CartesianState,
    earth_state: CartesianState,
    moon_state: CartesianState,
    epoch: Epoch,
) -> CartesianState:
    """Express an inertial state in the instantaneous Earth-Moon rotating frame.

    The origin stays at the central body of the input states; only the axes rotate.
    ``earth_state`` and ``moon_state`` are given relative to that same central body.
    """
    rotation, omega = _rotating_frame(earth_state, moon_state, epoch)
    return CartesianState(
        r=rotation @ state.r,
        v=rotation @ (state.v - np.cross(omega, state.r)),
    )


def rotating_to_inertial(
    state: CartesianState,
    earth_state: CartesianState,
    moon_state: CartesianState,
    epoch: Epoch,
) -> CartesianState:
    """Inverse of ``inertial_to_rotating``."""
    rotation, omega = _rotating_frame(earth_state, moon_state, epoch)
    r = rotation.T @ state.r
    return CartesianState(r=r, v=rotation.T @ state.v + np.cross(omega, r))


_CONSTANT_KEYS: Dict[str, str] = {
    "mu_earth_km3s2": "mu_earth",
    "mu_moon_km3s2": "mu_moon",
    "mu_sun_km3s2": "mu_sun",
    "l_star_km": "l_star",
}


def constants_from_mapping(content: Dict[str, Any]) -> BodyConstants:
    unknown = set(content).difference(_CONSTANT_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown constant keys {sorted(unknown)}")
    try:
        return BodyConstants(**{_CONSTANT_KEYS[key]: value for key, value in content.items()})
    except ValidationError as e:
        raise ConfigurationError(f"invalid constants: {e}") from e


def load_constants(path: Union[str, Path]) -> BodyConstants:
    """Read a constants override file.

    The file is a flat TOML table using the keys ``mu_earth_km3s2``,
    ``mu_moon_km3s2``, ``mu_sun_km3s2`` and ``l_star_km``. Missing keys keep
    their default value.
    """
    path = Path(path)
    try:
        with path.open("rb") as f:
            content = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigurationError(f"constants file {path} does not exist") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"constants file {path} is not valid TOML: {e}") from e

    constants = constants_from_mapping(content)
    logger.debug("loaded constants", path=str(path), **constants.model_dump())
    return constants
