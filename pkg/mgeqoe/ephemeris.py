"""Perturbing-body states relative to a central body.

Two providers ship with the package: uniform circular motion
(``AnalyticEphemeris``) and cubic Hermite interpolation of tabulated samples
(``TabulatedEphemeris``). Any object following ``EphemerisProvider`` can be
plugged into the dynamics instead.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Mapping, Protocol, Tuple, Union

import numpy as np
import numpy.typing as npt
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, PositiveFloat, field_validator
from scipy.interpolate import CubicHermiteSpline

from mgeqoe._typing import Epoch, Vector3
from mgeqoe.constants import AU_KM
from mgeqoe.core import Body, BodyConstants
from mgeqoe.exceptions import ConfigurationError, EphemerisOutOfRange, UnknownBody

logger = structlog.get_logger(__name__)

BodyState = Tuple[Vector3, Vector3]

EPHEMERIS_COLUMNS = ["body", "epoch", "rx", "ry", "rz", "vx", "vy", "vz"]


class EphemerisProvider(Protocol):
    @property
    def center(self) -> Body: ...

    @property
    def bodies(self) -> FrozenSet[Body]: ...

    @property
    def span(self) -> Tuple[Epoch, Epoch]: ...

    def state_of(self, body: Body, epoch: Epoch) -> BodyState: ...


def _zero_state() -> BodyState:
    return np.zeros(3), np.zeros(3)


class CircularOrbit(BaseModel):
    model_config = ConfigDict(frozen=True)

    radius: PositiveFloat
    rate: float
    phase: float = 0.0
    normal: Tuple[float, float, float] = (0.0, 0.0, 1.0)

    @field_validator("normal")
    @classmethod
    def check_unit_normal(cls, normal: Tuple[float, float, float]) -> Tuple[float, float, float]:
        norm = math.sqrt(sum(component * component for component in normal))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"orbit-plane normal must be a unit vector, got norm {norm}")
        return normal

    def in_plane_axes(self) -> Tuple[Vector3, Vector3]:
        """Unit vectors spanning the orbit plane, ``u`` then ``n x u``."""
        normal = np.asarray(self.normal, dtype=np.float64)
        reference = np.array([1.0, 0.0, 0.0])
        if np.linalg.norm(np.cross(normal, reference)) < 1e-8:
            reference = np.array([0.0, 1.0, 0.0])
        u = reference - np.dot(reference, normal) * normal
        u /= np.linalg.norm(u)
        return u, np.cross(normal, u)


class AnalyticCircularConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    center: Body = Body.EARTH
    orbits: Dict[Body, CircularOrbit]

    @field_validator("orbits")
    @classmethod
    def check_orbits(cls, orbits: Dict[Body, CircularOrbit]) -> Dict[Body, CircularOrbit]:
        if not orbits:
            raise ValueError("at least one body is required")
        return orbits


def default_analytic_config(
    constants: BodyConstants, moon_phase: float = 0.0, sun_phase: float = 0.0
) -> AnalyticCircularConfig:
    """Earth-centered circular Moon and Sun in a common plane.

    The Moon sits at unit distance with unit rate. The Sun sits at one
    astronomical unit with the rate of a circular orbit about Earth.

    >>> config = default_analytic_config(BodyConstants())
    >>> round(config.orbits[Body.SUN].radius, 2)
    389.17
    """
    sun_radius = AU_KM / constants.l_star
    sun_rate = math.sqrt((constants.canonical_mu(Body.SUN) + 1.0) / sun_radius**3)
    return AnalyticCircularConfig(
        center=Body.EARTH,
        orbits={
            Body.MOON: CircularOrbit(radius=1.0, rate=1.0, phase=moon_phase),
            Body.SUN: CircularOrbit(radius=sun_radius, rate=sun_rate, phase=sun_phase),
        },
    )


def analytic_state(config: AnalyticCircularConfig, body: Body, epoch: Epoch) -> BodyState:
    """State of ``body`` relative to the configured center.

    Examples
    --------
    >>> config = AnalyticCircularConfig(orbits={Body.MOON: CircularOrbit(radius=1.0, rate=1.0)})
    >>> r, v = analytic_state(config, Body.MOON, 0.0)
    >>> r.tolist(), v.tolist()
    ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    """
    body = Body.from_name(body)
    if body == config.center:
        return _zero_state()
    if body not in config.orbits:
        raise UnknownBody(f"analytic ephemeris has no orbit for {body.value}")
    orbit = config.orbits[body]
    u, w = orbit.in_plane_axes()
    angle = orbit.rate * epoch + orbit.phase
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    position = orbit.radius * (cos_a * u + sin_a * w)
    velocity = orbit.radius * orbit.rate * (-sin_a * u + cos_a * w)
    return position + 0.0, velocity + 0.0


class AnalyticEphemeris:
    def __init__(self, config: AnalyticCircularConfig):
        self.config = config

    @property
    def center(self) -> Body:
        return self.config.center

    @property
    def bodies(self) -> FrozenSet[Body]:
        return frozenset(self.config.orbits)

    @property
    def span(self) -> Tuple[Epoch, Epoch]:
        return (-math.inf, math.inf)

    def state_of(self, body: Body, epoch: Epoch) -> BodyState:
        return analytic_state(self.config, body, epoch)


class BodyTable:
    """Samples of one body with the Hermite splines through them."""

    def __init__(
        self,
        body: Body,
        epochs: npt.ArrayLike,
        positions: npt.ArrayLike,
        velocities: npt.ArrayLike,
    ):
        self.body = body
        self.epochs = np.asarray(epochs, dtype=np.float64)
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        self.velocities = np.asarray(velocities, dtype=np.float64).reshape(-1, 3)
        if len(self.epochs) < 2:
            raise ConfigurationError(f"{body.value}: at least two samples are required")
        if not len(self.epochs) == len(self.positions) == len(self.velocities):
            raise ConfigurationError(f"{body.value}: epochs and samples have different lengths")
        if np.any(np.diff(self.epochs) <= 0):
            raise ConfigurationError(f"{body.value}: epochs must be strictly increasing")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise ConfigurationError(f"{body.value}: samples must be finite")
        self.position_spline = CubicHermiteSpline(
            self.epochs, self.positions, self.velocities, axis=0
        )
        self.velocity_spline = self.position_spline.derivative()

    @property
    def span(self) -> Tuple[Epoch, Epoch]:
        return float(self.epochs[0]), float(self.epochs[-1])


class TabulatedEphemeris:
    """Cubic Hermite interpolation of tabulated positions and velocities.

    Epochs exactly on a node return the stored sample; epochs outside the
    tabulated span are rejected.
    """

    def __init__(self, center: Body, tables: Iterable[BodyTable]):
        self._center = Body.from_name(center)
        self._tables: Dict[Body, BodyTable] = {table.body: table for table in tables}
        if not self._tables:
            raise ConfigurationError("tabulated ephemeris contains no body")
        if self._center in self._tables:
            raise ConfigurationError(f"{self._center.value} is the center and cannot be tabulated")

    @classmethod
    def from_samples(
        cls,
        center: Body,
        samples: Mapping[Body, Tuple[npt.ArrayLike, npt.ArrayLike, npt.ArrayLike]],
    ) -> TabulatedEphemeris:
        """Build from ``{body: (epochs, positions, velocities)}``."""
        return cls(
            center,
            [BodyTable(Body.from_name(body), *arrays) for body, arrays in samples.items()],
        )

    @property
    def center(self) -> Body:
        return self._center

    @property
    def bodies(self) -> FrozenSet[Body]:
        return frozenset(self._tables)

    @property
    def span(self) -> Tuple[Epoch, Epoch]:
        starts, ends = zip(*(table.span for table in self._tables.values()))
        return max(starts), min(ends)

    def samples_of(self, body: Body) -> BodyTable:
        body = Body.from_name(body)
        if body not in self._tables:
            raise UnknownBody(f"tabulated ephemeris has no samples for {body.value}")
        return self._tables[body]

    def state_of(self, body: Body, epoch: Epoch) -> BodyState:
        return tabulated_state(self, body, epoch)

    def to_frame(self) -> pd.DataFrame:
        frames = []
        for body, table in sorted(self._tables.items(), key=lambda item: item[0].value):
            frame = pd.DataFrame(
                np.hstack([table.positions, table.velocities]), columns=EPHEMERIS_COLUMNS[2:]
            )
            frame.insert(0, "epoch", table.epochs)
            frame.insert(0, "body", body.value)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(
            path, index=False, float_format="%.16e", lineterminator="\n", encoding="utf-8"
        )

    @classmethod
    def from_csv(cls, path: Union[str, Path], center: Body = Body.EARTH) -> TabulatedEphemeris:
        """Read a ``body,epoch,rx,ry,rz,vx,vy,vz`` file in canonical units."""
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"ephemeris file {path} does not exist")
        try:
            df = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise ConfigurationError(f"cannot parse ephemeris file {path}: {e}") from e
        if list(df.columns) != EPHEMERIS_COLUMNS:
            raise ConfigurationError(
                f"ephemeris file {path} must have the header {','.join(EPHEMERIS_COLUMNS)}"
            )

        tables = []
        for name, group in df.groupby("body", sort=False):
            body = Body.from_name(str(name))
            tables.append(
                BodyTable(
                    body,
                    group["epoch"].to_numpy(dtype=np.float64),
                    group[["rx", "ry", "rz"]].to_numpy(dtype=np.float64),
                    group[["vx", "vy", "vz"]].to_numpy(dtype=np.float64),
                )
            )
        ephemeris = cls(center, tables)
        logger.debug(
            "loaded tabulated ephemeris", path=str(path), bodies=sorted(df["body"].unique())
        )
        return ephemeris


def tabulated_state(table: TabulatedEphemeris, body: Body, epoch: Epoch) -> BodyState:
    """State of ``body`` relative to the table's center.

    Nodes return the stored sample, other epochs the Hermite interpolant.
    Epochs outside the tabulated span of ``body`` are rejected.
    """
    body = Body.from_name(body)
    if body == table.center:
        return _zero_state()
    samples = table.samples_of(body)
    start, end = samples.span
    if not start <= epoch <= end:
        raise EphemerisOutOfRange(
            f"epoch {epoch!r} outside the tabulated span [{start!r}, {end!r}] of {body.value}"
        )
    index = int(np.searchsorted(samples.epochs, epoch))
    if index < len(samples.epochs) and samples.epochs[index] == epoch:
        return samples.positions[index].copy(), samples.velocities[index].copy()
    return (
        np.asarray(samples.position_spline(epoch), dtype=np.float64),
        np.asarray(samples.velocity_spline(epoch), dtype=np.float64),
    )


def tabulate(
    provider: EphemerisProvider, bodies: Iterable[Body], epochs: npt.ArrayLike
) -> TabulatedEphemeris:
    """Sample ``provider`` on ``epochs`` into a tabulated ephemeris."""
    epochs = np.asarray(epochs, dtype=np.float64)
    samples = {}
    for body in bodies:
        states = [provider.state_of(body, float(t)) for t in epochs]
        samples[Body.from_name(body)] = (
            epochs,
            np.array([position for position, _ in states]),
            np.array([velocity for _, velocity in states]),
        )
    return TabulatedEphemeris.from_samples(provider.center, samples)


def _known(provider: EphemerisProvider, body: Body) -> Body:
    body = Body.from_name(body)
    if body != provider.center and body not in provider.bodies:
        raise UnknownBody(f"ephemeris cannot resolve {body.value}")
    return body


def recenter(
    provider: EphemerisProvider,
    from_central: Body,
    to_central: Body,
    body: Body,
    epoch: Epoch,
) -> BodyState:
    """State of ``body`` relative to ``to_central``.

    Both ``body`` and ``to_central`` are first expressed relative to
    ``from_central`` and then subtracted.
    """
    from_central, to_central, body = (
        _known(provider, from_central),
        _known(provider, to_central),
        _known(provider, body),
    )
    r_from, v_from = provider.state_of(from_central, epoch)
    r_body, v_body = provider.state_of(body, epoch)
    r_to, v_to = provider.state_of(to_central, epoch)
    return (r_body - r_from) - (r_to - r_from), (v_body - v_from) - (v_to - v_from)


def relative_state(
    provider: EphemerisProvider, body: Body, center: Body, epoch: Epoch
) -> BodyState:
    return recenter(provider, provider.center, center, body, epoch)


class RecenteredEphemeris:
    """View of another provider from a different central body."""

    def __init__(self, provider: EphemerisProvider, center: Body):
        self.provider = provider
        self._center = _known(provider, center)

    @property
    def center(self) -> Body:
        return self._center

    @property
    def bodies(self) -> FrozenSet[Body]:
        return (self.provider.bodies | {self.provider.center}) - {self._center}

    @property
    def span(self) -> Tuple[Epoch, Epoch]:
        return self.provider.span

    def state_of(self, body: Body, epoch: Epoch) -> BodyState:
        if Body.from_name(body) == self._center:
            return _zero_state()
        return relative_state(self.provider, body, self._center, epoch)


def centered_on(provider: EphemerisProvider, center: Body) -> EphemerisProvider:
    if provider.center == Body.from_name(center):
        return provider
    return RecenteredEphemeris(provider, center)
