"""Scenario files: one TOML document per experiment, dimensional inputs."""

from __future__ import annotations

import math
import tomllib
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Optional, Tuple, Union

import structlog
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    ValidationError,
    model_validator,
)

from mgeqoe.core import Body
from mgeqoe.exceptions import ConfigurationError
from mgeqoe.propagation import OdeSettings, TrajectoryKind
from mgeqoe.uncertainty import EnsembleSpec

logger = structlog.get_logger(__name__)

Vector = Tuple[float, float, float]

BUNDLED_SCENARIOS = "mgeqoe.scenarios"


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class EphemerisSection(_Section):
    provider: Literal["analytic", "tabulated"] = "analytic"
    moon_phase_deg: float = 0.0
    sun_phase_deg: float = 0.0
    file: Optional[Path] = None
    # body the tabulated states are relative to
    center: Body = Body.EARTH

    @model_validator(mode="after")
    def check_file(self) -> EphemerisSection:
        if self.provider == "tabulated" and self.file is None:
            raise ValueError("a tabulated ephemeris needs a file")
        return self


class ForcesSection(_Section):
    third_body: bool = True
    sun: bool = True


class InitialStateSection(_Section):
    """Initial state, either Cartesian (km, km/s) or classical elements (km, deg)."""

    epoch_days: float = 0.0
    position_km: Optional[Vector] = None
    velocity_kms: Optional[Vector] = None
    a_km: Optional[PositiveFloat] = None
    e: Optional[Annotated[float, Field(ge=0.0, lt=1.0)]] = None
    i_deg: float = 0.0
    raan_deg: float = 0.0
    argp_deg: float = 0.0
    nu_deg: float = 0.0

    @model_validator(mode="after")
    def check_form(self) -> InitialStateSection:
        cartesian = self.position_km is not None or self.velocity_kms is not None
        keplerian = self.a_km is not None or self.e is not None
        if cartesian == keplerian:
            raise ValueError(
                "give either position_km and velocity_kms, or a_km and e with optional angles"
            )
        if cartesian and (self.position_km is None or self.velocity_kms is None):
            raise ValueError("position_km and velocity_kms go together")
        if keplerian and (self.a_km is None or self.e is None):
            raise ValueError("a_km and e go together")
        values = (self.position_km or ()) + (self.velocity_kms or ())
        if not all(math.isfinite(value) for value in values):
            raise ValueError("initial state must be finite")
        return self

    @property
    def is_cartesian(self) -> bool:
        return self.position_km is not None


class PropagationSection(_Section):
    span_days: PositiveFloat
    # default: 1000 intervals over the span
    grid_step_s: Optional[PositiveFloat] = None
    kinds: Tuple[TrajectoryKind, ...] = (TrajectoryKind.CARTESIAN, TrajectoryKind.MGEQOE)

    @model_validator(mode="after")
    def check_kinds(self) -> PropagationSection:
        if not self.kinds or len(set(self.kinds)) != len(self.kinds):
            raise ValueError("kinds must list each coordinate kind at most once")
        return self


class Scenario(_Section):
    name: str
    central: Body
    constants: Optional[Path] = None
    ephemeris: EphemerisSection = EphemerisSection()
    forces: ForcesSection = ForcesSection()
    initial_state: InitialStateSection
    propagation: PropagationSection
    ode: OdeSettings = OdeSettings()
    ensemble: Optional[EnsembleSpec] = None

    @model_validator(mode="after")
    def check_grid(self) -> Scenario:
        if self.ode.output_grid:
            raise ValueError("the output grid follows from propagation.grid_step_s")
        return self


def _resolve(path: Optional[Path], directory: Path, label: str) -> Optional[Path]:
    if path is None:
        return None
    resolved = path if path.is_absolute() else directory / path
    if not resolved.is_file():
        raise ConfigurationError(f"{label} file {resolved} does not exist")
    return resolved


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package.

    >>> bundled_scenario("keplerian").name
    'keplerian.toml'
    """
    path = Path(str(resources.files(BUNDLED_SCENARIOS).joinpath(f"{name}.toml")))
    if not path.is_file():
        raise ConfigurationError(f"no bundled scenario named {name!r}")
    return path


def find_scenario(path_or_name: Union[str, Path]) -> Path:
    """A scenario file path, or the name of a bundled scenario."""
    path = Path(path_or_name)
    if path.is_file():
        return path
    if path.suffix == "" and path.parent == Path("."):
        return bundled_scenario(path.name)
    raise ConfigurationError(f"scenario file {path} does not exist")


def load_scenario(path_or_name: Union[str, Path]) -> Scenario:
    """Read and validate a scenario; relative file references follow the scenario file."""
    path = find_scenario(path_or_name)
    try:
        with path.open("rb") as f:
            content = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"scenario {path} is not valid TOML: {e}") from e

    try:
        scenario = Scenario.model_validate(content)
    except ValidationError as e:
        raise ConfigurationError(f"invalid scenario {path}:\n{e}") from e

    directory = path.parent
    scenario = scenario.model_copy(
        update={
            "constants": _resolve(scenario.constants, directory, "constants"),
            "ephemeris": scenario.ephemeris.model_copy(
                update={"file": _resolve(scenario.ephemeris.file, directory, "ephemeris")}
            ),
        }
    )
    logger.info("loaded scenario", name=scenario.name, path=str(path))
    return scenario
