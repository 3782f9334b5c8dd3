import math

import numpy as np
import pytest

from mgeqoe.core import Body, BodyConstants, CanonicalUnits, CartesianState
from mgeqoe.elements import keplerian_to_cartesian
from mgeqoe.ephemeris import AnalyticEphemeris, default_analytic_config
from mgeqoe.forces import BodyTerm, PerturbationModel
from mgeqoe.propagation import DynamicsConfig, OdeSettings


@pytest.fixture
def constants() -> BodyConstants:
    return BodyConstants()


@pytest.fixture
def units(constants: BodyConstants) -> CanonicalUnits:
    return constants.units()


@pytest.fixture
def ephemeris(constants: BodyConstants) -> AnalyticEphemeris:
    return AnalyticEphemeris(default_analytic_config(constants, moon_phase=0.3, sun_phase=1.1))


@pytest.fixture
def keplerian_config(constants: BodyConstants, ephemeris: AnalyticEphemeris) -> DynamicsConfig:
    return DynamicsConfig(
        central=Body.EARTH,
        perturbations=PerturbationModel(central=Body.EARTH),
        ephemeris=ephemeris,
        mu_central=constants.canonical_mu(Body.EARTH),
    )


@pytest.fixture
def perturbed_config(constants: BodyConstants, ephemeris: AnalyticEphemeris) -> DynamicsConfig:
    """Earth-centered: lunar potential and solar force."""
    return DynamicsConfig(
        central=Body.EARTH,
        perturbations=PerturbationModel(
            central=Body.EARTH,
            potential_bodies=(BodyTerm(body=Body.MOON, mu=constants.canonical_mu(Body.MOON)),),
            force_bodies=(BodyTerm(body=Body.SUN, mu=constants.canonical_mu(Body.SUN)),),
        ),
        ephemeris=ephemeris,
        mu_central=constants.canonical_mu(Body.EARTH),
    )


@pytest.fixture
def earth_orbit(constants: BodyConstants) -> CartesianState:
    """Eccentric, inclined orbit at half the Earth-Moon distance (canonical units)."""
    return keplerian_to_cartesian(
        0.5,
        0.3,
        math.radians(30.0),
        math.radians(20.0),
        math.radians(40.0),
        math.radians(10.0),
        constants.canonical_mu(Body.EARTH),
    )


@pytest.fixture
def ode_settings() -> OdeSettings:
    return OdeSettings(rel_tol=1e-11, abs_tol=1e-12)


@pytest.fixture
def gaussian_samples() -> np.ndarray:
    rng = np.random.default_rng(2024)
    return rng.multivariate_normal(np.zeros(3), np.diag([1.0, 4.0, 0.25]), size=400)
