import math

import numpy as np
import pytest
from pydantic import ValidationError

from mgeqoe.core import Body, CartesianState, orbital_frame_basis
from mgeqoe.elements import effective_potential, keplerian_to_cartesian
from mgeqoe.exceptions import InvalidArgument, ProximityError
from mgeqoe.forces import (
    BodyTerm,
    PerturbationModel,
    energy_rate,
    instantaneous_offset,
    offset_for_trajectory,
    potential_time_partial,
    project_forces,
    third_body_acceleration,
    third_body_potential,
)
from mgeqoe.propagation import Trajectory, TrajectoryKind


def _random_direction(rng: np.random.Generator) -> np.ndarray:
    direction = rng.normal(size=3)
    return direction / np.linalg.norm(direction)


def _random_geometry(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    # object and perturber at least 0.7 apart; the tide stays well above rounding noise
    r = rng.uniform(0.3, 0.8) * _random_direction(rng)
    r_cp = rng.uniform(1.5, 3.0) * _random_direction(rng)
    return r, r_cp


def _circular_perturber(t: float) -> tuple[np.ndarray, np.ndarray]:
    radius, rate, phase = 3.0, 0.8, 0.4
    tilt = 0.3
    u = np.array([1.0, 0.0, 0.0])
    w = np.array([0.0, math.cos(tilt), math.sin(tilt)])
    angle = rate * t + phase
    position = radius * (math.cos(angle) * u + math.sin(angle) * w)
    velocity = radius * rate * (-math.sin(angle) * u + math.cos(angle) * w)
    return position, velocity


def test_potential_at_midpoint() -> None:
    r = np.array([0.5, 0.0, 0.0])
    r_cp = np.array([1.0, 0.0, 0.0])
    assert third_body_potential(r, r_cp, 1.0) == pytest.approx(-1.5, rel=1e-15)


def test_potential_without_perturber_mass_is_zero() -> None:
    assert third_body_potential(np.ones(3), np.array([3.0, 0.0, 0.0]), 0.0) == 0.0


def test_acceleration_vanishes_at_the_central_body() -> None:
    acceleration = third_body_acceleration(np.zeros(3), np.array([0.3, -2.0, 1.0]), 0.7)
    assert acceleration.tolist() == [0.0, 0.0, 0.0]


def test_acceleration_is_minus_the_potential_gradient() -> None:
    rng = np.random.default_rng(0)
    mu_p = 0.5
    step = 1e-6
    for _ in range(1000):
        r, r_cp = _random_geometry(rng)
        gradient = np.array(
            [
                (
                    third_body_potential(r + step * axis, r_cp, mu_p)
                    - third_body_potential(r - step * axis, r_cp, mu_p)
                )
                / (2.0 * step)
                for axis in np.eye(3)
            ]
        )
        acceleration = third_body_acceleration(r, r_cp, mu_p)
        assert np.linalg.norm(acceleration + gradient) <= 1e-7 * np.linalg.norm(acceleration)


def test_tide_vanishes_for_a_distant_perturber() -> None:
    r = np.array([0.1, 0.2, -0.1])
    near = np.linalg.norm(third_body_acceleration(r, np.array([10.0, 0.0, 0.0]), 1.0))
    far = np.linalg.norm(third_body_acceleration(r, np.array([1e4, 0.0, 0.0]), 1.0))
    assert far < 1e-8 * near


def test_collision_with_perturber_raises() -> None:
    r_cp = np.array([1.0, 0.0, 0.0])
    with pytest.raises(ProximityError):
        third_body_potential(r_cp.copy(), r_cp, 1.0)
    with pytest.raises(ProximityError):
        third_body_acceleration(r_cp.copy(), r_cp, 1.0)


def test_time_partial_of_a_static_perturber_is_zero() -> None:
    value = potential_time_partial(np.ones(3), np.array([3.0, 0.0, 0.0]), np.zeros(3), 1.0)
    assert value == 0.0


def test_time_partial_at_the_origin_of_a_circular_perturber() -> None:
    r_cp, v_cp = _circular_perturber(1.3)
    assert abs(potential_time_partial(np.zeros(3), r_cp, v_cp, 0.9)) < 1e-12


def test_time_partial_matches_finite_differences() -> None:
    rng = np.random.default_rng(1)
    mu_p = 0.5
    step = 1e-6
    for _ in range(1000):
        r = rng.uniform(-1.0, 1.0, size=3)
        t = rng.uniform(0.0, 10.0)
        before = third_body_potential(r, _circular_perturber(t - step)[0], mu_p)
        after = third_body_potential(r, _circular_perturber(t + step)[0], mu_p)
        r_cp, v_cp = _circular_perturber(t)
        analytic = potential_time_partial(r, r_cp, v_cp, mu_p)
        assert (after - before) / (2.0 * step) == pytest.approx(analytic, rel=1e-7, abs=1e-9)


def test_project_radial_force() -> None:
    state = keplerian_to_cartesian(0.8, 0.2, 0.4, 0.1, 0.2, 0.3, 1.0)
    force = 2.5 * state.r / state.radius
    projection = project_forces(force, np.zeros(3), state)
    assert projection.F_r == pytest.approx(2.5, rel=1e-15)
    assert projection.F_f == pytest.approx(0.0, abs=1e-15)
    assert projection.F_h == pytest.approx(0.0, abs=1e-15)
    assert (projection.P_r, projection.P_f, projection.P_h) == (0.0, 0.0, 0.0)


def test_project_normal_force_on_circular_equatorial_orbit() -> None:
    state = CartesianState(r=[1.0, 0.0, 0.0], v=[0.0, 1.0, 0.0])
    projection = project_forces(np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, 1.0]), state)
    assert (projection.F_r, projection.F_f, projection.F_h) == (0.0, 0.0, 1.0)
    assert (projection.P_r, projection.P_f, projection.P_h) == (0.0, 0.0, 1.0)


def test_projection_reconstructs_the_force(earth_orbit: CartesianState) -> None:
    force = np.array([0.3, -1.2, 0.7])
    projection = project_forces(force, 2.0 * force, earth_orbit)
    e_r, e_f, e_h = orbital_frame_basis(earth_orbit)
    rebuilt = projection.F_r * e_r + projection.F_f * e_f + projection.F_h * e_h
    np.testing.assert_allclose(rebuilt, force, atol=1e-14)
    assert projection.P_h == pytest.approx(2.0 * projection.F_h, rel=1e-15)


def test_energy_rate_without_perturbations() -> None:
    assert energy_rate(0.0, 0.3, 1.0, 1.2, 0.0, 0.0) == 0.0


def test_energy_rate_of_tangential_thrust() -> None:
    assert energy_rate(0.0, 0.0, 2.0, 4.0, 0.0, 0.1) == pytest.approx(0.05)


def test_energy_rate_needs_a_positive_radius() -> None:
    with pytest.raises(InvalidArgument):
        energy_rate(0.0, 0.0, 1.0, 0.0, 0.0, 0.0)


def test_instantaneous_offset_of_circular_orbit() -> None:
    state = CartesianState(r=[1.0, 0.0, 0.0], v=[0.0, 1.0, 0.0])
    assert instantaneous_offset(state, 0.0, 1.0) == 0.0
    assert instantaneous_offset(state, -1.0, 1.0) == 1.0


def test_offset_keeps_effective_potential_non_negative() -> None:
    r_cp = np.array([2.0, 1.0, 0.0])
    for nu in np.linspace(0.0, 2.0 * math.pi, 50):
        state = keplerian_to_cartesian(0.6, 0.5, 0.3, 0.2, 0.1, nu, 1.0)
        U = third_body_potential(state.r, r_cp, 0.3)
        offset = instantaneous_offset(state, U, 1.0)
        assert effective_potential(state, U + offset) >= 0.0


def _circular_trajectory() -> Trajectory:
    epochs = np.linspace(0.0, 2.0 * math.pi, 40)
    zeros = np.zeros_like(epochs)
    states = np.column_stack(
        [np.cos(epochs), np.sin(epochs), zeros, -np.sin(epochs), np.cos(epochs), zeros]
    )
    return Trajectory(
        kind=TrajectoryKind.CARTESIAN, epochs=epochs, states=states, center=Body.EARTH
    )


def _no_potential(position: np.ndarray, epoch: float) -> float:
    return 0.0


def test_offset_of_circular_keplerian_trajectory_is_the_margin() -> None:
    offset = offset_for_trajectory(_circular_trajectory(), _no_potential, 1.0)
    assert offset == pytest.approx(1e-10, abs=1e-14)


def test_offset_compensates_a_constant_potential_shift() -> None:
    traj = _circular_trajectory()

    def shifted(position: np.ndarray, epoch: float) -> float:
        return 0.25

    base = offset_for_trajectory(traj, _no_potential, 1.0, margin=0.0)
    moved = offset_for_trajectory(traj, shifted, 1.0, margin=0.0)
    assert moved == pytest.approx(base - 0.25, abs=1e-15)


def test_offset_of_empty_trajectory_raises() -> None:
    empty = Trajectory(
        kind=TrajectoryKind.CARTESIAN, epochs=np.zeros(0), states=np.zeros((0, 6)), center="earth"
    )
    with pytest.raises(InvalidArgument, match="empty"):
        offset_for_trajectory(empty, _no_potential, 1.0)


def test_offset_needs_a_cartesian_trajectory() -> None:
    traj = _circular_trajectory()
    elements = Trajectory(
        kind=TrajectoryKind.MGEQOE, epochs=traj.epochs, states=traj.states, center=Body.EARTH
    )
    with pytest.raises(InvalidArgument, match="Cartesian"):
        offset_for_trajectory(elements, _no_potential, 1.0)


def test_perturbation_model_rejects_central_body_as_perturber() -> None:
    with pytest.raises(ValidationError, match="cannot perturb itself"):
        PerturbationModel(
            central=Body.EARTH, potential_bodies=(BodyTerm(body=Body.EARTH, mu=1.0),)
        )


def test_perturbation_model_rejects_duplicates() -> None:
    term = BodyTerm(body=Body.MOON, mu=0.01)
    with pytest.raises(ValidationError, match="only once"):
        PerturbationModel(central=Body.EARTH, potential_bodies=(term,), force_bodies=(term,))


def test_with_offset_keeps_bodies() -> None:
    model = PerturbationModel(
        central=Body.MOON, potential_bodies=(BodyTerm(body=Body.EARTH, mu=0.98),)
    )
    shifted = model.with_offset(0.3)
    assert shifted.u_offset == 0.3
    assert shifted.potential_bodies == model.potential_bodies
    assert model.u_offset == 0.0
