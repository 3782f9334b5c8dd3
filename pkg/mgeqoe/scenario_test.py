from pathlib import Path

import pytest

from mgeqoe.core import Body
from mgeqoe.exceptions import ConfigurationError
from mgeqoe.propagation import TrajectoryKind
from mgeqoe.scenario import bundled_scenario, find_scenario, load_scenario

BUNDLED = ["keplerian", "eccentric_lunar", "high_apogee_earth", "lunar_frozen"]

CARTESIAN_SCENARIO = """
name = "cartesian"
central = "moon"

[initial_state]
epoch_days = 1.5
position_km = [4000.0, 0.0, 0.0]
velocity_kms = [0.0, 1.1, 0.1]

[propagation]
span_days = 0.5
kinds = ["cartesian"]
"""


def _write(tmp_path: Path, content: str, name: str = "scenario.toml") -> Path:
    path = tmp_path / name
    path.write_text(content)
    return path


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_scenarios_load(name: str) -> None:
    scenario = load_scenario(name)
    assert scenario.name == name
    assert scenario.central in (Body.EARTH, Body.MOON)
    assert scenario.propagation.kinds == (TrajectoryKind.CARTESIAN, TrajectoryKind.MGEQOE)


def test_keplerian_scenario_has_no_perturbations() -> None:
    scenario = load_scenario("keplerian")
    assert not scenario.forces.third_body
    assert not scenario.forces.sun
    assert scenario.ensemble is None


def test_ensemble_section() -> None:
    scenario = load_scenario("eccentric_lunar")
    assert scenario.ensemble is not None
    assert scenario.ensemble.n_samples == 2000
    assert scenario.ensemble.seed == 20240501


def test_cartesian_initial_state(tmp_path: Path) -> None:
    scenario = load_scenario(_write(tmp_path, CARTESIAN_SCENARIO))
    assert scenario.initial_state.is_cartesian
    assert scenario.initial_state.epoch_days == 1.5
    assert scenario.propagation.kinds == (TrajectoryKind.CARTESIAN,)
    assert scenario.propagation.grid_step_s is None
    assert scenario.ephemeris.provider == "analytic"


def test_initial_state_needs_exactly_one_form(tmp_path: Path) -> None:
    content = CARTESIAN_SCENARIO.replace("epoch_days = 1.5", "a_km = 7000.0\ne = 0.1")
    with pytest.raises(ConfigurationError, match="either"):
        load_scenario(_write(tmp_path, content))


def test_velocity_without_position_is_rejected(tmp_path: Path) -> None:
    content = CARTESIAN_SCENARIO.replace("position_km = [4000.0, 0.0, 0.0]\n", "")
    with pytest.raises(ConfigurationError, match="go together"):
        load_scenario(_write(tmp_path, content))


def test_unknown_key_is_rejected(tmp_path: Path) -> None:
    content = CARTESIAN_SCENARIO.replace("span_days = 0.5", "span_days = 0.5\nstep = 3")
    with pytest.raises(ConfigurationError, match="invalid scenario"):
        load_scenario(_write(tmp_path, content))


def test_invalid_toml(tmp_path: Path) -> None:
    with pytest.raises(ConfigurationError, match="TOML"):
        load_scenario(_write(tmp_path, "name = \n"))


def test_duplicate_kinds_are_rejected(tmp_path: Path) -> None:
    content = CARTESIAN_SCENARIO.replace('["cartesian"]', '["cartesian", "cartesian"]')
    with pytest.raises(ConfigurationError, match="at most once"):
        load_scenario(_write(tmp_path, content))


def test_output_grid_comes_from_the_propagation_section(tmp_path: Path) -> None:
    content = CARTESIAN_SCENARIO + "\n[ode]\noutput_grid = [0.0, 1.0]\n"
    with pytest.raises(ConfigurationError, match="grid_step_s"):
        load_scenario(_write(tmp_path, content))


def test_ode_section(tmp_path: Path) -> None:
    content = CARTESIAN_SCENARIO + "\n[ode]\nrel_tol = 1e-10\nh_max = 0.05\n"
    scenario = load_scenario(_write(tmp_path, content))
    assert scenario.ode.rel_tol == 1e-10
    assert scenario.ode.h_max == 0.05
    assert scenario.ode.abs_tol == 1e-13


def test_tabulated_ephemeris_needs_a_file(tmp_path: Path) -> None:
    content = CARTESIAN_SCENARIO + '\n[ephemeris]\nprovider = "tabulated"\n'
    with pytest.raises(ConfigurationError, match="needs a file"):
        load_scenario(_write(tmp_path, content))


def test_missing_ephemeris_file(tmp_path: Path) -> None:
    content = CARTESIAN_SCENARIO + '\n[ephemeris]\nprovider = "tabulated"\nfile = "eph.csv"\n'
    with pytest.raises(ConfigurationError, match="does not exist"):
        load_scenario(_write(tmp_path, content))


def test_relative_files_follow_the_scenario(tmp_path: Path) -> None:
    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "eph.csv").write_text("body,epoch,rx,ry,rz,vx,vy,vz\n")
    (tmp_path / "constants.toml").write_text("l_star_km = 384400.0\n")
    content = CARTESIAN_SCENARIO.replace(
        'central = "moon"', 'central = "moon"\nconstants = "constants.toml"'
    )
    content += '\n[ephemeris]\nprovider = "tabulated"\nfile = "data/eph.csv"\n'

    scenario = load_scenario(_write(tmp_path, content))

    assert scenario.constants == tmp_path / "constants.toml"
    assert scenario.ephemeris.file == tmp_path / "data" / "eph.csv"


def test_unknown_bundled_scenario() -> None:
    with pytest.raises(ConfigurationError, match="no bundled scenario"):
        bundled_scenario("halo")


def test_find_scenario_prefers_files(tmp_path: Path) -> None:
    path = _write(tmp_path, CARTESIAN_SCENARIO)
    assert find_scenario(path) == path
    with pytest.raises(ConfigurationError, match="does not exist"):
        find_scenario(tmp_path / "missing.toml")
