import math
import tomllib
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from mgeqoe.core import Body, make_canonical_units
from mgeqoe.exceptions import ConfigurationError
from mgeqoe.io import (
    frame_to_csv_text,
    metadata_path,
    metadata_text,
    read_metadata,
    read_trajectory,
    read_units,
    trajectory_metadata,
    trajectory_to_frame,
    write_outputs,
)
from mgeqoe.propagation import Trajectory, TrajectoryKind


@pytest.fixture
def trajectory() -> Trajectory:
    rng = np.random.default_rng(8)
    return Trajectory(
        kind=TrajectoryKind.MGEQOE,
        epochs=np.cumsum(rng.uniform(0.01, 0.1, size=12)),
        states=rng.normal(size=(12, 6)),
        center=Body.MOON,
        u_offset=0.0123456789012345,
    )


def _write_trajectory(directory: Path, traj: Trajectory) -> Path:
    write_outputs(
        directory,
        {
            "trajectory.csv": frame_to_csv_text(trajectory_to_frame(traj)),
            "trajectory.meta.toml": metadata_text(trajectory_metadata(traj, scenario="test")),
        },
    )
    return directory / "trajectory.csv"


def test_trajectory_survives_a_write_and_read(trajectory: Trajectory, tmp_path: Path) -> None:
    path = _write_trajectory(tmp_path, trajectory)

    loaded = read_trajectory(path)

    assert loaded.kind == TrajectoryKind.MGEQOE
    assert loaded.center == Body.MOON
    assert loaded.u_offset == trajectory.u_offset
    np.testing.assert_array_equal(loaded.epochs, trajectory.epochs)
    np.testing.assert_array_equal(loaded.states, trajectory.states)


def test_written_files_use_lf_line_endings(trajectory: Trajectory, tmp_path: Path) -> None:
    path = _write_trajectory(tmp_path / "nested" / "dir", trajectory)
    content = path.read_bytes()
    assert b"\r" not in content
    assert content.splitlines()[0] == b"epoch,kind,x1,x2,x3,x4,x5,x6"


def test_metadata_sidecar_name() -> None:
    assert metadata_path("out/trajectory_cartesian.csv") == Path(
        "out/trajectory_cartesian.meta.toml"
    )


def test_metadata_values_parse_as_toml() -> None:
    text = metadata_text(
        {
            "center": Body.EARTH,
            "kind": TrajectoryKind.CARTESIAN,
            "flag": True,
            "count": np.int64(4),
            "offset": np.float64(0.1),
            "missing": math.nan,
            "big": -math.inf,
            "path": Path("a/b.csv"),
            "quoted": 'say "hi"',
        }
    )

    parsed = tomllib.loads(text)

    assert parsed["center"] == "earth"
    assert parsed["kind"] == "cartesian"
    assert parsed["flag"] is True
    assert parsed["count"] == 4
    assert parsed["offset"] == 0.1
    assert math.isnan(parsed["missing"])
    assert parsed["big"] == -math.inf
    assert parsed["path"] == "a/b.csv"
    assert parsed["quoted"] == 'say "hi"'


def test_missing_sidecar(trajectory: Trajectory, tmp_path: Path) -> None:
    path = _write_trajectory(tmp_path, trajectory)
    metadata_path(path).unlink()
    with pytest.raises(ConfigurationError, match="metadata file"):
        read_trajectory(path)


def test_invalid_sidecar(trajectory: Trajectory, tmp_path: Path) -> None:
    path = _write_trajectory(tmp_path, trajectory)
    metadata_path(path).write_text("kind = \n")
    with pytest.raises(ConfigurationError, match="TOML"):
        read_metadata(path)


def test_missing_trajectory_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigurationError, match="does not exist"):
        read_trajectory(tmp_path / "trajectory.csv")


def test_header_is_checked(trajectory: Trajectory, tmp_path: Path) -> None:
    path = _write_trajectory(tmp_path, trajectory)
    df = pd.read_csv(path).rename(columns={"x6": "L"})
    path.write_text(frame_to_csv_text(df))
    with pytest.raises(ConfigurationError, match="header"):
        read_trajectory(path)


def test_kind_must_match_the_sidecar(trajectory: Trajectory, tmp_path: Path) -> None:
    path = _write_trajectory(tmp_path, trajectory)
    metadata_path(path).write_text(
        metadata_text({"center": "moon", "kind": "cartesian", "u_offset": 0.0})
    )
    with pytest.raises(ConfigurationError, match="kinds"):
        read_trajectory(path)


def test_unknown_center_is_a_configuration_error(trajectory: Trajectory, tmp_path: Path) -> None:
    path = _write_trajectory(tmp_path, trajectory)
    metadata_path(path).write_text(
        metadata_text({"center": "mars", "kind": "mgeqoe", "u_offset": 0.0})
    )
    with pytest.raises(ConfigurationError):
        read_trajectory(path)


def test_units_come_from_the_sidecar(trajectory: Trajectory, tmp_path: Path) -> None:
    path = _write_trajectory(tmp_path, trajectory)
    assert read_units(path) is None

    units = make_canonical_units(2000.0, 3.0e5, 4.0e3)
    metadata_path(path).write_text(
        metadata_text(
            trajectory_metadata(
                trajectory,
                l_star_km=units.l_star,
                t_star_s=units.t_star,
                v_star_kms=units.v_star,
            )
        )
    )

    loaded = read_units(path)
    assert loaded is not None
    assert loaded.l_star == units.l_star
    assert loaded.v_star == units.v_star
    assert loaded.gm_sum == pytest.approx(units.gm_sum, rel=1e-12)


def test_incomplete_units_are_rejected(trajectory: Trajectory, tmp_path: Path) -> None:
    path = _write_trajectory(tmp_path, trajectory)
    metadata_path(path).write_text(metadata_text(trajectory_metadata(trajectory, l_star_km=1.0)))
    with pytest.raises(ConfigurationError, match="units"):
        read_units(path)
