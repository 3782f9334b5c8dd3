"""CSV files and their flat TOML metadata sidecars."""

from __future__ import annotations

import json
import math
import tomllib
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np
import pandas as pd
import structlog

from mgeqoe.core import Body, CanonicalUnits
from mgeqoe.exceptions import ConfigurationError, UnknownBody
from mgeqoe.propagation import Trajectory, TrajectoryKind

logger = structlog.get_logger(__name__)

FLOAT_FORMAT = "%.16e"
STATE_COLUMNS = [f"x{i}" for i in range(1, 7)]
TRAJECTORY_COLUMNS = ["epoch", "kind", *STATE_COLUMNS]
METADATA_SUFFIX = ".meta.toml"

# file name -> file content
Outputs = Dict[str, str]


def frame_to_csv_text(df: pd.DataFrame) -> str:
    """CSV text with round-trip float formatting and LF line endings.

    >>> print(frame_to_csv_text(pd.DataFrame({"epoch": [0.5]})), end="")
    epoch
    5.0000000000000000e-01
    """
    text: str = df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return text


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return FLOAT_FORMAT % value
    if isinstance(value, Path):
        value = str(value)
    # a JSON string is a valid TOML basic string
    return json.dumps(str(value.value if isinstance(value, (Body, TrajectoryKind)) else value))


def metadata_text(metadata: Mapping[str, Any]) -> str:
    """Flat ``key = value`` TOML document.

    >>> print(metadata_text({"kind": "cartesian", "u_offset": 0.25, "seed": 3}), end="")
    kind = "cartesian"
    u_offset = 2.5000000000000000e-01
    seed = 3
    """
    return "".join(f"{key} = {_toml_value(value)}\n" for key, value in metadata.items())


def metadata_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.stem + METADATA_SUFFIX)


def read_metadata(path: Union[str, Path]) -> Dict[str, Any]:
    sidecar = metadata_path(path)
    if not sidecar.is_file():
        raise ConfigurationError(f"metadata file {sidecar} does not exist")
    try:
        with sidecar.open("rb") as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"metadata file {sidecar} is not valid TOML: {e}") from e


def trajectory_to_frame(traj: Trajectory) -> pd.DataFrame:
    df = pd.DataFrame(traj.states, columns=STATE_COLUMNS)
    df.insert(0, "kind", traj.kind.value)
    df.insert(0, "epoch", traj.epochs)
    return df


def trajectory_metadata(traj: Trajectory, **extra: Any) -> Dict[str, Any]:
    return {
        "center": traj.center.value,
        "kind": traj.kind.value,
        "units": "canonical",
        "u_offset": traj.u_offset,
        **extra,
    }


def read_trajectory(path: Union[str, Path]) -> Trajectory:
    """Read a trajectory CSV and its sidecar."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"trajectory file {path} does not exist")
    metadata = read_metadata(path)
    try:
        df = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"cannot parse trajectory file {path}: {e}") from e
    if list(df.columns) != TRAJECTORY_COLUMNS:
        raise ConfigurationError(
            f"trajectory file {path} must have the header {','.join(TRAJECTORY_COLUMNS)}"
        )
    kinds = set(df["kind"])
    if kinds != {metadata.get("kind")}:
        raise ConfigurationError(f"trajectory file {path} mixes kinds or disagrees with metadata")
    try:
        return Trajectory(
            kind=TrajectoryKind(metadata["kind"]),
            epochs=df["epoch"].to_numpy(dtype=np.float64),
            states=df[STATE_COLUMNS].to_numpy(dtype=np.float64),
            center=Body.from_name(metadata["center"]),
            u_offset=float(metadata.get("u_offset", 0.0)),
        )
    except (KeyError, ValueError, UnknownBody) as e:
        raise ConfigurationError(f"invalid trajectory file {path}: {e}") from e


def read_units(path: Union[str, Path]) -> Optional[CanonicalUnits]:
    """Canonical units recorded in the sidecar of ``path``, or None when absent."""
    metadata = read_metadata(path)
    keys = ("l_star_km", "t_star_s", "v_star_kms")
    if not any(key in metadata for key in keys):
        return None
    try:
        l_star, t_star, v_star = (float(metadata[key]) for key in keys)
        return CanonicalUnits(
            l_star=l_star, gm_sum=l_star**3 / t_star**2, t_star=t_star, v_star=v_star
        )
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise ConfigurationError(f"invalid units in the metadata of {path}: {e}") from e


def write_outputs(directory: Union[str, Path], outputs: Outputs) -> None:
    """Write staged outputs; nothing is written before every file is ready."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, content in outputs.items():
        with (directory / name).open("w", encoding="utf-8", newline="\n") as f:
            f.write(content)
    logger.info("wrote outputs", directory=str(directory), files=sorted(outputs))
