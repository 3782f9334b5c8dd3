from typing import Callable

import numpy as np
import numpy.typing as npt
from typing_extensions import TypeAlias

Vector3: TypeAlias = npt.NDArray[np.float64]
StateVector: TypeAlias = npt.NDArray[np.float64]
Matrix: TypeAlias = npt.NDArray[np.float64]

# Canonical time since the scenario reference epoch.
Epoch: TypeAlias = float

# (position, epoch) -> potential energy per unit mass, canonical units
PotentialFunction: TypeAlias = Callable[[Vector3, Epoch], float]

# (epoch, y) -> dy/dt
RightHandSide: TypeAlias = Callable[[Epoch, StateVector], StateVector]
