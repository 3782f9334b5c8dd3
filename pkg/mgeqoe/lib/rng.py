from typing import List

import numpy as np


def sample_generators(seed: int, n: int) -> List[np.random.Generator]:
    """One independent generator per sample, derived from a single seed.

    Sample ``i`` always draws from the same substream, whatever the number of
    samples drawn before it or the worker that draws it.

    Examples
    --------
    >>> first = sample_generators(42, 3)[2].standard_normal()
    >>> second = sample_generators(42, 10)[2].standard_normal()
    >>> first == second
    True
    """
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(n)]
