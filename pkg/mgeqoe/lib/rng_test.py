import numpy as np

from mgeqoe.lib.rng import sample_generators


def test_streams_are_distinct() -> None:
    draws = [generator.standard_normal(4) for generator in sample_generators(1, 5)]
    for i in range(5):
        for j in range(i + 1, 5):
            assert not np.array_equal(draws[i], draws[j])


def test_seed_changes_every_stream() -> None:
    first = [generator.random() for generator in sample_generators(1, 3)]
    second = [generator.random() for generator in sample_generators(2, 3)]
    assert all(a != b for a, b in zip(first, second))


def test_no_streams() -> None:
    assert sample_generators(5, 0) == []
