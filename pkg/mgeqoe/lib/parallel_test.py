import math

import pytest

from mgeqoe.exceptions import ConfigurationError
from mgeqoe.lib.parallel import THREADS_ENV_VARIABLE, parallel_map, worker_count


@pytest.fixture(autouse=True)
def no_thread_cap(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv(THREADS_ENV_VARIABLE, raising=False)


def test_requested_count_wins() -> None:
    assert worker_count(3) == 3


def test_environment_caps_the_count(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv(THREADS_ENV_VARIABLE, "2")
    assert worker_count() == 2
    assert worker_count(8) == 2
    assert worker_count(1) == 1


def test_default_is_at_least_one() -> None:
    assert worker_count() >= 1


@pytest.mark.parametrize("raw", ["zero", "0", "-4"])
def test_invalid_environment_raises(monkeypatch: pytest.MonkeyPatch, raw: str) -> None:
    monkeypatch.setenv(THREADS_ENV_VARIABLE, raw)
    with pytest.raises(ConfigurationError, match=THREADS_ENV_VARIABLE):
        worker_count()


def test_invalid_request_raises() -> None:
    with pytest.raises(ConfigurationError):
        worker_count(0)


@pytest.mark.parametrize("n_jobs", [1, 2])
def test_parallel_map_keeps_the_order(n_jobs: int) -> None:
    items = [float(k) for k in range(20)]
    assert parallel_map(math.sqrt, items, n_jobs) == [math.sqrt(x) for x in items]
