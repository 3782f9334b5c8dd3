import os
from typing import Callable, Iterable, List, Optional, TypeVar

import structlog
from joblib import Parallel, delayed

from mgeqoe.exceptions import ConfigurationError

logger = structlog.get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV_VARIABLE = "MGEQOE_THREADS"


def worker_count(requested: Optional[int] = None) -> int:
    """Number of workers to use.

    ``requested`` wins when given, otherwise ``MGEQOE_THREADS`` is read, and
    the CPU count is the fallback. The environment variable also caps the result.
    """
    cap: Optional[int] = None
    raw = os.environ.get(THREADS_ENV_VARIABLE)
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigurationError(
                f"{THREADS_ENV_VARIABLE} must be a positive integer, got {raw!r}"
            ) from None
        if cap < 1:
            raise ConfigurationError(f"{THREADS_ENV_VARIABLE} must be positive, got {cap}")

    if requested is not None and requested < 1:
        raise ConfigurationError(f"worker count must be positive, got {requested}")
    count = requested or cap or os.cpu_count() or 1
    return min(count, cap) if cap else count


def parallel_map(
    func: Callable[[T], R], items: Iterable[T], n_jobs: Optional[int] = None
) -> List[R]:
    """Apply ``func`` to every item, in order, on up to ``n_jobs`` processes."""
    n_jobs = worker_count(n_jobs)
    if n_jobs == 1:
        return [func(item) for item in items]
    logger.debug("dispatching to workers", n_jobs=n_jobs)
    results: List[R] = Parallel(n_jobs=n_jobs, backend="loky")(
        delayed(func)(item) for item in items
    )
    return results
