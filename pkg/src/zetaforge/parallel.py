"""Order-preserving map over a bounded thread pool."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

ENV_WORKERS = "ZETAFORGE_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(ENV_WORKERS, "1")))
    except ValueError:
        return 1


def pmap(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """[fn(x) for x in items]; results are independent of the worker count."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
