"""Ordered fan-out over a process pool with shared read-only state.

Task partitioning never depends on the worker count, and results come back in
task order, so outputs are identical for every ``workers`` value.
"""

from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

_STATE: dict[str, Any] = {}


def shared() -> dict[str, Any]:
    return _STATE


def _install(state: dict[str, Any]) -> None:
    _STATE.clear()
    _STATE.update(state)


def default_workers() -> int:
    return os.cpu_count() or 1


def run_ordered(func: Callable, tasks: Sequence, state: dict[str, Any], workers: int | None = 1) -> list:
    """Apply ``func`` to every task; ``func`` reads ``state`` through :func:`shared`."""
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(tasks) <= 1:
        saved = dict(_STATE)
        _install(state)
        try:
            return [func(t) for t in tasks]
        finally:
            _install(saved)
    methods = mp.get_all_start_methods()
    ctx = mp.get_context("fork" if "fork" in methods else "spawn")
    with ProcessPoolExecutor(
        max_workers=min(workers, len(tasks)), mp_context=ctx, initializer=_install, initargs=(state,)
    ) as pool:
        return list(pool.map(func, tasks))
