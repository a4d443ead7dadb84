"""Order-preserving map over guesses, optionally across worker processes."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def pmap(fn, items, jobs: int = 1) -> list:
    """``list(map(fn, items))``; with ``jobs > 1`` the calls run in a process pool.

    Results come back in input order, so reductions over them do not depend
    on ``jobs``.  ``fn`` must be a module-level function.
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(a) for a in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
