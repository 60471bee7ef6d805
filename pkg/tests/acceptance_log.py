"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import time
from contextlib import contextmanager

RESULTS: dict[int, tuple[bool, str, str]] = {}


@contextmanager
def criterion(number: int, title: str):
    t0 = time.perf_counter()
    note: dict = {}
    try:
        yield note
    except BaseException as exc:
        RESULTS[number] = (False, title, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        raise
    RESULTS[number] = (True, title, note.get("detail", f"{time.perf_counter() - t0:.2f}s"))
