"""Collects one verdict line per acceptance criterion."""

import time
from contextlib import contextmanager

LINES: list[str] = []


@contextmanager
def criterion(number: int, title: str, limit: float):
    """Time the block; record PASS only if it finished cleanly within ``limit`` seconds."""
    t0 = time.perf_counter()
    note = {"detail": ""}
    try:
        yield note
    except BaseException as exc:
        el = time.perf_counter() - t0
        LINES.append(f"[{number}] FAIL {title} ({el:.1f}s / {limit:g}s) {type(exc).__name__}: {exc}".rstrip())
        print(LINES[-1])
        raise
    el = time.perf_counter() - t0
    ok = el <= limit
    LINES.append(f"[{number}] {'PASS' if ok else 'FAIL'} {title} ({el:.1f}s / {limit:g}s) {note['detail']}".rstrip())
    print(LINES[-1])
    assert ok, f"criterion {number} took {el:.1f}s, limit {limit}s"
