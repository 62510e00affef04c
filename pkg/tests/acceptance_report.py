"""Collects one pass/fail line per acceptance criterion for the terminal summary."""
import contextlib
import time

LINES: list = []


@contextlib.contextmanager
def criterion(label: str, title: str):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        LINES.append(f"[FAIL] {label}: {title} ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})")
        raise
    LINES.append(f"[PASS] {label}: {title} ({time.perf_counter() - t0:.1f}s)")
