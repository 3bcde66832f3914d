"""Collects one verdict line per acceptance criterion for the end-of-run summary."""

from __future__ import annotations

import time

LINES: list[str] = []


class Criterion:
    """Context manager that records named checks, the runtime, and a final verdict.

    The verdict line is logged even when a check fails, then the failure is
    raised as an ``AssertionError`` so pytest reports it.
    """

    def __init__(self, number: int, title: str, limit_secs: float | None = None):
        self.number = number
        self.title = title
        self.limit = limit_secs
        self.checks: list[tuple[str, bool, str]] = []

    def check(self, name: str, ok: bool, detail: str = "") -> bool:
        self.checks.append((name, bool(ok), detail))
        return bool(ok)

    def __enter__(self) -> "Criterion":
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        secs = time.perf_counter() - self.start
        if exc_type is not None:
            self.checks.append(("error", False, f"{exc_type.__name__}: {exc}"))
        if self.limit is not None:
            self.check("runtime", secs < self.limit, f"{secs:.1f}s (limit {self.limit:g}s)")
        ok = all(c[1] for c in self.checks)
        failed = [f"{n} ({d})" if d else n for n, good, d in self.checks if not good]
        detail = "; ".join(f"{n}: {d}" for n, _, d in self.checks if d and n != "runtime")
        line = f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'}  {self.title} [{secs:.1f}s]"
        if detail:
            line += f"  {detail}"
        if failed:
            line += f"  FAILED: {', '.join(failed)}"
        LINES.append(line)
        print(line)
        if exc_type is None and not ok:
            raise AssertionError(line)
        return False
