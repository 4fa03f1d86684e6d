"""Injectable time sources.

Every component in the stack takes a clock at construction instead of
calling time functions directly, so the whole pipeline can run on a
virtual timeline in tests and on the wall clock in production.  All
timestamps are integer nanoseconds from an arbitrary monotonic origin.
"""

from __future__ import annotations

import time
from typing import Protocol


def s_to_ns(seconds: float) -> int:
    return int(round(seconds * 1e9))


def ns_to_s(ns: int) -> float:
    return ns / 1e9


class Clock(Protocol):
    def now_ns(self) -> int: ...


class WallClock:
    """Monotonic wall-time clock for live operation."""

    def now_ns(self) -> int:
        return time.monotonic_ns()

    def sleep_until(self, t_ns: int, interrupt=None) -> None:
        while interrupt is None or not interrupt.is_set():
            dt = t_ns - self.now_ns()
            if dt <= 0:
                return
            time.sleep(min(dt / 1e9, 0.05))


class VirtualClock:
    """Deterministic clock advanced explicitly by the scheduler.

    Time never moves on its own; `advance_to` is the only way forward,
    and moving backwards is a programming error.
    """

    def __init__(self, start_ns: int = 0):
        self._now = start_ns

    def now_ns(self) -> int:
        return self._now

    def advance_to(self, t_ns: int) -> None:
        if t_ns < self._now:
            raise ValueError(f"virtual clock cannot go backwards: {t_ns} < {self._now}")
        self._now = t_ns

    def advance(self, dt_s: float) -> int:
        self.advance_to(self._now + s_to_ns(dt_s))
        return self._now
