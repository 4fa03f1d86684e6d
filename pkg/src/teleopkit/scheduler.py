"""Deterministic periodic-task scheduler over an injected clock.

All pipeline loops (feedback publisher, camera, recorder, bridge pump)
register here instead of owning threads.  On a virtual clock the
scheduler advances time itself, firing tasks in (deadline, priority,
registration order) sequence, which is what makes whole-pipeline runs
reproducible to the byte.  On a wall clock the same queue is served with
real sleeps.

Tasks are fixed-rate: the next deadline is previous + period, so a slow
callback causes catch-up ticks rather than silent drift.
"""

from __future__ import annotations

import heapq
import itertools
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from .clock import Clock, VirtualClock, WallClock, s_to_ns

TaskFn = Callable[[int], None]


@dataclass
class Task:
    name: str
    period_ns: int  # 0 for one-shot
    fn: TaskFn
    priority: int
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True


@dataclass(order=True)
class _Entry:
    deadline_ns: int
    priority: int
    seq: int
    task: Task = field(compare=False)


class Scheduler:
    def __init__(self, clock: Clock):
        self.clock = clock
        self._heap: list[_Entry] = []
        self._seq = itertools.count()

    def every(
        self,
        name: str,
        period_s: float,
        fn: TaskFn,
        priority: int = 0,
        first_at_ns: Optional[int] = None,
    ) -> Task:
        """Register a periodic task; lower priority value runs first on ties."""
        if period_s <= 0:
            raise ValueError(f"period must be positive, got {period_s}")
        task = Task(name=name, period_ns=s_to_ns(period_s), fn=fn, priority=priority)
        start = self.clock.now_ns() if first_at_ns is None else first_at_ns
        heapq.heappush(self._heap, _Entry(start, priority, next(self._seq), task))
        return task

    def at(self, t_ns: int, name: str, fn: TaskFn, priority: int = 0) -> Task:
        task = Task(name=name, period_ns=0, fn=fn, priority=priority)
        heapq.heappush(self._heap, _Entry(t_ns, priority, next(self._seq), task))
        return task

    def next_deadline_ns(self) -> Optional[int]:
        while self._heap and self._heap[0].task.cancelled:
            heapq.heappop(self._heap)
        return self._heap[0].deadline_ns if self._heap else None

    def run_until(self, t_end_ns: int, stop: Optional[threading.Event] = None) -> int:
        """Fire every task due up to and including t_end_ns.

        Moves the clock itself: a virtual clock is advanced, a wall clock
        is slept-on.  Returns the number of callbacks executed.
        """
        fired = 0
        while True:
            if stop is not None and stop.is_set():
                break
            deadline = self.next_deadline_ns()
            if deadline is None or deadline > t_end_ns:
                break
            self._move_clock_to(deadline, stop)
            entry = heapq.heappop(self._heap)
            task = entry.task
            if task.cancelled:
                continue
            task.fn(entry.deadline_ns)
            fired += 1
            if task.period_ns > 0:
                heapq.heappush(
                    self._heap,
                    _Entry(
                        entry.deadline_ns + task.period_ns,
                        task.priority,
                        next(self._seq),
                        task,
                    ),
                )
        if stop is None or not stop.is_set():
            # a stop request halts time where it is; only a completed run
            # parks the clock at the requested horizon
            self._move_clock_to(t_end_ns, stop)
        return fired

    def run_for(self, duration_s: float, stop: Optional[threading.Event] = None) -> int:
        return self.run_until(self.clock.now_ns() + s_to_ns(duration_s), stop)

    def _move_clock_to(self, t_ns: int, stop: Optional[threading.Event]) -> None:
        if isinstance(self.clock, VirtualClock):
            if t_ns > self.clock.now_ns():
                self.clock.advance_to(t_ns)
        elif isinstance(self.clock, WallClock):
            self.clock.sleep_until(t_ns, interrupt=stop)
        else:  # custom clock: best effort, no waiting semantics known
            pass
