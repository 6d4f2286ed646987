"""Tick pacing: wall-clock with drift correction, or a virtual clock so
tests and CI replay long scenarios in milliseconds."""

from __future__ import annotations

import logging
import threading
import time

log = logging.getLogger(__name__)


class WallClock:
    """Monotonic wall time; sleeping waits out the remaining interval."""

    def now(self) -> float:
        return time.monotonic()

    def sleep_until(self, deadline: float) -> float:
        """Sleep to the deadline; returns how late we woke (0 when on time)."""
        remaining = deadline - time.monotonic()
        if remaining > 0:
            time.sleep(remaining)
            return 0.0
        return -remaining


class VirtualClock:
    """Jumps straight to each deadline; never behind, never sleeps."""

    def __init__(self, start: float = 0.0):
        self._now = start
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._now

    def sleep_until(self, deadline: float) -> float:
        with self._lock:
            if deadline > self._now:
                self._now = deadline
        return 0.0


def run_paced(tick, tick_s: float, clock, stop: threading.Event, max_lag_s: float = 1.0):
    """Call ``tick()`` every ``tick_s`` clock seconds until ``stop`` is set.

    When the loop falls more than ``max_lag_s`` behind, it logs and jumps to
    the present rather than replaying missed ticks.
    """
    deadline = clock.now()
    while not stop.is_set():
        deadline += tick_s
        lag = clock.sleep_until(deadline)
        if lag > max_lag_s:
            log.warning("tick loop %0.2f s behind schedule, jumping to now", lag)
            deadline = clock.now()
        tick()
