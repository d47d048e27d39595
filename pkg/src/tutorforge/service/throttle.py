"""Token-bucket throttling, one bucket per session."""

from __future__ import annotations

import time
from typing import Callable


class TokenBucket:
    """Capacity B, refilling at R tokens per hour, clock injectable."""

    def __init__(self, capacity: int = 10, refill_per_hour: float = 10.0,
                 clock: Callable[[], float] = time.monotonic):
        if capacity < 1 or refill_per_hour <= 0:
            raise ValueError("capacity >= 1 and positive refill rate required")
        self.capacity = capacity
        self.refill_per_hour = refill_per_hour
        self._clock = clock
        self._tokens = float(capacity)
        self._stamp = clock()

    def _refill(self) -> None:
        now = self._clock()
        elapsed_hours = (now - self._stamp) / 3600.0
        self._stamp = now
        self._tokens = min(float(self.capacity),
                           self._tokens + elapsed_hours * self.refill_per_hour)

    @property
    def tokens(self) -> float:
        self._refill()
        return self._tokens

    def try_consume(self) -> float | None:
        """Take one token; returns None on success, else retry-after seconds."""
        self._refill()
        if self._tokens >= 1.0:
            self._tokens -= 1.0
            return None
        deficit = 1.0 - self._tokens
        return deficit / self.refill_per_hour * 3600.0
