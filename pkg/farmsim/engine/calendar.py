import heapq
import itertools
from enum import IntEnum
from typing import Any

from farmsim.exceptions import CalendarCorruption


class EventKind(IntEnum):
    ARRIVAL = 1
    DEPARTURE = 2
    BOUNDARY = 3


class EventCalendar:
    """Pending events ordered by (time, insertion sequence)."""

    def __init__(self) -> None:
        self._pq: list[tuple[float, int, EventKind, Any]] = []
        self._counter = itertools.count()
        self.now = 0.0

    def __len__(self) -> int:
        return len(self._pq)

    @property
    def empty(self) -> bool:
        return len(self._pq) == 0

    def push(self, time: float, kind: EventKind, payload: Any) -> None:
        if time < self.now:
            raise CalendarCorruption(f"event at {time} scheduled in the past (now {self.now})")
        heapq.heappush(self._pq, (time, next(self._counter), kind, payload))

    def peek_time(self) -> float | None:
        return self._pq[0][0] if self._pq else None

    def pop(self) -> tuple[float, EventKind, Any]:
        time, _, kind, payload = heapq.heappop(self._pq)
        if time < self.now:
            raise CalendarCorruption(f"event time {time} before current time {self.now}")
        self.now = time
        return time, kind, payload
