"""Discrete-event kernel: simulation clock, future-event list and capacitated resources.

The kernel is domain-agnostic. Train lifecycle logic lives in ``portrail.sim``;
this module only guarantees deterministic event ordering and resource-queue
semantics. Time is measured in minutes since run start.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

from .errors import LifecycleError, SimulationError


class EventKind(str, Enum):
    """Trace vocabulary for train movements and servicing milestones."""

    DISPATCH = "dispatch"
    ARRIVAL = "arrival"
    RUN_AROUND_COMPLETE = "run_around_complete"
    CALL_UP = "call_up"
    SHUNT_IN_COMPLETE = "shunt_in_complete"
    LIFT_START = "lift_start"
    LIFT_COMPLETE = "lift_complete"
    CALL_OUT = "call_out"
    SHUNT_OUT_COMPLETE = "shunt_out_complete"
    EXIT_COMPLETE = "exit_complete"
    DEPARTURE = "departure"
    RESOURCE_GRANT = "resource_grant"
    RESOURCE_RELEASE = "resource_release"


class TraceEvent(NamedTuple):
    time: float
    sequence: int
    kind: str
    train: str
    location: str


class Simulation:
    """Simulation clock plus a future-event list with FIFO tie-breaking.

    Events at equal times are processed in insertion order; the (time, sequence)
    pair is a total order over the whole run. Every processed event and every
    synchronous resource grant/release is appended to the trace.
    """

    def __init__(self):
        self.now = 0.0
        self.trace: list[TraceEvent] = []
        self._heap: list[tuple[float, int, str, str, str, Callable[[], None]]] = []
        self._seq = 0
        self.resources: dict[str, "CapacitatedResource"] = {}
        # Optional per-event occupancy audit, enabled by tests.
        self.audit: list[dict[str, int]] | None = None

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def add_resource(self, resource: "CapacitatedResource") -> "CapacitatedResource":
        resource._sim = self
        self.resources[resource.name] = resource
        return resource

    def schedule(self, time: float, kind: EventKind, train: str, location: str,
                 action: Callable[[], None] | None = None) -> None:
        """Insert a future event. Scheduling before the current clock is a logic bug."""
        if time < self.now:
            raise SimulationError(
                f"event {kind.value} for {train} scheduled at {time} before now={self.now}")
        heapq.heappush(self._heap, (time, self._next_seq(), kind.value, train, location, action))

    def schedule_internal(self, time: float, action: Callable[[], None]) -> None:
        """Insert a timer that fires without leaving a trace row (e.g. headway checks)."""
        if time < self.now:
            raise SimulationError(f"internal timer scheduled at {time} before now={self.now}")
        heapq.heappush(self._heap, (time, self._next_seq(), "", "", "", action))

    def record(self, kind: EventKind, train: str, location: str) -> None:
        """Append a synchronous trace row at the current clock."""
        self.trace.append(TraceEvent(self.now, self._next_seq(), kind.value, train, location))

    def pending(self) -> int:
        return len(self._heap)

    def run(self, until: float) -> None:
        """Process all events with time <= until in (time, sequence) order."""
        while self._heap and self._heap[0][0] <= until:
            time, seq, kind, train, location, action = heapq.heappop(self._heap)
            self.now = time
            if kind:
                self.trace.append(TraceEvent(time, seq, kind, train, location))
            if action is not None:
                action()
            if self.audit is not None:
                self.audit.append({name: len(r.occupants) for name, r in self.resources.items()})


@dataclass
class _Waiter:
    train: str
    length: float
    on_grant: Callable[[], None]


class CapacitatedResource:
    """A queue node with integer capacity and a FIFO waiter list.

    A waiter is granted only when the post-grant state satisfies capacity; the
    head of the queue never overtakes and is never overtaken.
    """

    def __init__(self, name: str, capacity: int):
        if capacity < 1:
            raise ValueError(f"resource {name}: capacity must be >= 1")
        self.name = name
        self.capacity = capacity
        self.occupants: list[str] = []
        self.waiters: deque[_Waiter] = deque()
        self.grants = 0
        self._sim: Simulation | None = None

    def can_admit(self, length: float) -> bool:
        return len(self.occupants) < self.capacity

    def _admit(self, train: str, length: float) -> None:
        self.occupants.append(train)

    def _evict(self, train: str) -> None:
        self.occupants.remove(train)

    def request(self, train: str, length: float, on_grant: Callable[[], None]) -> bool:
        """Grant immediately if capacity allows, else enqueue FIFO.

        Returns True when the grant happened synchronously.
        """
        if train in self.occupants:
            raise LifecycleError(f"{train} already occupies {self.name}")
        if any(w.train == train for w in self.waiters):
            raise LifecycleError(f"{train} already queued for {self.name}")
        if not self.waiters and self.can_admit(length):
            self._grant(train, length, on_grant)
            return True
        self.waiters.append(_Waiter(train, length, on_grant))
        return False

    def _grant(self, train: str, length: float, on_grant: Callable[[], None]) -> None:
        self._admit(train, length)
        self.grants += 1
        if self._sim is not None:
            self._sim.record(EventKind.RESOURCE_GRANT, train, self.name)
        on_grant()

    def release(self, train: str) -> None:
        if train not in self.occupants:
            raise LifecycleError(f"{train} does not occupy {self.name}")
        self._evict(train)
        if self._sim is not None:
            self._sim.record(EventKind.RESOURCE_RELEASE, train, self.name)
        while self.waiters and self.can_admit(self.waiters[0].length):
            waiter = self.waiters.popleft()
            self._grant(waiter.train, waiter.length, waiter.on_grant)


class YardResource(CapacitatedResource):
    """Length-aware staging yard made of roads.

    Each road hosts either up to two trains at or below the long-train
    threshold, or exactly one train above it. Placement is sticky (a train
    stays on its road until released) and allocation is best-fit: short
    trains fill half-occupied roads before opening an empty one.
    """

    def __init__(self, name: str, roads: int, long_threshold_m: float = 650.0):
        super().__init__(name, capacity=2 * roads)
        self.long_threshold_m = long_threshold_m
        self.roads: list[list[tuple[str, float]]] = [[] for _ in range(roads)]

    def _is_long(self, length: float) -> bool:
        return length > self.long_threshold_m

    def _road_can_host(self, road: list[tuple[str, float]], length: float) -> bool:
        if self._is_long(length):
            return not road
        if any(self._is_long(l) for _, l in road):
            return False
        return len(road) < 2

    def can_admit(self, length: float) -> bool:
        return any(self._road_can_host(road, length) for road in self.roads)

    def _admit(self, train: str, length: float) -> None:
        candidates = [i for i, road in enumerate(self.roads) if self._road_can_host(road, length)]
        if not candidates:
            raise SimulationError(f"{self.name}: admit called without a feasible road")
        if not self._is_long(length):
            half_full = [i for i in candidates if len(self.roads[i]) == 1]
            if half_full:
                candidates = half_full
        self.roads[candidates[0]].append((train, length))
        self.occupants.append(train)

    def _evict(self, train: str) -> None:
        for road in self.roads:
            for entry in road:
                if entry[0] == train:
                    road.remove(entry)
                    self.occupants.remove(train)
                    return
        raise LifecycleError(f"{train} not found on any road of {self.name}")

    def half_slots_used(self) -> int:
        """Occupancy in half-road slots: a long train counts double."""
        return sum(2 if self._is_long(l) else 1 for road in self.roads for _, l in road)

    def half_slot_capacity(self) -> int:
        return 2 * len(self.roads)
