"""Deterministic discrete-event core: clock, ordered queue, dispatch.

Time is seconds since run start as a float. Events with equal fire times are
processed in insertion order, which makes the whole run a deterministic
function of (config, root seed).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable

SimTime = float


class SimulationError(Exception):
    pass


class ScheduleInPastError(SimulationError):
    pass


class SimulationFault(SimulationError):
    """A handler raised; carries the offending event for diagnostics."""

    def __init__(self, fire_at: SimTime, payload, cause: BaseException):
        super().__init__(f"handler failed at t={fire_at} for {payload!r}: {cause!r}")
        self.fire_at = fire_at
        self.payload = payload
        self.cause = cause


# Event payloads. The payload type selects the handler.

@dataclass(frozen=True)
class InstanceLaunched:
    instance_id: int
    fleet_key: str
    region_id: str
    instance_type: str


@dataclass(frozen=True)
class InstancePreempted:
    instance_id: int


@dataclass(frozen=True)
class InstanceDeprovisioned:
    instance_id: int


@dataclass(frozen=True)
class JobFetchDone:
    job_id: int
    attempt_seq: int


@dataclass(frozen=True)
class JobCompleted:
    job_id: int
    attempt_seq: int


@dataclass(frozen=True)
class StageTrigger:
    stage_index: int


@dataclass(frozen=True)
class MetricsSample:
    pass


@dataclass(frozen=True)
class RampdownStart:
    pass


@dataclass(order=True)
class Event:
    fire_at: SimTime
    seq: int
    payload: object = field(compare=False)


class Simulator:
    """Single-threaded event loop; one instance per run."""

    def __init__(self):
        self.now: SimTime = 0.0
        self._heap: list[Event] = []
        self._seq = 0
        self._handlers: dict[type, Callable] = {}
        self.processed = 0
        self.event_log: list[tuple[SimTime, int, str]] | None = None

    def on(self, payload_type: type, handler: Callable) -> None:
        self._handlers[payload_type] = handler

    def schedule(self, fire_at: SimTime, payload) -> Event:
        if fire_at < self.now:
            raise ScheduleInPastError(
                f"cannot schedule at t={fire_at} (clock is {self.now})"
            )
        ev = Event(fire_at, self._seq, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def peek_time(self) -> SimTime | None:
        return self._heap[0].fire_at if self._heap else None

    def run_until(self, t_end: SimTime) -> int:
        if t_end < self.now:
            raise SimulationError(f"run_until({t_end}) before clock {self.now}")
        n = 0
        while self._heap and self._heap[0].fire_at <= t_end:
            ev = heapq.heappop(self._heap)
            self.now = ev.fire_at
            handler = self._handlers.get(type(ev.payload))
            if handler is None:
                raise SimulationError(f"no handler for {type(ev.payload).__name__}")
            if self.event_log is not None:
                self.event_log.append((ev.fire_at, ev.seq, _describe(ev.payload)))
            try:
                handler(ev.payload)
            except SimulationError:
                raise
            except Exception as exc:
                raise SimulationFault(ev.fire_at, ev.payload, exc) from exc
            n += 1
        self.now = t_end
        self.processed += n
        return n


def _describe(payload) -> str:
    name = type(payload).__name__
    parts = [f"{k}={v}" for k, v in vars(payload).items()] if vars(payload) else []
    return f"{name}({','.join(parts)})" if parts else name
