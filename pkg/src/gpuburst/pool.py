"""High-throughput pool: job queue, slot registry, FIFO matchmaking.

Preempted jobs restart from zero on another slot (the workload has no
checkpointing); requeued jobs keep their original submit-time priority, so
the queue always hands out the oldest work first.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field

from .market import Provider


class PoolError(ValueError):
    pass


class JobState(str, enum.Enum):
    QUEUED = "queued"
    FETCHING = "fetching"
    RUNNING = "running"
    COMPLETED = "completed"


class SlotState(str, enum.Enum):
    IDLE = "idle"
    BUSY = "busy"
    TERMINATED = "terminated"


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    PREEMPTED = "preempted"
    KILLED_RAMPDOWN = "killed_rampdown"


@dataclass
class Attempt:
    seq: int  # globally unique; stale fetch/complete events check against it
    slot_id: int
    instance_type: str
    gpu_model: str
    provider: Provider
    region_id: str
    start: float
    fetch_s: float = 0.0
    runtime_s: float = 0.0
    end: float | None = None
    outcome: Outcome | None = None

    @property
    def wasted_s(self) -> float:
        if self.outcome in (Outcome.PREEMPTED, Outcome.KILLED_RAMPDOWN):
            return self.end - self.start
        return 0.0

    @property
    def busy_s(self) -> float:
        return (self.end - self.start) if self.end is not None else 0.0


@dataclass
class Job:
    job_id: int
    submit_time: float
    state: JobState = JobState.QUEUED
    attempts: list[Attempt] = field(default_factory=list)
    work_photons: int = 0

    @property
    def current_attempt(self) -> Attempt | None:
        if self.attempts and self.attempts[-1].outcome is None:
            return self.attempts[-1]
        return None

    @property
    def wasted_s(self) -> float:
        return sum(a.wasted_s for a in self.attempts)


@dataclass
class Slot:
    slot_id: int
    instance_id: int
    instance_type: str
    gpu_model: str
    provider: Provider
    region_id: str
    state: SlotState = SlotState.IDLE
    job_id: int | None = None
    draining: bool = False
    created_at: float = 0.0
    idle_since: float = 0.0
    idle_s: float = 0.0  # accumulated idle time, finalized at termination


class Pool:
    def __init__(self):
        self.jobs: dict[int, Job] = {}
        self.slots: dict[int, Slot] = {}
        self._queue: list[tuple[float, int]] = []  # (submit_time, job_id)
        self._free: dict[int, Slot] = {}  # insertion-ordered
        self._attempt_seq = 0
        self.n_fetching = 0
        self.n_running = 0
        self.n_completed = 0

    # -- queue ----------------------------------------------------------

    def submit(self, jobs: list[Job]) -> int:
        """Append a batch in submit order; returns resulting queue depth."""
        for job in jobs:
            if job.job_id in self.jobs:
                raise PoolError(f"duplicate job id {job.job_id}")
        for job in jobs:
            self.jobs[job.job_id] = job
            heapq.heappush(self._queue, (job.submit_time, job.job_id))
        return len(self._queue)

    @property
    def queue_depth(self) -> int:
        return len(self._queue)

    def _requeue(self, job: Job) -> None:
        # original submit time keeps the job at the head of its cohort
        job.state = JobState.QUEUED
        heapq.heappush(self._queue, (job.submit_time, job.job_id))

    # -- slots ----------------------------------------------------------

    def add_slot(self, slot: Slot) -> None:
        if slot.slot_id in self.slots:
            raise PoolError(f"duplicate slot id {slot.slot_id}")
        self.slots[slot.slot_id] = slot
        self._free[slot.slot_id] = slot

    def free_slot_count(self) -> int:
        return len(self._free)

    # -- matchmaking ----------------------------------------------------

    def match(self, t: float) -> list[tuple[Slot, Job]]:
        """Assign oldest queued jobs to free slots (any slot takes any job)."""
        assignments: list[tuple[Slot, Job]] = []
        while self._free and self._queue:
            _, job_id = heapq.heappop(self._queue)
            slot_id = next(iter(self._free))
            slot = self._free.pop(slot_id)
            job = self.jobs[job_id]
            slot.state = SlotState.BUSY
            slot.job_id = job_id
            slot.idle_s += t - slot.idle_since
            job.state = JobState.FETCHING
            self._attempt_seq += 1
            job.attempts.append(
                Attempt(
                    seq=self._attempt_seq,
                    slot_id=slot.slot_id,
                    instance_type=slot.instance_type,
                    gpu_model=slot.gpu_model,
                    provider=slot.provider,
                    region_id=slot.region_id,
                    start=t,
                )
            )
            self.n_fetching += 1
            assignments.append((slot, job))
        return assignments

    def on_fetch_done(self, job: Job, t: float, runtime_s: float) -> Attempt:
        attempt = job.current_attempt
        if attempt is None or job.state is not JobState.FETCHING:
            raise PoolError(f"fetch-done for job {job.job_id} not fetching")
        attempt.fetch_s = t - attempt.start
        attempt.runtime_s = runtime_s
        job.state = JobState.RUNNING
        self.n_fetching -= 1
        self.n_running += 1
        return attempt

    def on_complete(self, slot: Slot, job: Job, t: float) -> Attempt:
        """Job finished on its slot; the slot frees (or drains out)."""
        attempt = job.current_attempt
        if attempt is None or attempt.slot_id != slot.slot_id:
            raise PoolError(f"completion mismatch job {job.job_id} slot {slot.slot_id}")
        attempt.end = t
        attempt.outcome = Outcome.SUCCESS
        job.state = JobState.COMPLETED
        self.n_running -= 1
        self.n_completed += 1
        slot.job_id = None
        if slot.draining:
            self._terminate(slot, t)
        else:
            slot.state = SlotState.IDLE
            slot.idle_since = t
            self._free[slot.slot_id] = slot
        return attempt

    def on_preempt(self, slot: Slot, t: float, outcome: Outcome = Outcome.PREEMPTED) -> Job | None:
        """Close the slot's attempt as wasted and requeue its job.

        Idle slots terminate without recording an attempt.
        """
        if slot.state is SlotState.TERMINATED:
            return None
        job = None
        if slot.state is SlotState.BUSY and slot.job_id is not None:
            job = self.jobs[slot.job_id]
            attempt = job.current_attempt
            attempt.end = t
            attempt.outcome = outcome
            if job.state is JobState.FETCHING:
                self.n_fetching -= 1
            else:
                self.n_running -= 1
            self._requeue(job)
            slot.job_id = None
        self._terminate(slot, t)
        return job

    def _terminate(self, slot: Slot, t: float) -> None:
        if slot.state is SlotState.IDLE:
            slot.idle_s += t - slot.idle_since
        self._free.pop(slot.slot_id, None)
        slot.state = SlotState.TERMINATED

    def drain_slot(self, slot: Slot, t: float) -> None:
        """Mark for termination at the current job boundary; idle ones die now."""
        slot.draining = True
        if slot.state is SlotState.IDLE:
            self._terminate(slot, t)

    # -- invariant helpers ----------------------------------------------

    def state_counts(self) -> dict[JobState, int]:
        n_q = len(self._queue)
        return {
            JobState.QUEUED: n_q,
            JobState.FETCHING: self.n_fetching,
            JobState.RUNNING: self.n_running,
            JobState.COMPLETED: self.n_completed,
        }
