"""
Server runtime state and service disciplines.

Residual sizes are advanced exactly between events: under PS every resident job depletes at rate mu/n,
under SRPT only the job with the smallest residual depletes, at rate mu.
The engine advances a server before changing its job set and asks for the next departure afterwards.
"""

from dataclasses import dataclass
from typing import Callable, TypeAlias

from farmsim.exceptions import InvariantViolation
from farmsim.model import Discipline, ServerGroup

RESIDUAL_TOLERANCE = 1e-9


@dataclass(slots=True)
class JobRecord:
    job_id: int
    job_type: int
    size: float
    remaining: float
    arrival_time: float


class ServerRuntime:
    __slots__ = ("server_id", "group", "mu", "jobs", "last_update", "version")

    def __init__(self, server_id: int, group: ServerGroup) -> None:
        self.server_id = server_id
        self.group = group
        self.mu = group.mu
        self.jobs: list[JobRecord] = []
        self.last_update = 0.0
        # bumped on every reschedule, departure events of older versions are stale
        self.version = 0

    def __len__(self) -> int:
        return len(self.jobs)

    def smallest(self) -> JobRecord:
        return min(self.jobs, key=lambda job: (job.remaining, job.job_id))

    def pop_completed(self) -> JobRecord:
        job = self.smallest()
        if job.remaining > RESIDUAL_TOLERANCE * max(1.0, job.size):
            raise InvariantViolation(f"server {self.server_id}: departure of job {job.job_id} with residual {job.remaining}")
        self.jobs.remove(job)
        return job


def _check_residuals(server: ServerRuntime) -> None:
    for job in server.jobs:
        if job.remaining < -RESIDUAL_TOLERANCE * max(1.0, job.size):
            raise InvariantViolation(f"server {server.server_id}: negative residual {job.remaining} of job {job.job_id}")


def ps_advance(server: ServerRuntime, now: float) -> None:
    dt = now - server.last_update
    if dt > 0 and server.jobs:
        service = dt * server.mu / len(server.jobs)
        for job in server.jobs:
            job.remaining -= service
        _check_residuals(server)
    server.last_update = now


def ps_next_departure(server: ServerRuntime, now: float) -> float | None:
    if not server.jobs:
        return None
    smallest = min(job.remaining for job in server.jobs)
    return now + len(server.jobs) * max(smallest, 0.0) / server.mu


def ps_reschedule(server: ServerRuntime, now: float) -> float | None:
    ps_advance(server, now)
    return ps_next_departure(server, now)


def srpt_advance(server: ServerRuntime, now: float) -> None:
    dt = now - server.last_update
    if dt > 0 and server.jobs:
        job = server.smallest()
        job.remaining -= dt * server.mu
        _check_residuals(server)
    server.last_update = now


def srpt_next_departure(server: ServerRuntime, now: float) -> float | None:
    if not server.jobs:
        return None
    return now + max(server.smallest().remaining, 0.0) / server.mu


def srpt_reschedule(server: ServerRuntime, now: float) -> float | None:
    srpt_advance(server, now)
    return srpt_next_departure(server, now)


Advance: TypeAlias = Callable[[ServerRuntime, float], None]
NextDeparture: TypeAlias = Callable[[ServerRuntime, float], float | None]

DISCIPLINES: dict[Discipline, tuple[Advance, NextDeparture]] = {
    Discipline.PS: (ps_advance, ps_next_departure),
    Discipline.SRPT: (srpt_advance, srpt_next_departure),
}
