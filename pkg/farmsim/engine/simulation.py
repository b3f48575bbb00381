"""
Event loop of one replication.

The farm starts empty at time 0. Statistics are time integrals over the observation window (warmup, horizon]:
busy servers draw eps_k and deliver service at rate mu_k, idle servers draw eps_k^0.
Blocked jobs contribute nothing to throughput or power.
"""

import logging
import math
from typing import Iterator

from farmsim.engine.arrivals import Arrival, SeedLike, SizeSampler, StreamKind, poisson_source, stream_rng
from farmsim.engine.calendar import EventCalendar, EventKind
from farmsim.engine.metrics import BucketStats, FlowCounters, ReplicationMetrics
from farmsim.engine.server import DISCIPLINES, JobRecord, ServerRuntime
from farmsim.exceptions import InvariantViolation, ObservationWindowError
from farmsim.model import Scenario
from farmsim.policy import AssignmentPolicy, PolicyFactory

logger = logging.getLogger(__name__)


def _seed_tuple(seed: SeedLike) -> tuple[int, ...]:
    return (seed,) if isinstance(seed, int) else tuple(seed)


class Simulation:
    def __init__(self, scenario: Scenario, policy: AssignmentPolicy, warmup: float, horizon: float, seed: SeedLike,
                 arrivals: Iterator[Arrival] | None = None, bucket_width: float | None = None) -> None:
        if not (0 <= warmup < horizon) or not math.isfinite(horizon):
            raise ObservationWindowError(f"Need 0 <= warmup < horizon, got warmup={warmup}, horizon={horizon}")
        if bucket_width is not None and not bucket_width > 0:
            raise ObservationWindowError(f"Bucket width must be positive, got {bucket_width}")
        if policy.scenario is not scenario and policy.scenario != scenario:
            raise InvariantViolation("policy was built for a different scenario")
        self.scenario = scenario
        self.policy = policy
        self.warmup = warmup
        self.horizon = horizon
        self.seed = seed
        self.bucket_width = bucket_width
        self._advance, self._next_departure = DISCIPLINES[scenario.discipline]

        server_groups = scenario.server_groups
        self.servers = [ServerRuntime(s, g) for s, g in enumerate(server_groups)]
        group_index = {g.id: i for i, g in enumerate(scenario.groups)}
        self._group_of_server = [group_index[g.id] for g in server_groups]
        self.calendar = EventCalendar()
        self.arrivals = arrivals if arrivals is not None else poisson_source(scenario, seed)
        self.sizes = {
            j.id: SizeSampler(j.size_dist, stream_rng(seed, StreamKind.SIZES, j.id)) for j in scenario.job_types
        }

        # power and service rate are recomputed from integer busy counts, no drift
        self._idle_power = sum(scenario.server_count(g.id) * g.eps_idle for g in scenario.groups)
        self._busy_extra = [g.eps_busy - g.eps_idle for g in scenario.groups]
        self._group_mu = [g.mu for g in scenario.groups]
        self._busy_count = [0] * len(scenario.groups)
        self._power = self._idle_power
        self._service_rate = 0.0
        self._clock = 0.0

        self._work = 0.0
        self._energy = 0.0
        self._completed_size = 0.0
        type_ids = scenario.type_ids
        self._window_arrivals = {j: 0 for j in type_ids}
        self._window_blocked = {j: 0 for j in type_ids}
        self._window_completions = {j: 0 for j in type_ids}
        self._flow = FlowCounters({j: 0 for j in type_ids}, {j: 0 for j in type_ids}, {j: 0 for j in type_ids}, {j: 0 for j in type_ids})

        self._busy_since: list[float | None] = [None] * len(self.servers)
        self._busy_time = [0.0] * len(self.servers)
        self._occupancy_count = [[0] * (g.buffer + 1) for g in scenario.groups]
        for i, g in enumerate(scenario.groups):
            self._occupancy_count[i][0] = scenario.server_count(g.id)
        self._occupancy_area = [[0.0] * (g.buffer + 1) for g in scenario.groups]
        self._occupancy_since = [[0.0] * (g.buffer + 1) for g in scenario.groups]

        self._buckets: list[BucketStats] = []
        if bucket_width is not None:
            n_buckets = math.ceil(horizon / bucket_width)
            self._buckets = [
                BucketStats(i * bucket_width, min((i + 1) * bucket_width, horizon),
                            arrivals={j: 0 for j in type_ids}, blocked={j: 0 for j in type_ids})
                for i in range(n_buckets)
            ]
        self._next_job_id = 0
        self._events = 0

    # --- time integrals ---

    def _overlap(self, start: float, end: float) -> float:
        return max(0.0, min(end, self.horizon) - max(start, self.warmup))

    def _advance_clock(self, t: float) -> None:
        if t < self._clock:
            raise InvariantViolation(f"clock moved backwards from {self._clock} to {t}")
        dt = self._overlap(self._clock, t)
        if dt > 0:
            self._energy += self._power * dt
            self._work += self._service_rate * dt
            if self._buckets:
                bucket = self._bucket(max(self._clock, self.warmup))
                bucket.observed += dt
                bucket.energy += self._power * dt
                bucket.work += self._service_rate * dt
        self._clock = t

    def _bucket(self, t: float) -> BucketStats:
        assert self.bucket_width is not None
        return self._buckets[min(int(t // self.bucket_width), len(self._buckets) - 1)]

    def _occupancy_changed(self, server: int, old: int, new: int, t: float) -> None:
        k = self._group_of_server[server]
        counts, areas, since = self._occupancy_count[k], self._occupancy_area[k], self._occupancy_since[k]
        for n in (old, new):
            areas[n] += counts[n] * self._overlap(since[n], t)
            since[n] = t
        counts[old] -= 1
        counts[new] += 1
        if old == 0:
            self._busy_count[k] += 1
            self._busy_since[server] = t
            self._update_rates()
        elif new == 0:
            self._busy_count[k] -= 1
            since_busy = self._busy_since[server]
            assert since_busy is not None
            self._busy_time[server] += self._overlap(since_busy, t)
            self._busy_since[server] = None
            self._update_rates()

    def _update_rates(self) -> None:
        self._power = self._idle_power + sum(c * e for c, e in zip(self._busy_count, self._busy_extra))
        self._service_rate = sum(c * mu for c, mu in zip(self._busy_count, self._group_mu))

    # --- events ---

    def _schedule(self, server: ServerRuntime, t: float) -> None:
        server.version += 1
        departure = self._next_departure(server, t)
        if departure is not None:
            self.calendar.push(departure, EventKind.DEPARTURE, (server.server_id, server.version))

    def _push_next_arrival(self) -> None:
        arrival = next(self.arrivals, None)
        if arrival is not None:
            t, j = arrival
            self.calendar.push(t, EventKind.ARRIVAL, j)

    def _check_occupancy(self, server: ServerRuntime) -> None:
        if self.policy.occupancy[server.server_id] != len(server.jobs):
            raise InvariantViolation(f"policy and engine disagree on the occupancy of server {server.server_id}")
        if len(server.jobs) > server.group.buffer:
            raise InvariantViolation(f"server {server.server_id} holds more jobs than its buffer")

    def _on_arrival(self, t: float, job_type: int) -> None:
        if job_type not in self.sizes:
            raise InvariantViolation(f"arrival of unknown job type {job_type}")
        size = self.sizes[job_type]()
        self._flow.arrivals[job_type] += 1
        in_window = t > self.warmup
        if in_window:
            self._window_arrivals[job_type] += 1
            if self._buckets:
                self._bucket(t).arrivals[job_type] += 1

        s = self.policy.assign(job_type)
        if s is None:
            self._flow.blocked[job_type] += 1
            if in_window:
                self._window_blocked[job_type] += 1
                if self._buckets:
                    self._bucket(t).blocked[job_type] += 1
        else:
            server = self.servers[s]
            self._advance(server, t)
            old = len(server.jobs)
            server.jobs.append(JobRecord(self._next_job_id, job_type, size, size, t))
            self._next_job_id += 1
            self.policy.on_arrival(s)
            self._check_occupancy(server)
            self._occupancy_changed(s, old, old + 1, t)
            self._schedule(server, t)
        self._push_next_arrival()

    def _on_departure(self, t: float, s: int, version: int) -> None:
        server = self.servers[s]
        if version != server.version:
            return
        self._advance(server, t)
        old = len(server.jobs)
        job = server.pop_completed()
        self._flow.completions[job.job_type] += 1
        if t > self.warmup:
            self._window_completions[job.job_type] += 1
            self._completed_size += job.size
            if self._buckets:
                self._bucket(t).completed_size += job.size
        self.policy.on_departure(s)
        self._check_occupancy(server)
        self._occupancy_changed(s, old, old - 1, t)
        self._schedule(server, t)

    def run(self) -> ReplicationMetrics:
        self._push_next_arrival()
        if self.bucket_width is not None and self.bucket_width < self.horizon:
            self.calendar.push(self.bucket_width, EventKind.BOUNDARY, 1)
        while not self.calendar.empty:
            next_time = self.calendar.peek_time()
            assert next_time is not None
            if next_time > self.horizon:
                break
            t, kind, payload = self.calendar.pop()
            self._advance_clock(t)
            self._events += 1
            if kind == EventKind.ARRIVAL:
                self._on_arrival(t, payload)
            elif kind == EventKind.DEPARTURE:
                self._on_departure(t, *payload)
            elif kind == EventKind.BOUNDARY:
                assert self.bucket_width is not None
                following = (payload + 1) * self.bucket_width
                if following < self.horizon:
                    self.calendar.push(following, EventKind.BOUNDARY, payload + 1)
        self._advance_clock(self.horizon)
        return self._collect()

    def _collect(self) -> ReplicationMetrics:
        horizon = self.horizon
        for s, since in enumerate(self._busy_since):
            if since is not None:
                self._busy_time[s] += self._overlap(since, horizon)
        window = horizon - self.warmup
        profile = {}
        for k, g in enumerate(self.scenario.groups):
            counts, areas, since_list = self._occupancy_count[k], self._occupancy_area[k], self._occupancy_since[k]
            total = self.scenario.server_count(g.id) * window
            profile[g.id] = [(areas[n] + counts[n] * self._overlap(since_list[n], horizon)) / total for n in range(len(counts))]
        for server in self.servers:
            for job in server.jobs:
                self._flow.in_system[job.job_type] += 1
        logger.debug("Replication seed=%s finished after %d events", self.seed, self._events)
        return ReplicationMetrics(
            seed=_seed_tuple(self.seed),
            warmup=self.warmup,
            horizon=horizon,
            work=self._work,
            energy=self._energy,
            completed_size=self._completed_size,
            completions=dict(self._window_completions),
            arrivals=dict(self._window_arrivals),
            blocked=dict(self._window_blocked),
            busy_time=list(self._busy_time),
            idle_time=[window - b for b in self._busy_time],
            occupancy_profile=profile,
            flow=self._flow,
            events=self._events,
            buckets=self._buckets,
        )


def run(scenario: Scenario, policy: AssignmentPolicy | str, warmup: float, horizon: float, seed: SeedLike,
        arrivals: Iterator[Arrival] | None = None, bucket_width: float | None = None) -> ReplicationMetrics:
    """One replication. A policy name is resolved through the configured policy factory."""
    if isinstance(policy, str):
        policy = PolicyFactory.build(policy, scenario)
    return Simulation(scenario, policy, warmup, horizon, seed, arrivals, bucket_width).run()
