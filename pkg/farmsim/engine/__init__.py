from farmsim.engine.arrivals import SizeSampler, StreamKind, poisson_arrivals, poisson_source, sample_job_size, stream_rng
from farmsim.engine.calendar import EventCalendar, EventKind
from farmsim.engine.metrics import AggregateMetrics, BucketStats, Estimate, ReplicationMetrics
from farmsim.engine.replication import RunSettings, replications, run_replication
from farmsim.engine.server import JobRecord, ServerRuntime, ps_reschedule, srpt_reschedule
from farmsim.engine.simulation import Simulation, run

__all__ = [
    "AggregateMetrics",
    "BucketStats",
    "Estimate",
    "EventCalendar",
    "EventKind",
    "JobRecord",
    "ReplicationMetrics",
    "RunSettings",
    "ServerRuntime",
    "Simulation",
    "SizeSampler",
    "StreamKind",
    "poisson_arrivals",
    "poisson_source",
    "ps_reschedule",
    "replications",
    "run",
    "run_replication",
    "sample_job_size",
    "srpt_reschedule",
    "stream_rng",
]
