"""
Arrival traces: parsing, hourly rate profiles, exact replay and piecewise-homogeneous Poisson resampling.

Trace files are CSV with the header `timestamp_s,type_id`; timestamps are seconds since the start of the trace.
Conversion of raw cluster logs into this format is done by scripts/convert_google_trace.py.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Collection, Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from farmsim.engine.arrivals import Arrival, SeedLike, StreamKind, merge_arrivals, poisson_arrivals, stream_rng
from farmsim.exceptions import TraceFormatError

logger = logging.getLogger(__name__)

BUCKET_WIDTH = 3600.0
TRACE_HEADER = ("timestamp_s", "type_id")
PROFILE_HEADER = ("type", "hour_index", "rate_per_s")


class TraceArrival(NamedTuple):
    timestamp: float
    type_id: int


@dataclass(frozen=True)
class ParsedTrace:
    arrivals: list[TraceArrival]
    malformed: int


def read_trace(path: str | Path, type_ids: Collection[int] | None = None) -> ParsedTrace:
    """
    Sorted arrivals of a trace file. Malformed rows (wrong field count, unparsable or negative values)
    are skipped and counted. A row with a type id outside type_ids is an error.
    """
    path = Path(path)
    try:
        with path.open("r", newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise TraceFormatError(f"cannot read trace {path}: {e}") from e
    if not rows:
        return ParsedTrace([], 0)
    if tuple(field.strip() for field in rows[0]) != TRACE_HEADER:
        raise TraceFormatError(f"expected header {','.join(TRACE_HEADER)}", row=1)

    arrivals: list[TraceArrival] = []
    malformed = 0
    for row_number, row in enumerate(rows[1:], start=2):
        if not row or all(not field.strip() for field in row):
            continue
        try:
            if len(row) != 2:
                raise ValueError(f"expected 2 fields, got {len(row)}")
            timestamp = float(row[0])
            type_id = int(row[1])
            if not math.isfinite(timestamp) or timestamp < 0:
                raise ValueError(f"invalid timestamp {row[0]!r}")
        except ValueError as e:
            malformed += 1
            logger.debug("%s row %d skipped: %s", path, row_number, e)
            continue
        if type_ids is not None and type_id not in type_ids:
            raise TraceFormatError(f"unknown job type {type_id}", row=row_number)
        arrivals.append(TraceArrival(timestamp, type_id))

    arrivals.sort()
    if malformed:
        logger.warning("%s: skipped %d malformed rows", path, malformed)
    logger.info("Loaded %d arrivals from %s", len(arrivals), path)
    return ParsedTrace(arrivals, malformed)


def parse_trace(path: str | Path, type_ids: Collection[int] | None = None) -> list[TraceArrival]:
    return read_trace(path, type_ids).arrivals


def write_trace(arrivals: Iterable[Arrival], path: str | Path) -> None:
    with Path(path).open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_HEADER)
        for t, j in arrivals:
            writer.writerow((repr(float(t)), j))


@dataclass(frozen=True)
class RateProfile:
    """Piecewise-constant arrival rate (jobs per second) of every job type, one value per bucket."""

    rates: Mapping[int, tuple[float, ...]]
    bucket_width: float = BUCKET_WIDTH

    def __post_init__(self) -> None:
        if not self.bucket_width > 0:
            raise ValueError(f"bucket width must be positive, got {self.bucket_width}")
        lengths = {len(r) for r in self.rates.values()}
        if len(lengths) > 1:
            raise ValueError("all job types need the same number of buckets")
        for j, r in self.rates.items():
            if any(not rate >= 0 for rate in r):
                raise ValueError(f"negative rate for job type {j}")

    @property
    def n_buckets(self) -> int:
        return max((len(r) for r in self.rates.values()), default=0)

    @property
    def duration(self) -> float:
        return self.n_buckets * self.bucket_width

    def rate(self, type_id: int, t: float) -> float:
        rates = self.rates.get(type_id, ())
        b = int(t // self.bucket_width)
        return rates[b] if 0 <= b < len(rates) else 0.0

    def total(self, bucket: int) -> float:
        return sum(r[bucket] for r in self.rates.values())

    def peak_bucket(self) -> int:
        return max(range(self.n_buckets), key=self.total) if self.n_buckets else 0

    def mean_rates(self) -> dict[int, float]:
        return {j: float(np.mean(r)) if r else 0.0 for j, r in self.rates.items()}

    def rows(self) -> Iterator[tuple[int, int, float]]:
        for j in sorted(self.rates):
            for b, rate in enumerate(self.rates[j]):
                yield j, b, rate

    def tile(self, periods: int) -> "RateProfile":
        """The profile repeated back to back, e.g. several identical days."""
        if periods < 1:
            raise ValueError(f"need at least one period, got {periods}")
        return RateProfile({j: tuple(r) * periods for j, r in self.rates.items()}, self.bucket_width)


def tile_arrivals(arrivals: Sequence[TraceArrival], period: float, periods: int) -> list[TraceArrival]:
    """Recorded arrivals repeated `periods` times, each copy shifted by one more period."""
    if periods < 1:
        raise ValueError(f"need at least one period, got {periods}")
    if any(a.timestamp >= period for a in arrivals):
        raise TraceFormatError(f"trace extends beyond its period of {period} seconds")
    return [TraceArrival(a.timestamp + i * period, a.type_id) for i in range(periods) for a in arrivals]


def hourly_rates(arrivals: Iterable[Arrival], type_ids: Collection[int] = (), n_buckets: int | None = None,
                 bucket_width: float = BUCKET_WIDTH) -> RateProfile:
    """Arrival counts per (type, bucket) divided by the bucket width. Buckets are [i*w, (i+1)*w)."""
    counts: dict[int, dict[int, int]] = {j: {} for j in type_ids}
    last_bucket = -1
    for t, j in arrivals:
        b = int(t // bucket_width)
        per_type = counts.setdefault(j, {})
        per_type[b] = per_type.get(b, 0) + 1
        last_bucket = max(last_bucket, b)
    n = n_buckets if n_buckets is not None else last_bucket + 1
    return RateProfile(
        {j: tuple(per_type.get(b, 0) / bucket_width for b in range(n)) for j, per_type in sorted(counts.items())},
        bucket_width,
    )


def replay(arrivals: Iterable[TraceArrival]) -> Iterator[Arrival]:
    """Feeds the exact trace timestamps to the engine."""
    for a in arrivals:
        yield a.timestamp, a.type_id


def _tagged_nhpp(rates: tuple[float, ...], width: float, rng: np.random.Generator, type_id: int) -> Iterator[Arrival]:
    for b, rate in enumerate(rates):
        for t in poisson_arrivals(rate, rng, b * width, (b + 1) * width):
            yield t, type_id


def nhpp(profile: RateProfile, seed: SeedLike) -> Iterator[Arrival]:
    """
    Non-homogeneous Poisson arrivals following the profile: homogeneous within each bucket,
    one independent stream per job type.
    """
    return merge_arrivals(
        _tagged_nhpp(profile.rates[j], profile.bucket_width, stream_rng(seed, StreamKind.NHPP, j), j)
        for j in sorted(profile.rates)
    )


def write_rate_profile(profile: RateProfile, path: str | Path) -> None:
    with Path(path).open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(PROFILE_HEADER)
        for j, b, rate in profile.rows():
            writer.writerow((j, b, repr(rate)))


def read_rate_profile(path: str | Path) -> RateProfile:
    path = Path(path)
    rates: dict[int, dict[int, float]] = {}
    try:
        with path.open("r", newline="") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != PROFILE_HEADER:
                raise TraceFormatError(f"expected header {','.join(PROFILE_HEADER)}", row=1)
            for row_number, row in enumerate(reader, start=2):
                try:
                    rates.setdefault(int(row["type"]), {})[int(row["hour_index"])] = float(row["rate_per_s"])
                except (TypeError, ValueError) as e:
                    raise TraceFormatError(str(e), row=row_number) from e
    except OSError as e:
        raise TraceFormatError(f"cannot read rate profile {path}: {e}") from e
    n = max((max(r) + 1 for r in rates.values() if r), default=0)
    return RateProfile({j: tuple(r.get(b, 0.0) for b in range(n)) for j, r in sorted(rates.items())})


def diurnal_profile(mean_rates: Mapping[int, float], hours: int = 24, amplitude: float = 0.5, peak_hour: float = 14.0,
                    sharpness: float = 1.0, noise: float = 0.0, seed: SeedLike = 0) -> RateProfile:
    """
    Synthetic daily pattern: every job type follows a raised cosine around peak_hour.
    sharpness > 1 narrows the peak (the profile is renormalised to keep the mean rate),
    noise adds multiplicative Gaussian jitter per bucket.
    """
    if not 0 <= amplitude <= 1:
        raise ValueError(f"amplitude must be within [0, 1], got {amplitude}")
    if hours < 1:
        raise ValueError(f"need at least one hour, got {hours}")
    centres = np.arange(hours) + 0.5
    wave = (1.0 + np.cos(2 * np.pi * (centres - peak_hour) / 24.0)) / 2.0
    shape = 1.0 - amplitude + 2 * amplitude * wave ** sharpness
    shape /= shape.mean()
    rates = {}
    for j, mean_rate in sorted(mean_rates.items()):
        values = mean_rate * shape
        if noise > 0:
            rng = stream_rng(seed, StreamKind.PROFILE, j)
            values = values * np.clip(1.0 + noise * rng.standard_normal(hours), 0.0, None)
        rates[j] = tuple(float(v) for v in values)
    return RateProfile(rates)
