"""
Optional run telemetry in influx line protocol (readable by telegraf).
Enabled by setting FARMSIM_METRICS_LOGFILE to a filename, or "-" for stdout.
Worker processes append to the same file, one complete line per write.
"""

import json
import math
import os
import sys
import time
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Iterator, TypeAlias

Value: TypeAlias = str | int | float | bool


class MetricRecorder(ABC):
    @abstractmethod
    def record_many(self, metric: str, values: dict[str, Value], ts: float | None = None, **tags: Any) -> None:
        raise NotImplementedError()


class InfluxLineRecorder(MetricRecorder):
    """Writes to an open binary stream, or appends to a file that is opened on first use."""

    def __init__(self, target: BinaryIO | str | Path) -> None:
        self.path: Path | None = None
        self.file: BinaryIO | None = None
        if isinstance(target, (str, Path)):
            self.path = Path(target)
        else:
            self.file = target

    def record_many(self, metric: str, values: dict[str, Value], ts: float | None = None, **tags: Any) -> None:
        line = self.format_line(metric, values, time.time() if ts is None else ts, tags)
        if line is None:
            return
        if self.file is None:
            assert self.path is not None
            self.file = self.path.open("ab")
        self.file.write(line.encode("utf-8"))
        self.file.flush()

    @classmethod
    def format_line(cls, metric: str, values: dict[str, Value], ts: float, tags: dict[str, Any]) -> str | None:
        # NaN and inf are not representable, a line without fields is invalid
        fields = ",".join(f"{k}={cls._field(v)}" for k, v in values.items()
                          if not (isinstance(v, float) and not math.isfinite(v)))
        if not fields:
            return None
        tag_str = "".join(f",{k}={cls._tag(v)}" for k, v in sorted(tags.items()) if v is not None)
        return f"{metric}{tag_str} {fields} {int(ts * 1_000_000_000)}\n"

    @staticmethod
    def _field(value: Value) -> str:
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, int):
            return f"{value}i"
        if isinstance(value, str):
            return json.dumps(value)
        return repr(float(value))

    @staticmethod
    def _tag(value: Any) -> str:
        if isinstance(value, (tuple, list)):
            value = "-".join(map(str, value))
        return str(value).replace(",", r"\,").replace(" ", r"\ ").replace("=", r"\=")


@dataclass
class Measurement:
    fields: dict[str, Value] = field(default_factory=dict)
    tags: dict[str, Any] = field(default_factory=dict)


class MetricsProxy(MetricRecorder):
    def __init__(self) -> None:
        self._recorder: MetricRecorder | None = None

    def set_recorder(self, recorder: MetricRecorder | None) -> None:
        self._recorder = recorder

    def is_initialized(self) -> bool:
        return self._recorder is not None

    def record_many(self, metric: str, values: dict[str, Value], ts: float | None = None, **tags: Any) -> None:
        if self._recorder is not None:
            self._recorder.record_many(metric, values, ts, **tags)

    @contextmanager
    def measure(self, metric: str, **tags: Any) -> Iterator[Measurement]:
        """Records the fields filled in by the block, plus its wall time as wall_s. Nothing is recorded on error."""
        measurement = Measurement(tags=dict(tags))
        start = time.perf_counter()
        yield measurement
        measurement.fields["wall_s"] = time.perf_counter() - start
        self.record_many(metric, measurement.fields, **measurement.tags)


Metrics = MetricsProxy()


def setup_default_metrics() -> None:
    if Metrics.is_initialized():
        return
    target = os.environ.get("FARMSIM_METRICS_LOGFILE")
    if target == "-":
        Metrics.set_recorder(InfluxLineRecorder(sys.stdout.buffer))
    elif target:
        Metrics.set_recorder(InfluxLineRecorder(target))
