import argparse
import csv
import gzip
import logging
import os
import sys
from pathlib import Path
from typing import Iterable, Iterator, TextIO

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from farmsim.trace import TRACE_HEADER, TraceArrival, write_trace
from farmsim_commons.logging_utils import setup_script_logging

"""
Converts task_events files of the 2011 Google cluster trace into arrival traces (timestamp_s,type_id).

Only SUBMIT events are kept. The job type is the task's scheduling class (0-3) plus one,
so the four types of the ten-group scenario map to scheduling classes 0, 1, 2 and 3.

ARGUMENTS: task_events files (plain or .gz), in trace order
--out FILE     (default: stdout)
--start-hour N --hours N   select a window, timestamps are shifted to start at 0
"""

logger = logging.getLogger("convert_google_trace")

TIME_COLUMN = 0
EVENT_TYPE_COLUMN = 5
SCHEDULING_CLASS_COLUMN = 7
SUBMIT = "0"
MICROSECONDS = 1e6


def _open(path: Path) -> TextIO:
    if path.suffix == ".gz":
        return gzip.open(path, "rt", newline="")
    return path.open("r", newline="")


def submit_events(paths: Iterable[Path]) -> Iterator[TraceArrival]:
    skipped = 0
    for path in paths:
        with _open(path) as f:
            for row in csv.reader(f):
                if len(row) <= SCHEDULING_CLASS_COLUMN or row[EVENT_TYPE_COLUMN] != SUBMIT:
                    continue
                try:
                    t = int(row[TIME_COLUMN])
                    scheduling_class = int(row[SCHEDULING_CLASS_COLUMN])
                except ValueError:
                    skipped += 1
                    continue
                # time 0 marks events before the trace window
                if t <= 0:
                    continue
                yield TraceArrival(t / MICROSECONDS, scheduling_class + 1)
    if skipped:
        logger.warning("Skipped %d unparsable SUBMIT events", skipped)


def select_window(arrivals: Iterable[TraceArrival], start_hour: float, hours: float | None) -> list[TraceArrival]:
    selected = sorted(arrivals)
    if not selected:
        return []
    origin = selected[0].timestamp + start_hour * 3600.0
    end = origin + hours * 3600.0 if hours is not None else float("inf")
    return [TraceArrival(a.timestamp - origin, a.type_id) for a in selected if origin <= a.timestamp < end]


def main() -> None:
    parser = argparse.ArgumentParser("Google cluster trace conversion")
    parser.add_argument("files", nargs="+", type=Path, help="task_events CSV files")
    parser.add_argument("--out", type=Path, default=None, help="Output trace CSV (default: stdout)")
    parser.add_argument("--start-hour", type=float, default=0.0, help="Hours to skip after the first submission")
    parser.add_argument("--hours", type=float, default=None, help="Length of the selected window")
    args = parser.parse_args()

    arrivals = select_window(submit_events(args.files), args.start_hour, args.hours)
    if args.out is not None:
        write_trace(((a.timestamp, a.type_id) for a in arrivals), args.out)
        logger.info('Wrote %d arrivals to "%s"', len(arrivals), args.out)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(TRACE_HEADER)
        for a in arrivals:
            writer.writerow((repr(a.timestamp), a.type_id))


if __name__ == "__main__":
    setup_script_logging("convert_google_trace")
    main()
