"""
Result files: tidy CSV tables plus gnuplot data files (whitespace separated, blocks separated by two blank lines,
addressable with `index` in gnuplot).
"""

import csv
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from filelock import FileLock

logger = logging.getLogger(__name__)

Row = Mapping[str, Any]


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def columns_of(rows: Iterable[Row]) -> list[str]:
    """Union of all keys, in order of first appearance."""
    columns: dict[str, None] = {}
    for row in rows:
        for k in row:
            columns.setdefault(k, None)
    return list(columns)


class ResultWriter:
    def __init__(self, output_dir: Path, gnuplot: bool = True) -> None:
        self.output_dir = output_dir
        self.gnuplot = gnuplot
        self.written: list[Path] = []

    def _lock(self) -> FileLock:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return FileLock(str(self.output_dir / ".farmsim.lock"))

    def write_csv(self, name: str, rows: Sequence[Row]) -> Path:
        path = self.output_dir / f"{name}.csv"
        with self._lock():
            with path.open("w", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                columns = columns_of(rows)
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([format_value(row.get(c)) for c in columns])
        self.written.append(path)
        logger.info("Wrote %d rows to %s", len(rows), path)
        return path

    def write_dat(self, name: str, blocks: Sequence[tuple[str, Sequence[str], Sequence[Sequence[Any]]]]) -> Path | None:
        """blocks: (title, column names, rows). Skipped unless gnuplot output is enabled."""
        if not self.gnuplot:
            return None
        path = self.output_dir / f"{name}.dat"
        with self._lock():
            with path.open("w") as f:
                for i, (title, columns, rows) in enumerate(blocks):
                    if i:
                        f.write("\n\n")
                    f.write(f"# {title}\n")
                    f.write("# " + " ".join(columns) + "\n")
                    for row in rows:
                        f.write(" ".join(format_value(v) or "NaN" for v in row) + "\n")
        self.written.append(path)
        return path
