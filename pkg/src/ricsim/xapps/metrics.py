"""Metric rows and their append-only CSV persistence."""

from __future__ import annotations

import csv
from dataclasses import dataclass

CSV_COLUMNS = ("t_ms", "node_id", "container", "metric", "key", "value")


@dataclass(frozen=True)
class MetricRow:
    t_ms: int
    node_id: int
    container: str
    metric_name: str
    qci_or_slice: int | None
    value: int

    def as_csv(self) -> list:
        key = "" if self.qci_or_slice is None else self.qci_or_slice
        return [self.t_ms, self.node_id, self.container, self.metric_name, key, self.value]


class MetricSink:
    """Collects rows in memory and, given a path, appends them to a CSV file."""

    def __init__(self, path=None):
        self.rows: list[MetricRow] = []
        self._fh = None
        self._writer = None
        if path is not None:
            self._fh = open(path, "w", newline="", encoding="utf-8")
            self._writer = csv.writer(self._fh, lineterminator="\n")
            self._writer.writerow(CSV_COLUMNS)
            self._fh.flush()

    def append(self, row: MetricRow):
        self.rows.append(row)
        if self._writer is not None:
            self._writer.writerow(row.as_csv())

    def flush(self):
        if self._fh is not None:
            self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None
            self._writer = None

    def select(self, metric: str, key=None) -> list[MetricRow]:
        return [r for r in self.rows if r.metric_name == metric and (key is None or r.qci_or_slice == key)]


def read_csv(path) -> list[MetricRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        return [MetricRow(int(t), int(n), c, m, int(k) if k else None, int(v)) for t, n, c, m, k, v in reader]
