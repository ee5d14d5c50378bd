"""Overlapping time windows over one node's parsed records.

A window covers [start, start + window_seconds) on a grid anchored at the
node's first timestamp. Windows with too few records are discarded; a
window is anomalous iff any member record is anomalous. Sequences are
truncated to the most recent max_sequence_length keys for the model.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .drain import LogRecord


@dataclass(frozen=True)
class WindowConfig:
    window_seconds: int
    step_seconds: int
    min_logs_per_window: int = 1
    max_sequence_length: int = 128

    def __post_init__(self) -> None:
        if self.window_seconds < 1 or self.step_seconds < 1:
            raise ValueError("window_seconds and step_seconds must be positive")
        if self.step_seconds > self.window_seconds:
            raise ValueError("step_seconds must not exceed window_seconds")
        if self.min_logs_per_window < 1:
            raise ValueError("min_logs_per_window must be >= 1")
        if self.max_sequence_length < 1:
            raise ValueError("max_sequence_length must be >= 1")


@dataclass(frozen=True)
class WindowSequence:
    node_id: str
    start_time: int
    key_ids: tuple[int, ...]
    label: int


def build_windows(records: list[LogRecord], cfg: WindowConfig) -> list[WindowSequence]:
    """All qualifying windows for one node's time-ordered records."""
    if not records:
        return []
    node_id = records[0].node_id
    times = [r.timestamp for r in records]
    if any(r.node_id != node_id for r in records):
        raise ValueError("build_windows expects records from a single node")
    if any(t1 > t2 for t1, t2 in zip(times, times[1:])):
        raise ValueError("records must be sorted by timestamp")

    t0, t_last = times[0], times[-1]
    out: list[WindowSequence] = []
    start = t0
    while start <= t_last:
        lo = bisect.bisect_left(times, start)
        hi = bisect.bisect_left(times, start + cfg.window_seconds)
        if hi - lo >= cfg.min_logs_per_window:
            members = records[lo:hi]
            keys = tuple(r.event_id for r in members[-cfg.max_sequence_length:])
            label = int(any(r.is_anomalous for r in members))
            out.append(
                WindowSequence(
                    node_id=node_id, start_time=start, key_ids=keys, label=label
                )
            )
        start += cfg.step_seconds
    return out


def write_window_dump(windows: list[WindowSequence], path) -> None:
    """Tab-separated window dump: node, start, label, space-joined key ids."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node_id\tstart_time\tlabel\tkey_ids\n")
        for w in windows:
            keys = " ".join(str(k) for k in w.key_ids)
            fh.write(f"{w.node_id}\t{w.start_time}\t{w.label}\t{keys}\n")
