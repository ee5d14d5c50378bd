"""Decoders for supercomputer log line formats plus a synthetic generator.

Both Thunderbird and BGL lines start with a label field where a hyphen
means "not an alert"; anything else marks the line anomalous. The
synthetic generator emits Thunderbird-layout lines so the same decoder
round-trips them, with anomalies injected as short bursts of dedicated
rare templates so that desk-scale detection is learnable by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RawEntry:
    label_field: str
    epoch_seconds: int
    node_id: str
    message: str

    @property
    def is_anomalous(self) -> bool:
        return self.label_field != "-"


class LineParseError(ValueError):
    """Recoverable per-line decode failure; carries the offending line number."""

    def __init__(self, message: str, line_number: int | None = None) -> None:
        super().__init__(message)
        self.line_number = line_number


# Header token counts before the free-text message begins.
# Thunderbird: label epoch date node month day time node2 component message...
# BGL:        label epoch date node fulltime node2 type component severity message...
_N_HEADER = {"thunderbird": 9, "bgl": 9}
_NODE_INDEX = {"thunderbird": 3, "bgl": 3}


def decode_line(line: str, fmt: str, line_number: int | None = None) -> RawEntry:
    if fmt not in _N_HEADER:
        raise ValueError(f"unknown format: {fmt!r}")
    tokens = line.split()
    n_header = _N_HEADER[fmt]
    if len(tokens) <= n_header:
        raise LineParseError(
            f"expected more than {n_header} tokens, got {len(tokens)}", line_number
        )
    try:
        epoch = int(tokens[1])
    except ValueError:
        raise LineParseError(f"bad epoch field {tokens[1]!r}", line_number) from None
    if epoch < 0:
        raise LineParseError(f"negative epoch {epoch}", line_number)
    return RawEntry(
        label_field=tokens[0],
        epoch_seconds=epoch,
        node_id=tokens[_NODE_INDEX[fmt]],
        message=" ".join(tokens[n_header:]),
    )


def encode_line(entry: RawEntry) -> str:
    """Render an entry in Thunderbird layout (filler date fields derived from epoch)."""
    tm = time.gmtime(entry.epoch_seconds)
    date = time.strftime("%Y.%m.%d", tm)
    month = time.strftime("%b", tm)
    clock = time.strftime("%H:%M:%S", tm)
    return (
        f"{entry.label_field} {entry.epoch_seconds} {date} {entry.node_id} "
        f"{month} {tm.tm_mday} {clock} {entry.node_id}/{entry.node_id} "
        f"synth: {entry.message}"
    )


@dataclass(frozen=True)
class SyntheticSpec:
    n_templates: int
    n_nodes: int
    n_lines: int
    anomaly_rate: float
    anomaly_template_ids: frozenset[int] = field(default_factory=frozenset)
    seed: int = 0
    mean_burst_length: int = 12
    mean_gap_seconds: float = 4.0

    def __post_init__(self) -> None:
        if self.n_templates < 1 or self.n_nodes < 1 or self.n_lines < 1:
            raise ValueError("n_templates, n_nodes, n_lines must be positive")
        if not (0.0 < self.anomaly_rate < 1.0):
            raise ValueError("anomaly_rate must be in (0, 1)")
        if not self.anomaly_template_ids:
            raise ValueError("anomaly_template_ids must be non-empty")
        if any(t < 0 or t >= self.n_templates for t in self.anomaly_template_ids):
            raise ValueError("anomaly_template_ids must lie in [0, n_templates)")
        if self.mean_burst_length < 1:
            raise ValueError("mean_burst_length must be >= 1")


def _template_tag(template_id: int) -> str:
    # Digit-free tag so numeric masking cannot collapse distinct templates.
    letters = "abcdefghijklmnopqrstuvwxyz"
    tag = ""
    i = template_id
    while True:
        tag = letters[i % 26] + tag
        i //= 26
        if i == 0:
            return tag


def _render_template(template_id: int, rng: np.random.Generator) -> str:
    # One variable field per message so Drain sees a parameter position.
    value = int(rng.integers(1000, 100000))
    return f"daemon proc-{_template_tag(template_id)} reported event code {value} status ok"


def generate_synthetic(spec: SyntheticSpec) -> list[RawEntry]:
    """Deterministic synthetic corpus, time-sorted across nodes.

    Normal traffic follows a fixed per-node Markov chain over the normal
    templates. Anomalies arrive as dense bursts of mean_burst_length lines
    drawn from anomaly_template_ids with compressed inter-arrival gaps
    (failure-cascade style), scheduled deterministically per node with a
    phase stagger so the line-level anomaly fraction approximates
    anomaly_rate at any corpus size.
    """
    rng = np.random.default_rng(spec.seed)
    normal_ids = [t for t in range(spec.n_templates) if t not in spec.anomaly_template_ids]
    if not normal_ids:
        raise ValueError("at least one normal template required")
    anomaly_ids = sorted(spec.anomaly_template_ids)

    # Row-stochastic transition matrix over normal templates, fixed per run.
    n = len(normal_ids)
    trans = rng.dirichlet(np.ones(n), size=n)
    # Bursts of exactly mean_burst_length anomaly lines fire every
    # burst_every lines per node, staggered across nodes, so the realized
    # anomaly fraction tracks anomaly_rate tightly at any corpus size.
    burst_every = max(
        spec.mean_burst_length + 1,
        int(round(spec.mean_burst_length / spec.anomaly_rate)),
    )

    base_epoch = 1_131_566_461
    node_clock = {i: float(base_epoch) for i in range(spec.n_nodes)}
    node_state = {i: int(rng.integers(n)) for i in range(spec.n_nodes)}
    node_lines = {i: 0 for i in range(spec.n_nodes)}
    node_phase = {
        i: (i * burst_every) // spec.n_nodes for i in range(spec.n_nodes)
    }
    node_burst = {i: 0 for i in range(spec.n_nodes)}  # remaining anomaly lines

    entries: list[RawEntry] = []
    for line_idx in range(spec.n_lines):
        node = line_idx % spec.n_nodes
        if node_burst[node] == 0 and node_lines[node] % burst_every == node_phase[node]:
            node_burst[node] = spec.mean_burst_length
        node_lines[node] += 1
        if node_burst[node] > 0:
            anomalous = True
            node_burst[node] -= 1
            # Failure cascades pour in quickly: bursts are dense in time.
            gap = spec.mean_gap_seconds / 20.0
        else:
            anomalous = False
            gap = spec.mean_gap_seconds
        node_clock[node] += rng.exponential(gap)
        epoch = int(node_clock[node])
        if anomalous:
            template_id = anomaly_ids[int(rng.integers(len(anomaly_ids)))]
            label = "FAILURE"
            message = (
                f"daemon proc-{_template_tag(template_id)} fatal fault detected "
                f"unit {int(rng.integers(1000, 100000))}"
            )
        else:
            state = node_state[node]
            state = int(rng.choice(n, p=trans[state]))
            node_state[node] = state
            template_id = normal_ids[state]
            label = "-"
            message = _render_template(template_id, rng)
        entries.append(
            RawEntry(
                label_field=label,
                epoch_seconds=epoch,
                node_id=f"node{node:03d}",
                message=message,
            )
        )
    entries.sort(key=lambda e: e.epoch_seconds)
    return entries


def read_log_file(path, fmt: str, max_samples: int | None = None):
    """Yield (RawEntry, line_number); malformed lines are counted and skipped.

    max_samples is a prefix cut in file order.
    """
    n_ok = 0
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for line_number, line in enumerate(fh, start=1):
            if max_samples is not None and n_ok >= max_samples:
                break
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                entry = decode_line(line, fmt, line_number)
            except LineParseError:
                continue
            n_ok += 1
            yield entry, line_number


def filter_min_anomaly_rate(
    entries: list[RawEntry], min_rate: float
) -> list[RawEntry]:
    """Drop all entries of nodes whose anomaly fraction is below min_rate."""
    totals: dict[str, int] = {}
    anomalies: dict[str, int] = {}
    for e in entries:
        totals[e.node_id] = totals.get(e.node_id, 0) + 1
        if e.is_anomalous:
            anomalies[e.node_id] = anomalies.get(e.node_id, 0) + 1
    keep = {
        node for node, total in totals.items()
        if anomalies.get(node, 0) / total >= min_rate
    }
    return [e for e in entries if e.node_id in keep]
