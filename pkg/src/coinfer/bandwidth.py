"""Bandwidth traces: replay logs, chunk-level state traces, and transforms.

Two on-disk layouts are read:

* canonical replay CSV, ``timestamp_ms,bandwidth_kbps``;
* Belgium-style 4G/LTE logs, ``timestamp_ms,bytes,interval_ms``: each row
  is the number of bytes received in the `interval_ms` ending at
  `timestamp_ms`, converted to ``bytes * 8 / interval_ms`` kbps.

Chunk-level state traces (Oboe-style) are ``start_s,end_s,avg_bandwidth_kbps``,
one trace per file.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class BandwidthTrace:
    timestamps_ms: tuple[int, ...]
    bandwidth_kbps: tuple[float, ...]
    source: str = ""

    def __post_init__(self):
        ts = tuple(int(t) for t in self.timestamps_ms)
        bw = tuple(float(b) for b in self.bandwidth_kbps)
        object.__setattr__(self, "timestamps_ms", ts)
        object.__setattr__(self, "bandwidth_kbps", bw)
        if len(ts) != len(bw):
            raise ValidationError("timestamps and bandwidths differ in length")
        if not ts:
            raise ValidationError("bandwidth trace is empty")
        if ts[0] < 0:
            raise ValidationError("timestamps must be nonnegative")
        for k in range(1, len(ts)):
            if ts[k] <= ts[k - 1]:
                raise ValidationError(f"timestamps not strictly increasing at sample {k}")
        for k, b in enumerate(bw):
            if not (math.isfinite(b) and b > 0):
                raise ValidationError(f"bandwidth must be positive, got {b} at sample {k}")

    def __len__(self) -> int:
        return len(self.timestamps_ms)

    @property
    def samples(self) -> list[tuple[int, float]]:
        return list(zip(self.timestamps_ms, self.bandwidth_kbps))

    def at(self, t_ms: float) -> float:
        """Step-and-hold value: the last sample at or before `t_ms`."""
        k = int(np.searchsorted(self.timestamps_ms, t_ms, side="right")) - 1
        return self.bandwidth_kbps[max(k, 0)]


@dataclass(frozen=True)
class Chunk:
    start_s: float
    end_s: float
    avg_bandwidth_kbps: float


@dataclass(frozen=True)
class StateTrace:
    chunks: tuple[Chunk, ...]
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "chunks", tuple(self.chunks))
        if not self.chunks:
            raise ValidationError("state trace has no chunks")
        for k, c in enumerate(self.chunks):
            if c.end_s <= c.start_s:
                raise ValidationError(f"chunk {k}: end_s must exceed start_s")
            if not c.avg_bandwidth_kbps > 0:
                raise ValidationError(f"chunk {k}: average bandwidth must be positive")
            if k and c.start_s < self.chunks[k - 1].start_s:
                raise ValidationError(f"chunk {k}: chunks are not time-ordered")

    @property
    def mean_kbps(self) -> float:
        return sum(c.avg_bandwidth_kbps for c in self.chunks) / len(self.chunks)


def _rows(path: Path):
    """Yield (line number, numeric row), skipping blank lines and a header."""
    with path.open(newline="") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                if line == 1:
                    continue
                raise ParseError(f"non-numeric field in {row}", path=path, line=line) from None
            yield line, values


def load_trace(path: str | Path, format: str = "canonical") -> BandwidthTrace:
    path = Path(path)
    ts: list[int] = []
    bw: list[float] = []
    if format not in ("canonical", "belgium"):
        raise ValueError(f"unknown trace format {format!r}")
    width = 2 if format == "canonical" else 3
    for line, values in _rows(path):
        if len(values) != width:
            raise ParseError(f"expected {width} columns, got {len(values)}", path=path, line=line)
        t = values[0]
        if t != int(t):
            raise ParseError(f"timestamp {t} is not an integer number of ms", path=path, line=line)
        if format == "canonical":
            kbps = values[1]
        else:
            nbytes, interval = values[1], values[2]
            if interval <= 0:
                raise ParseError("interval_ms must be positive", path=path, line=line)
            kbps = nbytes * 8 / interval
        if ts and int(t) <= ts[-1]:
            raise ParseError("timestamps must be strictly increasing", path=path, line=line)
        if not kbps > 0:
            raise ParseError(f"bandwidth must be positive, got {kbps}", path=path, line=line)
        ts.append(int(t))
        bw.append(kbps)
    if not ts:
        raise ParseError("trace file has no samples", path=path)
    return BandwidthTrace(tuple(ts), tuple(bw), source=path.stem)


def write_trace(trace: BandwidthTrace, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp_ms", "bandwidth_kbps"])
        for t, b in trace.samples:
            w.writerow([t, repr(b)])


def load_state_trace(path: str | Path) -> StateTrace:
    path = Path(path)
    chunks = []
    for line, values in _rows(path):
        if len(values) != 3:
            raise ParseError(f"expected 3 columns, got {len(values)}", path=path, line=line)
        try:
            chunks.append(Chunk(*values))
        except ValidationError as exc:
            raise ParseError(str(exc), path=path, line=line) from None
    if not chunks:
        raise ParseError("state trace file has no chunks", path=path)
    try:
        return StateTrace(tuple(chunks), source=path.stem)
    except ValidationError as exc:
        raise ParseError(str(exc), path=path) from None


def write_state_trace(trace: StateTrace, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start_s", "end_s", "avg_bandwidth_kbps"])
        for c in trace.chunks:
            w.writerow([repr(c.start_s), repr(c.end_s), repr(c.avg_bandwidth_kbps)])


def load_state_traces(directory: str | Path) -> list[StateTrace]:
    """Every ``*.csv`` in `directory`, in file-name order."""
    files = sorted(Path(directory).glob("*.csv"))
    if not files:
        raise ValidationError(f"no state traces (*.csv) in {directory}")
    return [load_state_trace(f) for f in files]


def extract_states(traces: Sequence[StateTrace]) -> list[float]:
    """One state per trace (mean of chunk averages), deduplicated and sorted."""
    if not traces:
        raise ValidationError("need at least one state trace")
    return sorted({t.mean_kbps for t in traces})


def rescale_trace(trace: BandwidthTrace, lo_kbps: float, hi_kbps: float) -> BandwidthTrace:
    """Affine min-max map of the bandwidth samples onto [lo_kbps, hi_kbps].

    A constant trace maps to the midpoint.
    """
    if not 0 < lo_kbps < hi_kbps:
        raise ValueError("need 0 < lo < hi")
    bw = np.asarray(trace.bandwidth_kbps)
    bmin, bmax = bw.min(), bw.max()
    if bmax == bmin:
        out = np.full_like(bw, (lo_kbps + hi_kbps) / 2)
    else:
        out = lo_kbps + (bw - bmin) * ((hi_kbps - lo_kbps) / (bmax - bmin))
        # pin the endpoints against rounding
        out[bw == bmin] = lo_kbps
        out[bw == bmax] = hi_kbps
        out = np.clip(out, lo_kbps, hi_kbps)
    return BandwidthTrace(trace.timestamps_ms, tuple(float(b) for b in out), source=trace.source)


def clamp_trace(trace: BandwidthTrace, lo_kbps: float, hi_kbps: float) -> BandwidthTrace:
    if not 0 < lo_kbps < hi_kbps:
        raise ValueError("need 0 < lo < hi")
    bw = tuple(min(max(b, lo_kbps), hi_kbps) for b in trace.bandwidth_kbps)
    return BandwidthTrace(trace.timestamps_ms, bw, source=trace.source)


# -- synthetic trace generators for the bundled fixtures -----------------------


def synthesize_state_traces(
    count: int = 428,
    chunks: int = 49,
    max_kbps: float = 6000.0,
    min_kbps: float = 30.0,
    chunk_kbits: float = 4000.0,
    seed: int = 2018,
) -> list[StateTrace]:
    """Chunk-download traces whose means spread log-uniformly over
    (min_kbps, max_kbps]. Each chunk's average bandwidth varies around the
    trace's level; download time follows from a fixed chunk size."""
    rng = np.random.default_rng(seed)
    levels = np.exp(rng.uniform(np.log(min_kbps), np.log(max_kbps), size=count))
    traces = []
    for k, level in enumerate(levels):
        avgs = level * rng.lognormal(0.0, 0.25, size=chunks)
        # bound every trace mean by max_kbps
        mean = avgs.mean()
        if mean > max_kbps:
            avgs *= max_kbps / mean
            while sum(float(a) for a in avgs) / chunks > max_kbps:
                avgs *= 1.0 - 1e-12
        t = 0.0
        out = []
        for a in avgs:
            dur = chunk_kbits / a
            out.append(Chunk(round(float(t), 6), round(float(t + dur), 6), float(a)))
            t += dur + float(rng.uniform(0.0, 0.5))
        traces.append(StateTrace(tuple(out), source=f"trace_{k:03d}"))
    return traces


def synthesize_bus_log(seed: int = 4, duration_s: int = 600) -> list[tuple[int, int, int]]:
    """Belgium-style rows ``(timestamp_ms, bytes, interval_ms)`` for a bus ride.

    Piecewise-stationary segments in the 6-95 Mbps range, long enough for a
    changepoint detector to settle, with per-second Gaussian jitter.
    """
    rng = np.random.default_rng(seed)
    levels_mbps = [70.0, 18.0, 45.0, 88.0, 20.0, 60.0, 16.0, 35.0, 80.0, 22.0, 55.0, 75.0]
    rows = []
    t = 0
    seg = 0
    while t < duration_s:
        level = levels_mbps[seg % len(levels_mbps)]
        length = int(rng.integers(30, 70))
        for _ in range(length):
            if t >= duration_s:
                break
            mbps = level * (1.0 + 0.06 * rng.standard_normal())
            interval = 1000
            rows.append(((t + 1) * 1000, int(round(mbps * 1e6 / 8)), interval))
            t += 1
        seg += 1
    return rows
