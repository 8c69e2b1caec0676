"""Event data model, bit-exact stream I/O, validation and event framing.

Events live in a numpy structured array whose memory layout is the binary
record layout (16 bytes, little endian)::

    offset  size  field
    0       2     x    uint16
    2       2     y    uint16
    4       1     p    int8   (+1 / -1)
    5       3     pad  zero bytes
    8       8     t    uint64 (microseconds)

A binary file is a 20-byte header (``b"EVS1"``, width u32, height u32,
event_count u64) followed by ``event_count`` records, so reading and writing
are a single ``frombuffer`` / ``tobytes``.
"""
from __future__ import annotations

import csv
import io
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import EventParseError

MAGIC = b"EVS1"
HEADER = struct.Struct("<4sIIQ")
HEADER_SIZE = HEADER.size
RECORD_SIZE = 16

EVENT_DTYPE = np.dtype(
    {
        "names": ["x", "y", "p", "t"],
        "formats": ["<u2", "<u2", "i1", "<u8"],
        "offsets": [0, 2, 4, 8],
        "itemsize": RECORD_SIZE,
    }
)

CSV_HEADER = ["x", "y", "t", "p"]


@dataclass(frozen=True)
class StreamHeader:
    width: int
    height: int
    event_count: int
    magic: bytes = MAGIC


@dataclass(frozen=True, eq=False)
class EventStream:
    """An immutable, time-ordered sequence of events from one sensor.

    The constructor does not validate; use :func:`validate_stream` for that.
    """

    width: int
    height: int
    events: np.ndarray = field(repr=False)

    def __post_init__(self):
        src = np.asarray(self.events)
        # field-wise copy into a zeroed buffer: numpy copies of a dtype with
        # gaps leave the padding bytes undefined, which breaks byte identity
        ev = np.zeros(src.shape[0], dtype=EVENT_DTYPE)
        for name in EVENT_DTYPE.names:
            ev[name] = src[name]
        ev.setflags(write=False)
        object.__setattr__(self, "events", ev)

    @classmethod
    def from_arrays(cls, x, y, t, p, width, height) -> "EventStream":
        x = np.asarray(x)
        n = x.shape[0]
        ev = np.zeros(n, dtype=EVENT_DTYPE)
        ev["x"] = x
        ev["y"] = y
        ev["t"] = t
        ev["p"] = p
        return cls(int(width), int(height), ev)

    @classmethod
    def empty(cls, width, height) -> "EventStream":
        return cls(int(width), int(height), np.zeros(0, dtype=EVENT_DTYPE))

    @property
    def x(self) -> np.ndarray:
        return self.events["x"]

    @property
    def y(self) -> np.ndarray:
        return self.events["y"]

    @property
    def t(self) -> np.ndarray:
        return self.events["t"]

    @property
    def p(self) -> np.ndarray:
        return self.events["p"]

    @property
    def header(self) -> StreamHeader:
        return StreamHeader(self.width, self.height, len(self))

    def __len__(self) -> int:
        return self.events.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.events.tobytes() == other.events.tobytes()
        )

    def time_slice(self, t_start, t_stop) -> "EventStream":
        """Events with ``t_start <= t < t_stop`` (requires sorted timestamps)."""
        t = self.t
        lo = np.searchsorted(t, t_start, side="left")
        hi = np.searchsorted(t, t_stop, side="left")
        return EventStream(self.width, self.height, self.events[lo:hi])


def merge_streams(streams, width=None, height=None) -> EventStream:
    """Merge streams into one stable time-ordered stream."""
    streams = list(streams)
    if width is None:
        width = max(s.width for s in streams)
    if height is None:
        height = max(s.height for s in streams)
    ev = np.concatenate([s.events for s in streams]) if streams else np.zeros(0, EVENT_DTYPE)
    order = np.argsort(ev["t"], kind="stable")
    return EventStream(width, height, ev[order])


# --------------------------------------------------------------------------- I/O


def _guess_format(path, format):
    if format is not None:
        if format not in ("binary", "csv"):
            raise ValueError(f"unknown event file format {format!r}")
        return format
    return "csv" if str(path).lower().endswith(".csv") else "binary"


def write_events(stream: EventStream, path, format=None) -> None:
    """Serialize ``stream`` to ``path``.

    Output is deterministic: the same stream always produces the same bytes.
    The file is written to a temporary sibling and renamed into place.
    """
    fmt = _guess_format(path, format)
    path = Path(path)
    if fmt == "binary":
        payload = HEADER.pack(MAGIC, stream.width, stream.height, len(stream))
        payload += stream.events.tobytes()
        atomic_write(path, payload)
    else:
        buf = io.StringIO()
        buf.write(f"# evpipe width={stream.width} height={stream.height}\n")
        buf.write(",".join(CSV_HEADER) + "\n")
        ev = stream.events
        for x, y, t, p in zip(ev["x"].tolist(), ev["y"].tolist(), ev["t"].tolist(), ev["p"].tolist()):
            buf.write(f"{x},{y},{t},{p}\n")
        atomic_write(path, buf.getvalue().encode("ascii"))


def atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def read_events(path, format=None, *, width=None, height=None) -> EventStream:
    """Load an event file.

    Raises
    ------
    EventParseError
        On a bad magic tag, truncated or surplus data, an invalid polarity,
        out-of-range coordinates or decreasing timestamps. The error names the
        byte offset (binary) or line number (CSV) of the first problem.
    """
    fmt = _guess_format(path, format)
    if fmt == "binary":
        return _read_binary(Path(path).read_bytes())
    return _read_csv(Path(path), width, height)


def _read_binary(data: bytes) -> EventStream:
    if len(data) < HEADER_SIZE:
        raise EventParseError("truncated header", offset=len(data))
    magic, width, height, count = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise EventParseError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if width == 0 or height == 0:
        raise EventParseError("sensor width and height must be positive", offset=4)
    body = len(data) - HEADER_SIZE
    expected = count * RECORD_SIZE
    if body < expected:
        full = body // RECORD_SIZE
        raise EventParseError(
            f"truncated record {full} ({count} declared)", offset=HEADER_SIZE + full * RECORD_SIZE
        )
    if body > expected:
        raise EventParseError("trailing bytes after last record", offset=HEADER_SIZE + expected)
    ev = np.frombuffer(data, dtype=EVENT_DTYPE, count=count, offset=HEADER_SIZE)

    def where(i):
        return HEADER_SIZE + int(i) * RECORD_SIZE

    bad = np.flatnonzero((ev["p"] != 1) & (ev["p"] != -1))
    if bad.size:
        raise EventParseError(f"record {bad[0]}: polarity {ev['p'][bad[0]]}", offset=where(bad[0]) + 4)
    bad = np.flatnonzero((ev["x"] >= width) | (ev["y"] >= height))
    if bad.size:
        raise EventParseError(f"record {bad[0]}: coordinates outside sensor", offset=where(bad[0]))
    bad = np.flatnonzero(np.diff(ev["t"].astype(np.int64)) < 0) + 1 if count > 1 else np.empty(0, int)
    if bad.size:
        raise EventParseError(f"record {bad[0]}: timestamp decreases", offset=where(bad[0]) + 8)
    return EventStream(int(width), int(height), ev)


def _read_csv(path: Path, width, height) -> EventStream:
    xs, ys, ts, ps = [], [], [], []
    header_seen = False
    last_t = -1
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "width" and width is None:
                        width = int(val)
                    elif key == "height" and height is None:
                        height = int(val)
                continue
            row = next(csv.reader([line]))
            if not header_seen:
                if [c.strip() for c in row] != CSV_HEADER:
                    raise EventParseError(f"expected header {','.join(CSV_HEADER)}", line=lineno)
                header_seen = True
                continue
            if len(row) != 4:
                raise EventParseError(f"expected 4 fields, got {len(row)}", line=lineno)
            try:
                x, y, t, p = (int(v) for v in row)
            except ValueError as exc:
                raise EventParseError(f"non-integer field: {exc}", line=lineno) from None
            if p not in (-1, 1):
                raise EventParseError(f"polarity {p}", line=lineno)
            if x < 0 or y < 0 or t < 0:
                raise EventParseError("negative field", line=lineno)
            if t < last_t:
                raise EventParseError("timestamp decreases", line=lineno)
            if (width is not None and x >= width) or (height is not None and y >= height):
                raise EventParseError("coordinates outside sensor", line=lineno)
            last_t = t
            xs.append(x)
            ys.append(y)
            ts.append(t)
            ps.append(p)
    if not header_seen:
        raise EventParseError("missing header line", line=1)
    if width is None:
        width = max(xs) + 1 if xs else 1
    if height is None:
        height = max(ys) + 1 if ys else 1
    return EventStream.from_arrays(xs, ys, ts, ps, width, height)


# --------------------------------------------------------------------- validation


@dataclass
class ValidationReport:
    out_of_bounds: np.ndarray
    non_monotonic: np.ndarray
    bad_polarity: np.ndarray

    @property
    def n_violations(self) -> int:
        return len(self.out_of_bounds) + len(self.non_monotonic) + len(self.bad_polarity)

    @property
    def valid(self) -> bool:
        return self.n_violations == 0

    def summary(self) -> dict:
        return {
            "valid": self.valid,
            "out_of_bounds": len(self.out_of_bounds),
            "non_monotonic": len(self.non_monotonic),
            "bad_polarity": len(self.bad_polarity),
        }


def validate_stream(stream: EventStream) -> ValidationReport:
    """Count invariant violations; never raises.

    ``non_monotonic`` holds the index of each event whose timestamp is smaller
    than its predecessor's.
    """
    ev = stream.events
    oob = np.flatnonzero((ev["x"] >= stream.width) | (ev["y"] >= stream.height))
    pol = np.flatnonzero((ev["p"] != 1) & (ev["p"] != -1))
    if len(ev) > 1:
        t = ev["t"]
        mono = np.flatnonzero(t[1:] < t[:-1]) + 1
    else:
        mono = np.empty(0, dtype=np.intp)
    return ValidationReport(oob, mono, pol)


# ------------------------------------------------------------------------ framing


@dataclass
class EventFrame:
    """Signed polarity accumulation over one time window.

    ``data`` is indexed ``[row, col]`` = ``[y // bin, x // bin]``. Frame ``k``
    (1-based) covers ``t0 + (k-1)*dt <= t < t0 + k*dt``.
    """

    data: np.ndarray
    k: int
    dt: int
    bin: int
    t0: int = 0

    @property
    def t_start(self) -> int:
        return self.t0 + (self.k - 1) * self.dt


def frame_shape(width, height, bin) -> tuple[int, int]:
    return (-(-height // bin), -(-width // bin))


def iter_frames(stream: EventStream, dt, bin=2, t0=0, t_end=None) -> Iterator[EventFrame]:
    """Lazily yield the frames of :func:`bin_and_frame`."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if bin < 1:
        raise ValueError("bin must be >= 1")
    dt = int(dt)
    t = stream.t
    if t_end is None:
        if len(stream) == 0:
            return
        t_end = int(t[-1]) + 1
    n_frames = max(0, -(-(int(t_end) - int(t0)) // dt))
    rows, cols = frame_shape(stream.width, stream.height, bin)
    flat = (stream.y.astype(np.int64) // bin) * cols + stream.x.astype(np.int64) // bin
    pol = stream.p.astype(np.int64)
    bounds = np.arange(n_frames + 1, dtype=np.uint64) * np.uint64(dt) + np.uint64(t0)
    edges = np.searchsorted(t, bounds, side="left")
    for k in range(1, n_frames + 1):
        lo, hi = edges[k - 1], edges[k]
        data = np.bincount(flat[lo:hi], weights=pol[lo:hi], minlength=rows * cols)
        yield EventFrame(data.astype(np.int32).reshape(rows, cols), k, dt, bin, int(t0))


def bin_and_frame(stream: EventStream, dt, bin=2, t0=0, t_end=None) -> list[EventFrame]:
    """Bin events spatially and accumulate polarities per time window.

    Parameters
    ----------
    stream : EventStream
        Time-ordered events.
    dt : int
        Frame period in microseconds.
    bin : int
        Spatial binning factor; pixel ``(x, y)`` maps to ``(x // bin, y // bin)``.
    t0 : int
        Start of the first window.
    t_end : int, optional
        End of the last window; defaults to one past the last timestamp.

    Returns
    -------
    list of EventFrame
        ``ceil((t_end - t0) / dt)`` frames; windows without events are
        emitted as all-zero frames. Events on a boundary ``t0 + k*dt`` land
        in frame ``k + 1``.
    """
    return list(iter_frames(stream, dt, bin, t0, t_end))
