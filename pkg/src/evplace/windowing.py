"""Temporal windowing of event streams.

Place-recognition features are computed over short slices of the event
stream.  Two slicing schemes are supported:

* **fixed-count** windows hold exactly ``N`` consecutive events, so their
  duration adapts to scene activity;
* **fixed-time** windows hold whatever fell into a ``span_us`` interval,
  so their event count adapts instead.

A :class:`WindowSet` bundles several window families of different sizes
over the same stream.  Downstream code compares places once per family and
fuses the resulting distance matrices, which is where the ensemble effect
comes from: no single window size wins everywhere, but their mistakes
rarely coincide.

Window sizes may be given as absolute event counts or normalized to the
number of pixels, e.g. a fraction of ``0.1`` on a 346x260 sensor means
8996 events per window.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, ConfigError
from .events import EventStream, SensorGeometry

# Default family grids: four pixel-normalized counts and five spans.
DEFAULT_COUNT_FRACTIONS = (0.1, 0.3, 0.6, 0.8)
DEFAULT_SPANS_US = (44_000, 66_000, 88_000, 120_000, 140_000)
# Query-window size (as a pixel fraction) for the approximate ensemble.
DEFAULT_APPROX_FRACTION = 0.5
DEFAULT_GRID_DT_US = 1_000_000


class WindowKind(enum.Enum):
    FIXED_COUNT = "fixed_count"
    FIXED_TIME = "fixed_time"


@dataclass(frozen=True)
class WindowSpec:
    """Identity of a window family: its kind and its one size parameter."""

    kind: WindowKind
    count: int | None = None
    span_us: int | None = None

    def __post_init__(self):
        if self.kind is WindowKind.FIXED_COUNT:
            if self.count is None or self.count < 1 or self.span_us is not None:
                raise ConfigError("fixed-count spec needs count >= 1 and no span")
        else:
            if self.span_us is None or self.span_us < 1 or self.count is not None:
                raise ConfigError("fixed-time spec needs span_us >= 1 and no count")

    @classmethod
    def fixed_count(cls, count: int) -> "WindowSpec":
        return cls(WindowKind.FIXED_COUNT, count=int(count))

    @classmethod
    def fixed_time(cls, span_us: int) -> "WindowSpec":
        return cls(WindowKind.FIXED_TIME, span_us=int(span_us))

    @property
    def label(self) -> str:
        if self.kind is WindowKind.FIXED_COUNT:
            return f"count_{self.count}"
        return f"span_{self.span_us}us"


@dataclass(frozen=True)
class Window:
    """One window: an event index range plus the time interval it covers.

    Events ``[start_idx, end_idx)`` of the source stream belong to the
    window and their timestamps lie within ``[t_start_us, t_end_us)``.
    Fixed-time windows may be empty (``start_idx == end_idx``).
    """

    spec: WindowSpec
    start_idx: int
    end_idx: int
    t_start_us: int
    t_end_us: int

    @property
    def n_events(self) -> int:
        return self.end_idx - self.start_idx

    @property
    def is_empty(self) -> bool:
        return self.end_idx == self.start_idx


@dataclass(frozen=True)
class WindowFamily:
    """All windows of one spec over one stream, in temporal order."""

    spec: WindowSpec
    windows: tuple[Window, ...]

    @property
    def label(self) -> str:
        return self.spec.label

    def __len__(self) -> int:
        return len(self.windows)


@dataclass(frozen=True)
class WindowSet:
    """An ordered collection of window families over the same stream."""

    families: tuple[WindowFamily, ...]

    def __len__(self) -> int:
        return len(self.families)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f.label for f in self.families)


def normalized_count(fraction: float, geometry: SensorGeometry) -> int:
    """Convert a pixel-normalized window size to an absolute event count.

    ``N = fraction * width * height`` rounded half away from zero, with a
    minimum of one event.  ``fraction`` must lie in ``(0, 1]``.
    """
    if not (0.0 < fraction <= 1.0):
        raise ConfigError(f"fraction must be in (0, 1], got {fraction}")
    return max(1, int(math.floor(fraction * geometry.n_pixels + 0.5)))


def split_fixed_count(stream: EventStream, count: int) -> list[Window]:
    """Split a stream into disjoint consecutive windows of ``count`` events.

    A trailing remainder shorter than ``count`` is dropped; a stream with
    fewer than ``count`` events yields no windows at all.
    """
    n = len(stream)
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    spec = WindowSpec.fixed_count(count)
    windows = []
    for k in range(n // count):
        start = k * count
        end = start + count
        # Half-open time interval that contains exactly these events.
        windows.append(
            Window(spec, start, end, int(stream.t[start]), int(stream.t[end - 1]) + 1)
        )
    return windows


def split_fixed_time(stream: EventStream, span_us: int) -> list[Window]:
    """Split a stream into consecutive ``span_us`` intervals.

    Intervals are half-open ``[t_k, t_k + span)``, anchored at the first
    event's timestamp and continuing through the last event's timestamp.
    Intervals with no events are kept as empty windows so the family stays
    a uniform sampling of time.
    """
    if span_us < 1:
        raise ConfigError(f"span_us must be positive, got {span_us}")
    if not len(stream):
        raise ConfigError("cannot split an empty stream into time windows")
    spec = WindowSpec.fixed_time(span_us)
    t0 = int(stream.t[0])
    n_windows = int((int(stream.t[-1]) - t0) // span_us) + 1
    bounds = t0 + np.arange(n_windows + 1, dtype=np.int64) * span_us
    edges = np.searchsorted(stream.t, bounds)
    return [
        Window(spec, int(edges[k]), int(edges[k + 1]), int(bounds[k]), int(bounds[k + 1]))
        for k in range(n_windows)
    ]


def build_window_set(
    stream: EventStream,
    counts: tuple[float | int, ...] | list[float | int] | None = None,
    spans_us: tuple[int, ...] | list[int] | None = None,
) -> WindowSet:
    """Build the window families for an ensemble over one stream.

    Parameters
    ----------
    stream : EventStream
    counts : sequence of int or float, optional
        Fixed-count family sizes.  Floats in ``(0, 1]`` are interpreted as
        pixel-normalized fractions, integers as absolute event counts.
        Defaults to ``DEFAULT_COUNT_FRACTIONS``.
    spans_us : sequence of int, optional
        Fixed-time family spans in microseconds.  Defaults to
        ``DEFAULT_SPANS_US``.

    Returns
    -------
    WindowSet
        Count families first (in the given order), then span families.
    """
    if counts is None:
        counts = DEFAULT_COUNT_FRACTIONS
    if spans_us is None:
        spans_us = DEFAULT_SPANS_US
    if not counts and not spans_us:
        raise ConfigError("window set needs at least one count or span")
    families = []
    for c in counts:
        if isinstance(c, bool):
            raise ConfigError(f"invalid window count {c!r}")
        if isinstance(c, float):
            n = normalized_count(c, stream.geometry)
        else:
            n = int(c)
        families.append(WindowFamily(WindowSpec.fixed_count(n), tuple(split_fixed_count(stream, n))))
    for s in spans_us:
        families.append(WindowFamily(WindowSpec.fixed_time(int(s)), tuple(split_fixed_time(stream, s))))
    return WindowSet(tuple(families))


def align_to_time(family: WindowFamily, stream: EventStream, t_star_us: int) -> int:
    """Index of the family window best aligned to sample time ``t_star_us``.

    Among all events covered by the family, the one whose timestamp is
    nearest to ``t_star_us`` is found (ties go to the earlier event), and
    the index of the window containing it is returned.  Sample times beyond
    the covered range thus resolve to the first or last non-empty window.
    """
    if not family.windows:
        raise AlignmentError(f"family {family.label} has no windows")
    lo = family.windows[0].start_idx
    hi = family.windows[-1].end_idx
    if lo == hi:
        raise AlignmentError(f"family {family.label} covers no events")
    t = stream.t[lo:hi]
    pos = int(np.searchsorted(t, t_star_us, side="left"))
    if pos == 0:
        idx = 0
    elif pos == t.size:
        idx = t.size - 1
    else:
        # Tie between equally near neighbours goes to the earlier event.
        if t_star_us - int(t[pos - 1]) <= int(t[pos]) - t_star_us:
            idx = pos - 1
        else:
            idx = pos
    event_idx = lo + idx
    ends = np.array([w.end_idx for w in family.windows])
    w = int(np.searchsorted(ends, event_idx, side="right"))
    window = family.windows[w]
    if not (window.start_idx <= event_idx < window.end_idx):
        raise AlignmentError(
            f"family {family.label}: event {event_idx} not inside window {w}"
        )
    return w


def sample_grid(stream: EventStream, dt_us: int = DEFAULT_GRID_DT_US) -> np.ndarray:
    """Regular sample times over a stream: ``t0, t0+dt, ...`` up to the end.

    The grid starts at the first event's timestamp and includes every
    multiple of ``dt_us`` that is still within the stream's time span.
    An empty stream yields an empty grid.
    """
    if dt_us < 1:
        raise ConfigError(f"dt_us must be positive, got {dt_us}")
    if not len(stream):
        return np.array([], dtype=np.int64)
    t0 = int(stream.t[0])
    n = (int(stream.t[-1]) - t0) // dt_us + 1
    return t0 + np.arange(n, dtype=np.int64) * dt_us
