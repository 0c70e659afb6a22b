"""Turning event windows into fixed-length place descriptors.

The built-in descriptor rasterizes a window into an event image,
area-averages it down to a small frame, normalizes each patch to zero mean
and unit variance, and flattens the result.  Patch normalization makes the
vector invariant to global changes in event rate, which is what varies
most between visits to the same place.

Descriptors computed elsewhere (e.g. by a learned image model on
reconstructed frames) can be loaded from CSV and used interchangeably:
downstream code only sees :class:`DescriptorSequence` objects.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DegenerateDescriptorError,
    OrderingError,
    ParseError,
)
from .events import EventStream, SensorGeometry
from .windowing import Window, WindowFamily, WindowSet, WindowSpec, align_to_time

DEFAULT_CLIP = 3.0
DEFAULT_DOWN_WIDTH = 32
DEFAULT_DOWN_HEIGHT = 24
DEFAULT_PATCH = 8
# Patches with standard deviation below this are emitted as zeros.
DEGENERATE_STD = 1e-9


class AccumulationMode(enum.Enum):
    SIGNED_SUM = "signed_sum"
    COUNT = "count"
    BINARY = "binary"


class DescriptorKind(enum.Enum):
    SAD = "sad"
    EXTERNAL = "external"


@dataclass(frozen=True)
class EventImage:
    """A window rasterized onto the pixel array, shape ``(height, width)``."""

    geometry: SensorGeometry
    pixels: np.ndarray
    mode: AccumulationMode

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.shape != (self.geometry.height, self.geometry.width):
            raise ConfigError(
                f"image shape {px.shape} does not match geometry "
                f"{self.geometry.height}x{self.geometry.width}"
            )
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class ExternalSource:
    """Tag for descriptor sequences that were loaded, not computed here."""

    name: str

    @property
    def label(self) -> str:
        return f"external_{self.name}"


@dataclass(frozen=True)
class Descriptor:
    """One place descriptor: a sample time and a fixed-length vector."""

    t_us: int
    values: np.ndarray
    kind: DescriptorKind

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ConfigError("descriptor values must be a non-empty 1-D vector")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class DescriptorSequence:
    """Time-ordered descriptors of one source over one traverse.

    Stored as a timestamp vector plus an ``(n, dim)`` value matrix so the
    distance stage can work on whole arrays.
    """

    source: WindowSpec | ExternalSource
    t_us: np.ndarray
    values: np.ndarray
    kind: DescriptorKind

    def __post_init__(self):
        t = np.array(self.t_us, dtype=np.int64)
        v = np.array(self.values, dtype=np.float64)
        if t.ndim != 1 or v.ndim != 2 or t.size != v.shape[0]:
            raise ConfigError("descriptor sequence arrays are inconsistent")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise OrderingError("descriptor timestamps must be strictly increasing")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "t_us", t)
        object.__setattr__(self, "values", v)

    @property
    def label(self) -> str:
        return self.source.label

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def __len__(self) -> int:
        return int(self.t_us.size)

    def descriptor(self, i: int) -> Descriptor:
        return Descriptor(int(self.t_us[i]), self.values[i], self.kind)


@dataclass(frozen=True)
class DescriptorParams:
    """Knobs of the built-in descriptor pipeline."""

    mode: AccumulationMode = AccumulationMode.SIGNED_SUM
    clip: float = DEFAULT_CLIP
    down_width: int = DEFAULT_DOWN_WIDTH
    down_height: int = DEFAULT_DOWN_HEIGHT
    patch: int = DEFAULT_PATCH

    def __post_init__(self):
        if self.clip <= 0:
            raise ConfigError(f"clip must be positive, got {self.clip}")
        if self.patch < 1:
            raise ConfigError(f"patch must be >= 1, got {self.patch}")
        if self.down_width % self.patch or self.down_height % self.patch:
            raise ConfigError(
                f"patch {self.patch} must divide {self.down_width}x{self.down_height}"
            )

    @property
    def dim(self) -> int:
        return self.down_width * self.down_height


def accumulate_image(
    window: Window,
    stream: EventStream,
    mode: AccumulationMode = AccumulationMode.SIGNED_SUM,
    clip: float = DEFAULT_CLIP,
) -> EventImage:
    """Rasterize a window's events onto the pixel array.

    ``SIGNED_SUM`` adds each event's polarity and clips the result to
    ``[-clip, +clip]``; ``COUNT`` counts events per pixel (no clipping);
    ``BINARY`` marks pixels that fired at least once.  An empty window
    yields an all-zero image.
    """
    if clip <= 0:
        raise ConfigError(f"clip must be positive, got {clip}")
    if window.end_idx > len(stream) or window.start_idx < 0:
        raise ConfigError("window indices fall outside the stream")
    geom = stream.geometry
    img = np.zeros((geom.height, geom.width), dtype=np.float64)
    sl = slice(window.start_idx, window.end_idx)
    if mode is AccumulationMode.SIGNED_SUM:
        np.add.at(img, (stream.y[sl], stream.x[sl]), stream.p[sl].astype(np.float64))
        np.clip(img, -clip, clip, out=img)
    elif mode is AccumulationMode.COUNT:
        np.add.at(img, (stream.y[sl], stream.x[sl]), 1.0)
    elif mode is AccumulationMode.BINARY:
        img[stream.y[sl], stream.x[sl]] = 1.0
    else:
        raise ConfigError(f"unknown accumulation mode {mode!r}")
    return EventImage(geom, img, mode)


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic ``(n_out, n_in)`` box-average weights."""
    scale = n_in / n_out
    w = np.zeros((n_out, n_in), dtype=np.float64)
    for r in range(n_out):
        lo = r * scale
        hi = (r + 1) * scale
        i0 = int(np.floor(lo))
        i1 = min(n_in, int(np.ceil(hi)))
        for i in range(i0, i1):
            overlap = min(i + 1.0, hi) - max(float(i), lo)
            if overlap > 0:
                w[r, i] = overlap / scale
    return w


def _area_resize(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Downsample by exact box averaging (handles non-integer ratios)."""
    in_h, in_w = pixels.shape
    if (in_h, in_w) == (out_h, out_w):
        return pixels.copy()
    wr = _area_weights(in_h, out_h)
    wc = _area_weights(in_w, out_w)
    # Two broadcast-and-sum contractions; reductions stay inside numpy's
    # pairwise summation, which keeps results reproducible bit for bit.
    tmp = (wr[:, :, None] * pixels[None, :, :]).sum(axis=1)
    return (tmp[:, :, None] * wc.T[None, :, :]).sum(axis=1)


def sad_descriptor(
    image: EventImage,
    down_width: int = DEFAULT_DOWN_WIDTH,
    down_height: int = DEFAULT_DOWN_HEIGHT,
    patch: int = DEFAULT_PATCH,
    t_us: int = 0,
) -> Descriptor:
    """Compute the patch-normalized frame descriptor of an event image.

    The image is area-averaged down to ``down_height x down_width``, each
    non-overlapping ``patch x patch`` tile is shifted to zero mean and
    scaled to unit (population) standard deviation, and the frame is
    flattened row-major.  Tiles with nearly zero variance come out as
    zeros.  The vector length is ``down_width * down_height``.
    """
    if patch < 1:
        raise ConfigError(f"patch must be >= 1, got {patch}")
    if down_width % patch or down_height % patch:
        raise ConfigError(f"patch {patch} must divide {down_width}x{down_height}")
    in_h, in_w = image.pixels.shape
    if down_width > in_w or down_height > in_h:
        raise ConfigError(
            f"target {down_height}x{down_width} exceeds image {in_h}x{in_w}"
        )
    small = _area_resize(image.pixels, down_height, down_width)
    blocks = small.reshape(down_height // patch, patch, down_width // patch, patch)
    mean = blocks.mean(axis=(1, 3), keepdims=True)
    centered = blocks - mean
    std = np.sqrt((centered**2).mean(axis=(1, 3), keepdims=True))
    normed = np.where(std < DEGENERATE_STD, 0.0, centered / np.maximum(std, DEGENERATE_STD))
    return Descriptor(t_us, normed.reshape(down_height, down_width).ravel(), DescriptorKind.SAD)


def describe_window_set(
    window_set: WindowSet,
    stream: EventStream,
    grid: np.ndarray,
    params: DescriptorParams = DescriptorParams(),
) -> list[DescriptorSequence]:
    """Descriptor sequence per window family, sampled on a common grid.

    For every grid time the family window nearest in time is selected
    (see :func:`evplace.windowing.align_to_time`), rasterized, and
    described.  All returned sequences carry exactly the grid's
    timestamps, so matrices built from them are index-aligned.
    """
    grid = np.ascontiguousarray(grid, dtype=np.int64)
    if grid.size == 0:
        raise ConfigError("sample grid is empty")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise OrderingError("sample grid must be strictly increasing")
    sequences = []
    for family in window_set.families:
        cache: dict[int, np.ndarray] = {}
        rows = np.empty((grid.size, params.dim), dtype=np.float64)
        for j, t_star in enumerate(grid):
            w = align_to_time(family, stream, int(t_star))
            if w not in cache:
                image = accumulate_image(family.windows[w], stream, params.mode, params.clip)
                cache[w] = sad_descriptor(
                    image, params.down_width, params.down_height, params.patch
                ).values
            rows[j] = cache[w]
        sequences.append(DescriptorSequence(family.spec, grid, rows, DescriptorKind.SAD))
    return sequences


def load_descriptors(source, name: str = "external") -> DescriptorSequence:
    """Load externally computed descriptors from CSV.

    Rows are ``t_seconds,v1,...,vD`` with no header; timestamps must be
    strictly increasing and every row must have the same dimension.
    Zero-norm rows are rejected because they have no direction to compare.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    times: list[int] = []
    rows: list[np.ndarray] = []
    dim = None
    prev_t = None
    for lineno, raw in enumerate(io.StringIO(source), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) < 2:
            raise ParseError("descriptor row needs a time and at least one value", lineno)
        try:
            t_s = float(fields[0])
            vals = np.array([float(f) for f in fields[1:]], dtype=np.float64)
        except ValueError:
            raise ParseError(f"non-numeric field in row {line[:40]!r}", lineno) from None
        if not np.all(np.isfinite(vals)) or not np.isfinite(t_s):
            raise ParseError("non-finite value", lineno)
        if dim is None:
            dim = vals.size
        elif vals.size != dim:
            raise ParseError(f"dimension {vals.size} differs from first row ({dim})", lineno)
        t_us = int(round(t_s * 1e6))
        if prev_t is not None and t_us <= prev_t:
            raise OrderingError(f"line {lineno}: timestamps must be strictly increasing")
        if not np.any(vals):
            raise DegenerateDescriptorError(f"line {lineno}: zero-norm descriptor")
        prev_t = t_us
        times.append(t_us)
        rows.append(vals)
    if not rows:
        return DescriptorSequence(
            ExternalSource(name),
            np.array([], dtype=np.int64),
            np.zeros((0, 0), dtype=np.float64),
            DescriptorKind.EXTERNAL,
        )
    return DescriptorSequence(
        ExternalSource(name),
        np.array(times, dtype=np.int64),
        np.vstack(rows),
        DescriptorKind.EXTERNAL,
    )


def write_descriptors(seq: DescriptorSequence) -> bytes:
    """Serialize a descriptor sequence as ``t_seconds,v1,...,vD`` CSV."""
    out = []
    for i in range(len(seq)):
        t_s = seq.t_us[i] / 1e6
        out.append(repr(float(t_s)) + "," + ",".join(repr(float(v)) for v in seq.values[i]) + "\n")
    return "".join(out).encode("utf-8")
