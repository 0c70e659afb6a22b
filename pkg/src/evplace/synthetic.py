"""Seeded synthetic traverses with exact ground truth.

Real event recordings are gigabytes and their annotations hand-made; this
module stands in with a miniature world that preserves the structure the
toolkit cares about.  A world is a sequence of places, each a sparse map
of edge pixels firing at a couple hundred events per second.  A traverse
visits the places in order, drawing per-pixel Poisson event counts from
the place pattern plus uniform background noise.  Two traverses of the
same world under different seeds, rates, and dropout mimic revisiting a
route under changed conditions, and because dwell times are known, the
ground truth is exact by construction.

Everything is driven by numpy's seeded PCG64 generator, so a (seed,
params) pair reproduces a traverse bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptors import AccumulationMode, DescriptorParams
from .distance import Metric
from .ensemble import EnsembleRule
from .errors import ConfigError
from .evaluation import DEFAULT_LOC_THRESHOLD_US, GroundTruth
from .events import EventStream, SensorGeometry
from .pipeline import PipelineResult, run_place_recognition
from .windowing import DEFAULT_APPROX_FRACTION, DEFAULT_GRID_DT_US

# Firing rate painted onto edge pixels, events per second.
EDGE_RATE = 200.0
DEFAULT_SEGMENTS_PER_PLACE = 4


@dataclass(frozen=True)
class SyntheticWorld:
    """Per-place edge maps: intensity in events/second per pixel."""

    seed: int
    n_places: int
    geometry: SensorGeometry
    place_patterns: np.ndarray

    def __post_init__(self):
        pat = np.array(self.place_patterns, dtype=np.float64)
        expected = (self.n_places, self.geometry.height, self.geometry.width)
        if pat.shape != expected:
            raise ConfigError(f"pattern shape {pat.shape}, expected {expected}")
        if np.any(pat < 0):
            raise ConfigError("pattern intensities must be non-negative")
        for i in range(self.n_places):
            for j in range(i + 1, self.n_places):
                if np.array_equal(pat[i], pat[j]):
                    raise ConfigError(f"places {i} and {j} have identical patterns")
        pat.flags.writeable = False
        object.__setattr__(self, "place_patterns", pat)


@dataclass(frozen=True)
class TraverseParams:
    """Conditions of one pass along the route."""

    seed: int
    dwell_s: float = 1.0
    rate_scale: float = 1.0
    noise_rate: float = 0.0
    dropout: float = 0.0

    def __post_init__(self):
        if self.dwell_s <= 0:
            raise ConfigError(f"dwell_s must be positive, got {self.dwell_s}")
        if self.rate_scale <= 0:
            raise ConfigError(f"rate_scale must be positive, got {self.rate_scale}")
        if self.noise_rate < 0:
            raise ConfigError(f"noise_rate must be >= 0, got {self.noise_rate}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")


def _raster_segment(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer line rasterization (Bresenham)."""
    points = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            return points
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def generate_world(
    seed: int,
    n_places: int,
    geometry: SensorGeometry,
    segments_per_place: int = DEFAULT_SEGMENTS_PER_PLACE,
) -> SyntheticWorld:
    """Deterministically draw one edge map per place.

    Each place gets ``segments_per_place`` random line segments rasterized
    at ``EDGE_RATE`` events/s per pixel.  A draw that collides with an
    earlier place's map is redrawn, so patterns always differ.
    """
    if n_places < 2:
        raise ConfigError(f"need at least 2 places, got {n_places}")
    if segments_per_place < 1:
        raise ConfigError("segments_per_place must be >= 1")
    rng = np.random.default_rng(seed)
    patterns = np.zeros((n_places, geometry.height, geometry.width), dtype=np.float64)
    for i in range(n_places):
        while True:
            pat = np.zeros((geometry.height, geometry.width), dtype=np.float64)
            for _ in range(segments_per_place):
                x0, x1 = rng.integers(0, geometry.width, size=2)
                y0, y1 = rng.integers(0, geometry.height, size=2)
                for x, y in _raster_segment(int(x0), int(y0), int(x1), int(y1)):
                    pat[y, x] = EDGE_RATE
            if not any(np.array_equal(pat, patterns[j]) for j in range(i)):
                break
        patterns[i] = pat
    return SyntheticWorld(seed, n_places, geometry, patterns)


def generate_traverse(
    world: SyntheticWorld, params: TraverseParams
) -> tuple[EventStream, GroundTruth]:
    """Simulate one pass along the route.

    The traverse dwells ``dwell_s`` at each place in order.  Every pixel
    fires as a Poisson process at ``rate_scale * pattern + noise_rate``
    events/s with uniform timestamps inside the dwell and random polarity;
    ``dropout`` then thins events independently.  The returned ground
    truth anchors one pair per place center, in the traverse's own
    timeline (pair two traverses with :func:`pair_ground_truth`).
    """
    rng = np.random.default_rng(params.seed)
    geom = world.geometry
    dwell_us = int(round(params.dwell_s * 1e6))
    if dwell_us < 1:
        raise ConfigError("dwell_s is below one microsecond")
    ts, pixs, pols = [], [], []
    pixel_ids = np.arange(geom.n_pixels, dtype=np.int64)
    for i in range(world.n_places):
        lam = (params.rate_scale * world.place_patterns[i] + params.noise_rate) * params.dwell_s
        counts = rng.poisson(lam).ravel()
        n_i = int(counts.sum())
        # Draw the dropout mask even when dropout is zero, so traverses
        # that differ only in dropout share the underlying event set.
        t = i * dwell_us + np.floor(rng.random(n_i) * dwell_us).astype(np.int64)
        pol = (rng.integers(0, 2, size=n_i) * 2 - 1).astype(np.int8)
        keep = rng.random(n_i) >= params.dropout
        ts.append(t[keep])
        pixs.append(np.repeat(pixel_ids, counts)[keep])
        pols.append(pol[keep])
    t = np.concatenate(ts) if ts else np.array([], dtype=np.int64)
    pix = np.concatenate(pixs) if pixs else np.array([], dtype=np.int64)
    pol = np.concatenate(pols) if pols else np.array([], dtype=np.int8)
    order = np.argsort(t, kind="stable")
    stream = EventStream(
        geom,
        t[order],
        (pix[order] % geom.width).astype(np.int32),
        (pix[order] // geom.width).astype(np.int32),
        pol[order],
    )
    centers = (
        np.arange(world.n_places, dtype=np.float64) * dwell_us + dwell_us / 2.0
    )
    return stream, GroundTruth(centers, centers.copy())


def pair_ground_truth(query_gt: GroundTruth, reference_gt: GroundTruth) -> GroundTruth:
    """Anchor correspondences between two traverses of the same world.

    Place ``i``'s center time in the query traverse maps to place ``i``'s
    center time in the reference traverse, which stays exact even when the
    two traverses dwell for different durations.
    """
    if len(query_gt) != len(reference_gt):
        raise ConfigError("traverses visited different place counts")
    return GroundTruth(query_gt.query_t_us, reference_gt.query_t_us)


def run_synthetic_experiment(
    world: SyntheticWorld,
    reference: TraverseParams,
    query: TraverseParams,
    counts=None,
    spans_us=None,
    descriptor: DescriptorParams = DescriptorParams(mode=AccumulationMode.COUNT),
    metric: Metric = Metric.COSINE,
    rule: EnsembleRule = EnsembleRule.mean(),
    grid_dt_us: int = DEFAULT_GRID_DT_US,
    loc_threshold_us: int = DEFAULT_LOC_THRESHOLD_US,
    approximate_fraction: float | None = DEFAULT_APPROX_FRACTION,
) -> PipelineResult:
    """Generate both traverses and run the full pipeline.

    The default descriptor accumulation is ``COUNT`` rather than the
    signed sum: synthetic polarities are random coin flips, so signed
    images would average to zero and carry no structure.
    """
    ref_stream, ref_gt = generate_traverse(world, reference)
    q_stream, q_gt = generate_traverse(world, query)
    anchors = pair_ground_truth(q_gt, ref_gt)
    return run_place_recognition(
        q_stream,
        ref_stream,
        anchors,
        counts=counts,
        spans_us=spans_us,
        descriptor=descriptor,
        metric=metric,
        rule=rule,
        grid_dt_us=grid_dt_us,
        loc_threshold_us=loc_threshold_us,
        approximate_fraction=approximate_fraction,
    )
