"""Distance metrics and query-by-reference distance matrices.

A :class:`DistanceMatrix` holds the pairwise distances between one query
descriptor sequence and one reference sequence, tagged with a member label
so fused matrices stay traceable to the window families they came from.

Matrix products are computed with plain broadcast-and-sum reductions
rather than BLAS calls: results must be bit-identical across machines for
the golden-output tests, and BLAS backends are free to reorder sums.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass

import numpy as np

from .descriptors import Descriptor, DescriptorSequence
from .errors import ConfigError, DegenerateDescriptorError, OrderingError, ParseError


class Metric(enum.Enum):
    COSINE = "cosine"
    SAD = "sad"


def _vector(d) -> np.ndarray:
    v = np.asarray(d.values if isinstance(d, Descriptor) else d, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ConfigError("expected a non-empty 1-D descriptor vector")
    return v


def cosine_distance(a, b) -> float:
    """Cosine distance ``1 - a.b / (|a||b|)``, in ``[0, 2]``.

    Computed as half the squared chord between the unit vectors, which is
    the same quantity but returns exact ``0.0`` for identical inputs and
    exact ``2.0`` for opposite ones.  Zero-norm inputs have no direction
    and are rejected.
    """
    va, vb = _vector(a), _vector(b)
    if va.size != vb.size:
        raise ConfigError(f"dimension mismatch: {va.size} vs {vb.size}")
    na = np.sqrt((va * va).sum())
    nb = np.sqrt((vb * vb).sum())
    if na == 0.0 or nb == 0.0:
        raise DegenerateDescriptorError("cosine distance undefined for zero vectors")
    diff = va / na - vb / nb
    return float(min(0.5 * (diff * diff).sum(), 2.0))


def sad_distance(a, b) -> float:
    """Mean absolute difference between two descriptors."""
    va, vb = _vector(a), _vector(b)
    if va.size != vb.size:
        raise ConfigError(f"dimension mismatch: {va.size} vs {vb.size}")
    return float(np.abs(va - vb).mean())


@dataclass(frozen=True)
class DistanceMatrix:
    """Query-by-reference distances for one ensemble member.

    ``values[i, j]`` is the distance between query sample ``i`` and
    reference sample ``j``; the timestamp vectors give the sample times of
    the two axes.
    """

    values: np.ndarray
    query_t_us: np.ndarray
    ref_t_us: np.ndarray
    member_label: str

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        qt = np.array(self.query_t_us, dtype=np.int64)
        rt = np.array(self.ref_t_us, dtype=np.int64)
        if v.ndim != 2 or v.shape != (qt.size, rt.size) or v.size == 0:
            raise ConfigError("distance matrix shape does not match its timestamps")
        if not np.all(np.isfinite(v)):
            raise ConfigError("distance matrix contains non-finite entries")
        for ts in (qt, rt):
            if ts.size > 1 and np.any(np.diff(ts) <= 0):
                raise OrderingError("matrix timestamps must be strictly increasing")
        for arr, name in ((v, "values"), (qt, "query_t_us"), (rt, "ref_t_us")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_queries(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_refs(self) -> int:
        return int(self.values.shape[1])


def _unit_rows(values: np.ndarray, label: str) -> np.ndarray:
    norms = np.sqrt((values * values).sum(axis=1))
    if np.any(norms == 0.0):
        raise DegenerateDescriptorError(
            f"{label}: zero-norm descriptor cannot be compared with cosine"
        )
    return values / norms[:, None]


def build_distance_matrix(
    query: DescriptorSequence, reference: DescriptorSequence, metric: Metric
) -> DistanceMatrix:
    """All pairwise distances between a query and a reference sequence.

    Both sequences must be non-empty and share one descriptor dimension.
    The member label is the common source label, or ``q_vs_r`` when the
    two sides come from different sources.
    """
    if len(query) == 0 or len(reference) == 0:
        raise ConfigError("distance matrix needs non-empty sequences")
    if query.dim != reference.dim:
        raise ConfigError(f"dimension mismatch: {query.dim} vs {reference.dim}")
    label = query.label if query.label == reference.label else f"{query.label}_vs_{reference.label}"
    out = np.empty((len(query), len(reference)), dtype=np.float64)
    if metric is Metric.COSINE:
        qh = _unit_rows(query.values, f"query {query.label}")
        rh = _unit_rows(reference.values, f"reference {reference.label}")
        for i in range(qh.shape[0]):
            diff = rh - qh[i]
            out[i] = 0.5 * (diff * diff).sum(axis=1)
        np.clip(out, 0.0, 2.0, out=out)
    elif metric is Metric.SAD:
        for i in range(out.shape[0]):
            out[i] = np.abs(reference.values - query.values[i]).mean(axis=1)
    else:
        raise ConfigError(f"unknown metric {metric!r}")
    return DistanceMatrix(out, query.t_us, reference.t_us, label)


def best_match_per_query(matrix: DistanceMatrix) -> list[tuple[int, float]]:
    """Per query row: ``(argmin reference index, minimum distance)``.

    Ties resolve to the smallest reference index.
    """
    idx = np.argmin(matrix.values, axis=1)
    return [(int(j), float(matrix.values[i, j])) for i, j in enumerate(idx)]


def write_matrix_csv(matrix: DistanceMatrix) -> bytes:
    """Serialize a matrix: header of reference times, then ``t_q,d1,...``."""
    lines = [",".join(str(int(t)) for t in matrix.ref_t_us)]
    for i in range(matrix.n_queries):
        row = ",".join(repr(float(d)) for d in matrix.values[i])
        lines.append(f"{int(matrix.query_t_us[i])},{row}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_matrix_csv(source, member_label: str = "loaded") -> DistanceMatrix:
    """Parse a matrix written by :func:`write_matrix_csv`."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    ref_t = None
    query_t: list[int] = []
    rows: list[list[float]] = []
    for lineno, raw in enumerate(io.StringIO(source), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if ref_t is None:
            try:
                ref_t = [int(f) for f in fields]
            except ValueError:
                raise ParseError("header must list integer reference times", lineno) from None
            continue
        if len(fields) != len(ref_t) + 1:
            raise ParseError(
                f"expected {len(ref_t) + 1} fields, got {len(fields)}", lineno
            )
        try:
            query_t.append(int(fields[0]))
            rows.append([float(f) for f in fields[1:]])
        except ValueError:
            raise ParseError(f"non-numeric field in row {line[:40]!r}", lineno) from None
    if ref_t is None or not rows:
        raise ParseError("matrix CSV needs a header row and at least one data row")
    return DistanceMatrix(
        np.array(rows, dtype=np.float64),
        np.array(query_t, dtype=np.int64),
        np.array(ref_t, dtype=np.int64),
        member_label,
    )
