"""Combination rules that fuse per-member distance matrices.

Each window family contributes one distance matrix over the same query
and reference sample grids.  The rules here collapse that stack into a
single matrix (or, for majority voting, into a vote matrix).  The mean
rule is the workhorse; the others exist to quantify how much the choice
of rule matters.

Two further ensembles avoid computing every query-side family:
:func:`approximate_combine` compares one query family against all
reference families, and :func:`cross_window_combine` compares every query
family against every reference family (``k * k`` members).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .descriptors import DescriptorSequence
from .distance import DistanceMatrix, Metric, build_distance_matrix
from .errors import ConfigError

DEFAULT_WEIGHT_GRID = (0.5, 0.75, 1.0, 1.25, 1.5)
DEFAULT_TRIM = 1


class RuleKind(enum.Enum):
    MEAN = "mean"
    PRODUCT = "product"
    MEDIAN = "median"
    MIN = "min"
    MAX = "max"
    TRIMMED_MEAN = "trimmed_mean"
    WEIGHTED = "weighted"
    MAJORITY_VOTE = "majority_vote"


@dataclass(frozen=True)
class EnsembleRule:
    """A combination rule plus its parameters.

    ``weights`` applies only to the weighted rule (one positive factor per
    member); ``trim`` only to the trimmed mean (members cut per side).
    """

    kind: RuleKind
    weights: tuple[float, ...] | None = None
    trim: int = DEFAULT_TRIM

    def __post_init__(self):
        if self.weights is not None:
            if self.kind is not RuleKind.WEIGHTED:
                raise ConfigError("weights are only valid for the weighted rule")
            if len(self.weights) == 0 or any(w <= 0 for w in self.weights):
                raise ConfigError("weights must be positive")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        elif self.kind is RuleKind.WEIGHTED:
            raise ConfigError("weighted rule needs weights")
        if self.trim < 1:
            raise ConfigError(f"trim must be >= 1, got {self.trim}")

    @classmethod
    def mean(cls) -> "EnsembleRule":
        return cls(RuleKind.MEAN)

    @classmethod
    def product(cls) -> "EnsembleRule":
        return cls(RuleKind.PRODUCT)

    @classmethod
    def median(cls) -> "EnsembleRule":
        return cls(RuleKind.MEDIAN)

    @classmethod
    def minimum(cls) -> "EnsembleRule":
        return cls(RuleKind.MIN)

    @classmethod
    def maximum(cls) -> "EnsembleRule":
        return cls(RuleKind.MAX)

    @classmethod
    def trimmed_mean(cls, trim: int = DEFAULT_TRIM) -> "EnsembleRule":
        return cls(RuleKind.TRIMMED_MEAN, trim=trim)

    @classmethod
    def weighted(cls, weights) -> "EnsembleRule":
        return cls(RuleKind.WEIGHTED, weights=tuple(weights))

    @classmethod
    def majority_vote(cls) -> "EnsembleRule":
        return cls(RuleKind.MAJORITY_VOTE)


def _tree_mean(stack: np.ndarray) -> np.ndarray:
    """Mean over the first axis via pairwise-tree summation.

    A sequential reduction passes through fl(3a), fl(5a), ... and can land
    one ulp off even when every member is the same matrix.  The tree adds
    equals to equals, so a power-of-two count of identical members
    collapses to that member without any rounding at all.
    """
    k = stack.shape[0]
    while stack.shape[0] > 1:
        even = stack.shape[0] // 2 * 2
        pairs = stack[0:even:2] + stack[1:even:2]
        if stack.shape[0] % 2:
            pairs = np.concatenate([pairs, stack[-1:]], axis=0)
        stack = pairs
    return stack[0] / k


def _stack(members: list[DistanceMatrix] | tuple[DistanceMatrix, ...]) -> np.ndarray:
    if len(members) < 1:
        raise ConfigError("ensemble needs at least one member")
    first = members[0]
    for m in members[1:]:
        if m.values.shape != first.values.shape:
            raise ConfigError(
                f"member {m.member_label} shape {m.values.shape} differs from "
                f"{first.member_label} {first.values.shape}"
            )
        if not (
            np.array_equal(m.query_t_us, first.query_t_us)
            and np.array_equal(m.ref_t_us, first.ref_t_us)
        ):
            raise ConfigError(f"member {m.member_label} is not sample-aligned")
    return np.stack([m.values for m in members])


def combine(
    members: list[DistanceMatrix] | tuple[DistanceMatrix, ...], rule: EnsembleRule
) -> DistanceMatrix:
    """Fuse member matrices elementwise according to ``rule``.

    Members must share shape and sample grids.  The weighted rule computes
    ``mean_k(weights[k] * D_k)``, so all-ones weights reproduce the mean
    rule exactly.  The trimmed mean requires ``2 * trim`` fewer members
    than the stack holds.
    """
    if rule.kind is RuleKind.MAJORITY_VOTE:
        return majority_vote(members)
    stack = _stack(members)
    k = stack.shape[0]
    if rule.kind is RuleKind.MEAN:
        fused = _tree_mean(stack)
    elif rule.kind is RuleKind.PRODUCT:
        fused = np.prod(stack, axis=0)
    elif rule.kind is RuleKind.MEDIAN:
        fused = np.median(stack, axis=0)
    elif rule.kind is RuleKind.MIN:
        fused = np.min(stack, axis=0)
    elif rule.kind is RuleKind.MAX:
        fused = np.max(stack, axis=0)
    elif rule.kind is RuleKind.TRIMMED_MEAN:
        if 2 * rule.trim >= k:
            raise ConfigError(
                f"trimmed mean with trim={rule.trim} needs more than {2 * rule.trim} members"
            )
        fused = _tree_mean(np.sort(stack, axis=0)[rule.trim : k - rule.trim])
    elif rule.kind is RuleKind.WEIGHTED:
        if len(rule.weights) != k:
            raise ConfigError(f"{len(rule.weights)} weights for {k} members")
        w = np.array(rule.weights, dtype=np.float64)
        fused = _tree_mean(w[:, None, None] * stack)
    else:
        raise ConfigError(f"unknown rule {rule.kind!r}")
    return DistanceMatrix(
        fused, members[0].query_t_us, members[0].ref_t_us, f"{rule.kind.value}_of_{k}"
    )


def majority_vote(
    members: list[DistanceMatrix] | tuple[DistanceMatrix, ...]
) -> DistanceMatrix:
    """Vote matrix: 1 at each query's modal best-match column, 0 elsewhere.

    Every member casts one vote per query row (its argmin column, ties to
    the smallest index); the modal column wins, again with ties going to
    the smallest index.  Retrieval reads the single 1 per row, so treating
    the votes ``v`` as distances ``1 - v`` recovers ordinary evaluation.
    """
    if len(members) < 2:
        raise ConfigError("majority vote needs at least two members")
    stack = _stack(members)
    k, n_q, n_r = stack.shape
    votes = np.argmin(stack, axis=2)
    out = np.zeros((n_q, n_r), dtype=np.float64)
    for i in range(n_q):
        counts = np.bincount(votes[:, i], minlength=n_r)
        out[i, int(np.argmax(counts))] = 1.0
    return DistanceMatrix(
        out, members[0].query_t_us, members[0].ref_t_us, f"majority_vote_of_{k}"
    )


def votes_as_distances(votes: DistanceMatrix) -> DistanceMatrix:
    """Turn a vote matrix into a distance matrix (``1 - v``).

    The modal column of each row becomes that row's unique argmin, so the
    standard evaluators retrieve exactly the voted match.
    """
    return DistanceMatrix(
        1.0 - votes.values,
        votes.query_t_us,
        votes.ref_t_us,
        f"{votes.member_label}_as_distance",
    )


def approximate_combine(
    query: DescriptorSequence,
    references: list[DescriptorSequence] | tuple[DescriptorSequence, ...],
    metric: Metric,
) -> DistanceMatrix:
    """Mean-fused ensemble with a single query-side window family.

    Only one set of query descriptors is computed (typically from a
    mid-sized window); it is compared against every reference family and
    the resulting matrices are averaged.  Trades some accuracy for a
    ``k``-fold cheaper query side.
    """
    if len(references) < 1:
        raise ConfigError("approximate ensemble needs at least one reference member")
    members = [build_distance_matrix(query, ref, metric) for ref in references]
    fused = _tree_mean(_stack(members))
    return DistanceMatrix(
        fused,
        members[0].query_t_us,
        members[0].ref_t_us,
        f"approx_mean_of_{len(members)}",
    )


def cross_window_members(
    query_seqs: list[DescriptorSequence] | tuple[DescriptorSequence, ...],
    reference_seqs: list[DescriptorSequence] | tuple[DescriptorSequence, ...],
    metric: Metric,
) -> list[DistanceMatrix]:
    """The ``k * k`` member matrices of the cross-window ensemble.

    Every query family is compared against every reference family, pairing
    unequal window sizes on purpose: descriptors are rate-normalized, so
    cross-size comparisons are meaningful and add ensemble diversity.
    """
    if len(query_seqs) != len(reference_seqs) or len(query_seqs) < 1:
        raise ConfigError("cross-window ensemble needs equally many families per side")
    return [
        build_distance_matrix(q, r, metric)
        for q in query_seqs
        for r in reference_seqs
    ]


def cross_window_combine(
    query_seqs: list[DescriptorSequence] | tuple[DescriptorSequence, ...],
    reference_seqs: list[DescriptorSequence] | tuple[DescriptorSequence, ...],
    metric: Metric,
) -> DistanceMatrix:
    """Mean-fused cross-window ensemble over all ``k * k`` family pairs."""
    members = cross_window_members(query_seqs, reference_seqs, metric)
    fused = _tree_mean(_stack(members))
    return DistanceMatrix(
        fused,
        members[0].query_t_us,
        members[0].ref_t_us,
        f"cross_mean_of_{len(members)}",
    )


def enumerate_weight_grid(
    n_members: int, grid: tuple[float, ...] = DEFAULT_WEIGHT_GRID
) -> Iterator[tuple[float, ...]]:
    """Lazily yield every weight vector on a per-member grid.

    Vectors come out in lexicographic order of the grid, so the first is
    ``(grid[0],) * n_members``.  The full space has ``len(grid) **
    n_members`` entries; callers are expected to iterate, not materialize.
    """
    if n_members < 1:
        raise ConfigError(f"n_members must be >= 1, got {n_members}")
    if not grid or any(g <= 0 for g in grid):
        raise ConfigError("weight grid values must be positive")
    return itertools.product(*([tuple(float(g) for g in grid)] * n_members))


def weight_grid_search(
    members: list[DistanceMatrix] | tuple[DistanceMatrix, ...],
    ground_truth,
    loc_threshold_us: int | None = None,
    grid: tuple[float, ...] = DEFAULT_WEIGHT_GRID,
):
    """Yield ``(weights, EvalResult)`` for every weight vector on the grid.

    Evaluation is precision at full recall under ``loc_threshold_us``.
    Selection is left to the caller, who may prefer precision, sparsity,
    or any other tie-break.
    """
    from .evaluation import DEFAULT_LOC_THRESHOLD_US, precision_at_full_recall

    if loc_threshold_us is None:
        loc_threshold_us = DEFAULT_LOC_THRESHOLD_US
    for weights in enumerate_weight_grid(len(members), grid):
        fused = combine(members, EnsembleRule.weighted(weights))
        yield weights, precision_at_full_recall(fused, ground_truth, loc_threshold_us)
