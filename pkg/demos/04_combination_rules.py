"""Every way to fuse member distance matrices into one.

Three hand-made 1x4 members make the rules easy to read: two members
agree that reference 1 is the match, the third is an outlier that pulls
toward reference 3.  Robust rules shrug the outlier off.
"""

import numpy as np

from evplace.distance import DistanceMatrix
from evplace.ensemble import EnsembleRule, RuleKind, combine, votes_as_distances

QT = np.array([0], dtype=np.int64)
RT = np.arange(4, dtype=np.int64) * 1_000_000


def member(values, label):
    return DistanceMatrix(np.array([values]), QT, RT, label)


def main():
    members = [
        member([0.9, 0.1, 0.8, 0.7], "a"),
        member([0.8, 0.2, 0.9, 0.6], "b"),
        member([0.9, 0.9, 0.8, 0.1], "outlier"),
    ]
    print("member rows (one query, four references):")
    for m in members:
        print(f"  {m.member_label:>8}: {m.values[0]}")

    rules = [
        EnsembleRule.mean(),
        EnsembleRule.product(),
        EnsembleRule.median(),
        EnsembleRule.minimum(),
        EnsembleRule.maximum(),
        EnsembleRule.trimmed_mean(1),
        EnsembleRule.weighted((1.5, 1.0, 0.5)),
        EnsembleRule.majority_vote(),
    ]
    print("\nfused rows (* marks the retrieved reference):")
    for rule in rules:
        fused = combine(members, rule)
        row = fused.values[0]
        # Vote rows score agreement, so retrieval takes the maximum there.
        if rule.kind is RuleKind.MAJORITY_VOTE:
            pick = int(np.argmax(row))
        else:
            pick = int(np.argmin(row))
        cells = " ".join(
            f"{v:.3f}{'*' if j == pick else ' '}" for j, v in enumerate(row)
        )
        print(f"  {fused.member_label:>22}: {cells}")

    # Vote matrices hold agreement scores; flip them to reuse the
    # distance-based evaluation unchanged.
    votes = combine(members, EnsembleRule.majority_vote())
    print(f"\nvotes as distances: {votes_as_distances(votes).values[0]}")

    # Unit weights reduce the weighted rule to the plain mean, bit for bit.
    unit = combine(members, EnsembleRule.weighted((1.0, 1.0, 1.0)))
    mean = combine(members, EnsembleRule.mean())
    print(f"weighted(1,1,1) == mean: {np.array_equal(unit.values, mean.values)}")


if __name__ == "__main__":
    main()
