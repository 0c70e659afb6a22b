"""The headline effect on the committed synthetic benchmark.

Runs the full pipeline on the repository's default synthetic config: two
traverses of a 40-place route under different conditions, nine window
families, mean-rule fusion.  The fused ensemble matches or beats its best
member, and the cheap approximate variant (single query-side family)
lands between the member average and the full ensemble.
"""

from pathlib import Path

from evplace.config import load_config
from evplace.synthetic import generate_world, run_synthetic_experiment

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "synthetic-default.json"


def main():
    cfg = load_config(str(CONFIG))
    syn = cfg.synthetic
    print(f"route: {syn.n_places} places, reference noise "
          f"{syn.reference.noise_rate}, query noise {syn.query.noise_rate} "
          f"with {syn.query.dropout:.0%} dropout")

    world = generate_world(syn.world_seed, syn.n_places, cfg.geometry,
                           syn.segments_per_place)
    res = run_synthetic_experiment(
        world, syn.reference, syn.query,
        counts=cfg.counts, spans_us=cfg.spans_us,
        descriptor=cfg.descriptor, metric=cfg.metric, rule=cfg.rule,
        grid_dt_us=cfg.grid_dt_us, loc_threshold_us=cfg.loc_threshold_us,
        approximate_fraction=cfg.approximate_fraction,
    )

    print(f"\nprecision at full recall, {len(res.members)} members:")
    for m, e in zip(res.members, res.member_evals):
        bar = "#" * round(40 * e.precision)
        print(f"  {m.member_label:>14}: {e.precision:6.4f} {bar}")

    member_mean = sum(res.member_precisions) / len(res.member_precisions)
    print(f"\n  {'member mean':>14}: {member_mean:6.4f}")
    print(f"  {res.approximate.member_label:>14}: "
          f"{res.approximate_eval.precision:6.4f}")
    print(f"  {res.fused.member_label:>14}: {res.fused_eval.precision:6.4f}")

    best = max(res.member_precisions)
    print(f"\nfused >= best member: {res.fused_eval.precision >= best}")
    print("approximate between member mean and fused: "
          f"{member_mean <= res.approximate_eval.precision <= res.fused_eval.precision}")


if __name__ == "__main__":
    main()
