"""Synthetic world generation, traverse statistics, and structural claims."""

from __future__ import annotations

import numpy as np
import pytest

from evplace.descriptors import AccumulationMode, DescriptorParams
from evplace.errors import ConfigError
from evplace.events import SensorGeometry
from evplace.synthetic import (
    EDGE_RATE,
    SyntheticWorld,
    TraverseParams,
    generate_traverse,
    generate_world,
    pair_ground_truth,
    run_synthetic_experiment,
)

GEOM = SensorGeometry(16, 12)


def _stream_key(stream):
    return (
        stream.t.tobytes(),
        stream.x.tobytes(),
        stream.y.tobytes(),
        stream.p.tobytes(),
    )


# ---------------------------------------------------------------------------
# worlds


def test_world_same_seed_is_identical():
    a = generate_world(7, 4, GEOM)
    b = generate_world(7, 4, GEOM)
    np.testing.assert_array_equal(a.place_patterns, b.place_patterns)


def test_world_different_seeds_differ():
    a = generate_world(7, 4, GEOM)
    b = generate_world(8, 4, GEOM)
    assert not np.array_equal(a.place_patterns, b.place_patterns)


def test_world_minimal_two_places():
    w = generate_world(3, 2, SensorGeometry(8, 8))
    assert w.place_patterns.shape == (2, 8, 8)
    assert not np.array_equal(w.place_patterns[0], w.place_patterns[1])


def test_world_patterns_are_edge_rate_or_zero():
    w = generate_world(11, 3, GEOM)
    values = np.unique(w.place_patterns)
    assert set(values.tolist()) <= {0.0, EDGE_RATE}
    assert EDGE_RATE in values  # every place rasterizes at least one segment


def test_world_rejects_single_place():
    with pytest.raises(ConfigError):
        generate_world(1, 1, GEOM)


def test_world_type_rejects_duplicate_patterns():
    pat = np.zeros((2, 12, 16))
    pat[:, 0, 0] = EDGE_RATE
    with pytest.raises(ConfigError):
        SyntheticWorld(0, 2, GEOM, pat)


def test_world_type_rejects_negative_intensity():
    pat = np.zeros((2, 12, 16))
    pat[0, 0, 0] = -1.0
    pat[1, 0, 0] = 1.0
    with pytest.raises(ConfigError):
        SyntheticWorld(0, 2, GEOM, pat)


# ---------------------------------------------------------------------------
# traverses


def test_traverse_same_seed_is_identical():
    w = generate_world(5, 3, GEOM)
    p = TraverseParams(seed=42, noise_rate=5.0)
    s1, g1 = generate_traverse(w, p)
    s2, g2 = generate_traverse(w, p)
    assert _stream_key(s1) == _stream_key(s2)
    np.testing.assert_array_equal(g1.query_t_us, g2.query_t_us)


def test_traverse_zero_rates_is_empty():
    w = generate_world(5, 3, GEOM)
    pat = np.zeros_like(w.place_patterns)
    pat[0, 0, 0] = 1e-12
    pat[1, 0, 1] = 1e-12
    pat[2, 0, 2] = 1e-12  # effectively zero but pairwise distinct
    quiet = SyntheticWorld(5, 3, GEOM, pat)
    stream, gt = generate_traverse(quiet, TraverseParams(seed=1))
    assert len(stream) == 0
    assert len(gt) == 3


def test_traverse_ground_truth_anchors_place_centers():
    w = generate_world(5, 4, GEOM)
    _, gt = generate_traverse(w, TraverseParams(seed=1, dwell_s=2.0))
    np.testing.assert_array_equal(
        gt.query_t_us, [1_000_000.0, 3_000_000.0, 5_000_000.0, 7_000_000.0]
    )
    np.testing.assert_array_equal(gt.query_t_us, gt.ref_t_us)


def test_traverse_event_count_within_poisson_bounds():
    w = generate_world(13, 3, GEOM)
    params = TraverseParams(seed=99, dwell_s=1.5, rate_scale=0.8, noise_rate=2.0)
    stream, _ = generate_traverse(w, params)
    lam = (params.rate_scale * w.place_patterns + params.noise_rate).sum() * params.dwell_s
    assert abs(len(stream) - lam) <= 3.0 * np.sqrt(lam)


def test_traverse_event_count_scales_with_dropout():
    w = generate_world(13, 3, GEOM)
    base = TraverseParams(seed=99, noise_rate=20.0)
    half = TraverseParams(seed=99, noise_rate=20.0, dropout=0.5)
    s_base, _ = generate_traverse(w, base)
    s_half, _ = generate_traverse(w, half)
    assert len(s_base) >= 10_000
    ratio = len(s_half) / len(s_base)
    assert 0.45 <= ratio <= 0.55  # binomial thinning, ±10%


def test_dropout_yields_subsequence_of_undropped_stream():
    w = generate_world(17, 3, GEOM)
    base = TraverseParams(seed=7, noise_rate=10.0)
    thinned = TraverseParams(seed=7, noise_rate=10.0, dropout=0.3)
    s_full, _ = generate_traverse(w, base)
    s_thin, _ = generate_traverse(w, thinned)
    # same seed draws the same events; dropout only masks some out, so the
    # thinned (t, x, y, p) rows must all appear in the full stream in order
    full = list(zip(s_full.t, s_full.x, s_full.y, s_full.p))
    thin = list(zip(s_thin.t, s_thin.x, s_thin.y, s_thin.p))
    it = iter(full)
    assert all(row in it for row in thin)


def test_traverse_respects_stream_invariants():
    w = generate_world(19, 4, GEOM)
    stream, _ = generate_traverse(w, TraverseParams(seed=3, noise_rate=1.0))
    assert np.all(np.diff(stream.t) >= 0)
    assert stream.x.min() >= 0 and stream.x.max() < GEOM.width
    assert stream.y.min() >= 0 and stream.y.max() < GEOM.height
    assert set(np.unique(stream.p).tolist()) <= {-1, 1}
    # events stay inside their place's dwell slot
    slot = stream.t // 1_000_000
    assert slot.min() >= 0 and slot.max() < 4


def test_pair_ground_truth_uses_each_timeline():
    w = generate_world(5, 3, GEOM)
    _, gt_q = generate_traverse(w, TraverseParams(seed=1, dwell_s=1.0))
    _, gt_r = generate_traverse(w, TraverseParams(seed=2, dwell_s=2.0))
    paired = pair_ground_truth(gt_q, gt_r)
    np.testing.assert_array_equal(paired.query_t_us, [500_000, 1_500_000, 2_500_000])
    np.testing.assert_array_equal(paired.ref_t_us, [1_000_000, 3_000_000, 5_000_000])


def test_pair_ground_truth_length_mismatch():
    w3 = generate_world(5, 3, GEOM)
    w4 = generate_world(5, 4, GEOM)
    _, g3 = generate_traverse(w3, TraverseParams(seed=1))
    _, g4 = generate_traverse(w4, TraverseParams(seed=1))
    with pytest.raises(ConfigError):
        pair_ground_truth(g3, g4)


def test_traverse_params_validation():
    for bad in (
        dict(dwell_s=0.0),
        dict(rate_scale=0.0),
        dict(noise_rate=-1.0),
        dict(dropout=1.0),
        dict(dropout=-0.1),
    ):
        with pytest.raises(ConfigError):
            TraverseParams(seed=0, **bad)


# ---------------------------------------------------------------------------
# end-to-end experiments


def _experiment(**kwargs):
    w = generate_world(23, 6, GEOM)
    defaults = dict(
        counts=[0.3, 0.6],
        spans_us=[400_000, 700_000],
        descriptor=DescriptorParams(
            mode=AccumulationMode.COUNT, down_width=8, down_height=6, patch=2
        ),
        grid_dt_us=500_000,
        loc_threshold_us=900_000,
    )
    defaults.update(kwargs)
    return w, defaults


def test_identical_traverses_score_one():
    w, kw = _experiment()
    p = TraverseParams(seed=31, noise_rate=3.0)
    result = run_synthetic_experiment(w, p, p, **kw)
    assert result.fused_eval.precision == 1.0
    assert result.approximate_eval.precision == 1.0
    assert all(p == 1.0 for p in result.member_precisions)


def test_single_family_ensemble_is_that_member():
    # empty span list means no span families; None would mean the defaults
    w, kw = _experiment(counts=[0.5], spans_us=[], approximate_fraction=None)
    ref = TraverseParams(seed=31, noise_rate=3.0)
    qry = TraverseParams(seed=37, noise_rate=4.0, dropout=0.1)
    result = run_synthetic_experiment(w, ref, qry, **kw)
    assert len(result.members) == 1
    assert np.array_equal(result.fused.values, result.members[0].values)
    assert result.fused_eval.precision == result.member_evals[0].precision
    assert result.approximate is None


def test_noisy_recovery_beats_chance():
    w, kw = _experiment()
    ref = TraverseParams(seed=41, noise_rate=4.0)
    qry = TraverseParams(seed=43, rate_scale=0.8, noise_rate=8.0, dropout=0.2)
    result = run_synthetic_experiment(w, ref, qry, **kw)
    assert result.fused_eval.precision > 1.0 / 6  # chance = 1/n_places
