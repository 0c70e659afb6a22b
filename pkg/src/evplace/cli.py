"""Command-line pipeline driver.

Eight subcommands cover the pipeline end to end: ``filter`` and ``synth``
produce event streams, ``windows``/``describe``/``distance``/``ensemble``/
``evaluate`` run single stages, and ``run`` chains everything from inputs
to evaluation.  Every command validates its configuration before touching
data, writes its outputs into ``--output`` together with a
``manifest.json`` recording the resolved config plus SHA-256 digests of
all inputs, and exits non-zero with a stage-tagged message on failure.

Config values come from built-in defaults, overridden by ``--config
file.json``, overridden again by repeatable ``--set key.path=value``
flags.  Set ``EVPLACE_LOG=info`` (or ``debug``) for progress logging.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import re
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, load_config
from .descriptors import describe_window_set, load_descriptors, write_descriptors
from .distance import (
    DistanceMatrix,
    build_distance_matrix,
    read_matrix_csv,
    write_matrix_csv,
)
from .ensemble import RuleKind, combine, votes_as_distances
from .errors import ConfigError, EvPlaceError
from .evaluation import (
    EvalResult,
    default_similarity_sweep,
    interpolate_ground_truth,
    precision_at_full_recall,
    precision_recall_curve,
    read_ground_truth_csv,
    write_eval_results_csv,
    write_ground_truth_csv,
)
from .events import filter_bursts, parse_event_csv, remove_hot_pixels, write_event_csv
from .pipeline import PipelineResult, run_from_sequences, run_place_recognition
from .synthetic import generate_traverse, generate_world, pair_ground_truth
from .windowing import build_window_set, sample_grid

logger = logging.getLogger(__name__)


class StageError(EvPlaceError):
    """An error annotated with the pipeline stage it occurred in."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"[{stage}] {error}")
        self.stage = stage


@contextmanager
def _stage(name: str):
    logger.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except (EvPlaceError, OSError, ValueError) as e:
        raise StageError(name, e) from e


def _configure_logging() -> None:
    level = os.environ.get("EVPLACE_LOG", "warning").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text)


def _stem(path: str) -> str:
    return _slug(Path(path).stem)


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _prepare(output: str) -> tuple[Path, list[str], dict]:
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    return out, [], {}


def _ingest(inputs: dict, role: str, path: str) -> bytes:
    """Read an input file, recording its digest for the manifest."""
    data = Path(path).read_bytes()
    entry = {"file": Path(path).name, "sha256": hashlib.sha256(data).hexdigest()}
    if role in inputs:
        # repeated roles (descriptor file lists) become numbered entries
        suffix = 2
        while f"{role}_{suffix}" in inputs:
            suffix += 1
        role = f"{role}_{suffix}"
    inputs[role] = entry
    return data


def _write(out: Path, name: str, data: bytes, outputs: list[str]) -> None:
    (out / name).write_bytes(data)
    outputs.append(name)


def _manifest(
    out: Path,
    command: str,
    cfg: PipelineConfig,
    inputs: dict,
    outputs: list[str],
    notes: dict | None = None,
) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg.resolved,
        "inputs": inputs,
        "outputs": sorted(outputs),
    }
    if notes:
        manifest["notes"] = notes
    (out / "manifest.json").write_bytes(_json_bytes(manifest))


def _load_stream(args_path: str, cfg: PipelineConfig, inputs: dict, role: str):
    data = _ingest(inputs, role, args_path)
    return parse_event_csv(data, cfg.geometry)


def _apply_filters(stream, cfg: PipelineConfig):
    """Run the enabled denoising filters, returning the stream and a report."""
    report = {}
    if cfg.hot_pixels_enabled:
        with _stage("hot-pixels"):
            n_before = len(stream)
            stream, flagged = remove_hot_pixels(stream, cfg.hot_pixels_sigma)
            report["hot_pixels"] = {
                "sigma": cfg.hot_pixels_sigma,
                "flagged": [[int(x), int(y)] for x, y in flagged],
                "events_removed": n_before - len(stream),
            }
    if cfg.bursts_enabled:
        with _stage("bursts"):
            n_before = len(stream)
            stream = filter_bursts(stream, cfg.burst_bin_us, cfg.burst_fraction)
            report["bursts"] = {
                "bin_us": cfg.burst_bin_us,
                "fraction": cfg.burst_fraction,
                "events_removed": n_before - len(stream),
            }
    return stream, report


def _eval_summary(label: str, result: EvalResult) -> dict:
    return {
        "label": label,
        "precision": result.precision,
        "tp": result.tp,
        "fp": result.fp,
        "total_queries": result.total_queries,
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_filter(args) -> int:
    with _stage("config"):
        cfg = load_config(args.config, args.set)
    out, outputs, inputs = _prepare(args.output)
    with _stage("read-events"):
        stream = _load_stream(args.events, cfg, inputs, "events")
    n_in = len(stream)
    stream, report = _apply_filters(stream, cfg)
    with _stage("write"):
        _write(out, "filtered.csv", write_event_csv(stream), outputs)
        report = {"events_in": n_in, "events_out": len(stream), **report}
        _write(out, "filter_report.json", _json_bytes(report), outputs)
        _manifest(out, "filter", cfg, inputs, outputs)
    return 0


def cmd_synth(args) -> int:
    with _stage("config"):
        cfg = load_config(args.config, args.set)
        if cfg.synthetic is None:
            raise ConfigError("synth needs a config with a 'synthetic' section")
    out, outputs, inputs = _prepare(args.output)
    s = cfg.synthetic
    with _stage("generate"):
        world = generate_world(s.world_seed, s.n_places, cfg.geometry, s.segments_per_place)
        ref_stream, ref_gt = generate_traverse(world, s.reference)
        q_stream, q_gt = generate_traverse(world, s.query)
        anchors = pair_ground_truth(q_gt, ref_gt)
    with _stage("write"):
        _write(out, "reference_events.csv", write_event_csv(ref_stream), outputs)
        _write(out, "query_events.csv", write_event_csv(q_stream), outputs)
        _write(out, "ground_truth.csv", write_ground_truth_csv(anchors), outputs)
        _manifest(
            out,
            "synth",
            cfg,
            inputs,
            outputs,
            notes={
                "places": s.n_places,
                "reference_events": len(ref_stream),
                "query_events": len(q_stream),
            },
        )
    return 0


def cmd_windows(args) -> int:
    with _stage("config"):
        cfg = load_config(args.config, args.set)
    out, outputs, inputs = _prepare(args.output)
    with _stage("read-events"):
        stream = _load_stream(args.events, cfg, inputs, "events")
    with _stage("windowing"):
        wset = build_window_set(stream, cfg.counts, cfg.spans_us)
        lines = ["family,index,start_idx,end_idx,t_start_us,t_end_us,n_events"]
        for fam in wset.families:
            for i, w in enumerate(fam.windows):
                lines.append(
                    f"{fam.label},{i},{w.start_idx},{w.end_idx},"
                    f"{w.t_start_us},{w.t_end_us},{w.n_events}"
                )
    with _stage("write"):
        _write(out, "windows.csv", ("\n".join(lines) + "\n").encode("utf-8"), outputs)
        _manifest(out, "windows", cfg, inputs, outputs)
    return 0


def cmd_describe(args) -> int:
    with _stage("config"):
        cfg = load_config(args.config, args.set)
    out, outputs, inputs = _prepare(args.output)
    with _stage("read-events"):
        stream = _load_stream(args.events, cfg, inputs, "events")
    with _stage("describe"):
        grid = sample_grid(stream, cfg.grid_dt_us)
        wset = build_window_set(stream, cfg.counts, cfg.spans_us)
        seqs = describe_window_set(wset, stream, grid, cfg.descriptor)
    with _stage("write"):
        for seq in seqs:
            _write(out, f"descriptors_{_slug(seq.label)}.csv", write_descriptors(seq), outputs)
        _manifest(out, "describe", cfg, inputs, outputs)
    return 0


def cmd_distance(args) -> int:
    with _stage("config"):
        cfg = load_config(args.config, args.set)
    out, outputs, inputs = _prepare(args.output)
    with _stage("read-descriptors"):
        q_seq = load_descriptors(_ingest(inputs, "query", args.query), _stem(args.query))
        r_seq = load_descriptors(
            _ingest(inputs, "reference", args.reference), _stem(args.reference)
        )
    with _stage("distance"):
        matrix = build_distance_matrix(q_seq, r_seq, cfg.metric)
    with _stage("write"):
        _write(out, "distance.csv", write_matrix_csv(matrix), outputs)
        _manifest(out, "distance", cfg, inputs, outputs, notes={"label": matrix.member_label})
    return 0


def cmd_ensemble(args) -> int:
    with _stage("config"):
        cfg = load_config(args.config, args.set)
    out, outputs, inputs = _prepare(args.output)
    with _stage("read-matrices"):
        members = [
            read_matrix_csv(_ingest(inputs, "member", path), _stem(path))
            for path in args.members
        ]
    with _stage("combine"):
        fused = combine(members, cfg.rule)
    with _stage("write"):
        _write(out, "ensemble.csv", write_matrix_csv(fused), outputs)
        if cfg.rule.kind is RuleKind.MAJORITY_VOTE:
            # votes count agreement; also emit the distance-like flip
            _write(
                out,
                "ensemble_distances.csv",
                write_matrix_csv(votes_as_distances(fused)),
                outputs,
            )
        _manifest(out, "ensemble", cfg, inputs, outputs, notes={"label": fused.member_label})
    return 0


def _restrict_to_ground_truth(matrix: DistanceMatrix, anchors) -> tuple[DistanceMatrix, object, int]:
    """Interpolate truth onto the matrix's query times, dropping uncovered rows."""
    gt = interpolate_ground_truth(anchors, matrix.query_t_us)
    keep = np.isin(matrix.query_t_us.astype(np.float64), gt.query_t_us)
    dropped = int(matrix.n_queries - keep.sum())
    if dropped:
        matrix = DistanceMatrix(
            matrix.values[keep], matrix.query_t_us[keep], matrix.ref_t_us, matrix.member_label
        )
    return matrix, gt, dropped


def cmd_evaluate(args) -> int:
    with _stage("config"):
        cfg = load_config(args.config, args.set)
    out, outputs, inputs = _prepare(args.output)
    with _stage("read-inputs"):
        matrix = read_matrix_csv(_ingest(inputs, "matrix", args.matrix), _stem(args.matrix))
        anchors = read_ground_truth_csv(_ingest(inputs, "ground_truth", args.gt))
    with _stage("evaluate"):
        matrix, gt, dropped = _restrict_to_ground_truth(matrix, anchors)
        full = precision_at_full_recall(matrix, gt, cfg.loc_threshold_us)
        sweep = cfg.sweep_values
        if sweep is None:
            sweep = default_similarity_sweep(matrix, cfg.sweep_points)
        curve = precision_recall_curve(matrix, gt, cfg.loc_threshold_us, sweep)
    with _stage("write"):
        _write(out, "eval.csv", write_eval_results_csv([full]), outputs)
        _write(out, "pr.csv", write_eval_results_csv(curve), outputs)
        _manifest(
            out,
            "evaluate",
            cfg,
            inputs,
            outputs,
            notes={"dropped_queries": dropped, "precision": full.precision},
        )
    return 0


def _write_run_outputs(
    out: Path, outputs: list[str], cfg: PipelineConfig, result: PipelineResult
) -> None:
    for matrix, ev in zip(result.members, result.member_evals):
        slug = _slug(matrix.member_label)
        _write(out, f"dist_{slug}.csv", write_matrix_csv(matrix), outputs)
        _write(out, f"eval_{slug}.csv", write_eval_results_csv([ev]), outputs)

    fused = result.fused
    fused_slug = _slug(fused.member_label)
    _write(out, f"dist_{fused_slug}.csv", write_matrix_csv(fused), outputs)
    _write(out, f"eval_{fused_slug}.csv", write_eval_results_csv([result.fused_eval]), outputs)
    fused_dist = (
        votes_as_distances(fused) if cfg.rule.kind is RuleKind.MAJORITY_VOTE else fused
    )
    sweep = cfg.sweep_values
    if sweep is None:
        sweep = default_similarity_sweep(fused_dist, cfg.sweep_points)
    curve = precision_recall_curve(fused_dist, result.ground_truth, cfg.loc_threshold_us, sweep)
    _write(out, f"pr_{fused_slug}.csv", write_eval_results_csv(curve), outputs)

    if result.approximate is not None:
        slug = _slug(result.approximate.member_label)
        _write(out, f"dist_{slug}.csv", write_matrix_csv(result.approximate), outputs)
        _write(
            out, f"eval_{slug}.csv", write_eval_results_csv([result.approximate_eval]), outputs
        )

    summary = {
        "members": [
            _eval_summary(m.member_label, ev)
            for m, ev in zip(result.members, result.member_evals)
        ],
        "fused": _eval_summary(fused.member_label, result.fused_eval),
        "approximate": (
            _eval_summary(result.approximate.member_label, result.approximate_eval)
            if result.approximate is not None
            else None
        ),
        "dropped_grid_points": result.dropped_grid_points,
        "loc_threshold_us": cfg.loc_threshold_us,
    }
    _write(out, "summary.json", _json_bytes(summary), outputs)


def cmd_run(args) -> int:
    with _stage("config"):
        cfg = load_config(args.config, args.set)
        event_mode = args.query is not None or args.reference is not None
        desc_mode = bool(args.query_descriptors) or bool(args.reference_descriptors)
        if event_mode and (args.query is None or args.reference is None):
            raise ConfigError("--query and --reference go together")
        if desc_mode and not (args.query_descriptors and args.reference_descriptors):
            raise ConfigError("--query-descriptors and --reference-descriptors go together")
        if event_mode == desc_mode:
            raise ConfigError("pass either event CSVs or descriptor CSVs, not both")
    out, outputs, inputs = _prepare(args.output)
    with _stage("read-ground-truth"):
        anchors = read_ground_truth_csv(_ingest(inputs, "ground_truth", args.gt))

    if event_mode:
        with _stage("read-events"):
            q_stream = _load_stream(args.query, cfg, inputs, "query")
            r_stream = _load_stream(args.reference, cfg, inputs, "reference")
        q_stream, _ = _apply_filters(q_stream, cfg)
        r_stream, _ = _apply_filters(r_stream, cfg)
        with _stage("pipeline"):
            result = run_place_recognition(
                q_stream,
                r_stream,
                anchors,
                counts=cfg.counts,
                spans_us=cfg.spans_us,
                descriptor=cfg.descriptor,
                metric=cfg.metric,
                rule=cfg.rule,
                grid_dt_us=cfg.grid_dt_us,
                loc_threshold_us=cfg.loc_threshold_us,
                approximate_fraction=cfg.approximate_fraction,
            )
    else:
        with _stage("read-descriptors"):
            q_seqs = [
                load_descriptors(_ingest(inputs, "query_descriptors", p), _stem(p))
                for p in args.query_descriptors
            ]
            r_seqs = [
                load_descriptors(_ingest(inputs, "reference_descriptors", p), _stem(p))
                for p in args.reference_descriptors
            ]
        if cfg.approximate_fraction is not None:
            logger.warning("approximate ensemble needs event inputs; skipping it")
        with _stage("pipeline"):
            result = run_from_sequences(
                q_seqs,
                r_seqs,
                anchors,
                metric=cfg.metric,
                rule=cfg.rule,
                loc_threshold_us=cfg.loc_threshold_us,
            )

    with _stage("write"):
        _write_run_outputs(out, outputs, cfg, result)
        _manifest(
            out,
            "run",
            cfg,
            inputs,
            outputs,
            notes={"dropped_grid_points": result.dropped_grid_points},
        )
    print(f"fused {result.fused.member_label}: precision {result.fused_eval.precision:.4f}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY.PATH=VALUE",
        help="override one config value (JSON-parsed; repeatable; wins over --config)",
    )
    p.add_argument("-o", "--output", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evplace",
        description="Ensemble place recognition for event cameras.",
    )
    parser.add_argument("--version", action="version", version=f"evplace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="denoise an event CSV (hot pixels, bursts)")
    _add_common(p)
    p.add_argument("--events", required=True, help="input event CSV (t,x,y,p)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("synth", help="generate a seeded synthetic query/reference pair")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("windows", help="list the temporal windows of every family")
    _add_common(p)
    p.add_argument("--events", required=True, help="input event CSV (t,x,y,p)")
    p.set_defaults(func=cmd_windows)

    p = sub.add_parser("describe", help="compute descriptor sequences per window family")
    _add_common(p)
    p.add_argument("--events", required=True, help="input event CSV (t,x,y,p)")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("distance", help="distance matrix between two descriptor CSVs")
    _add_common(p)
    p.add_argument("--query", required=True, help="query descriptor CSV")
    p.add_argument("--reference", required=True, help="reference descriptor CSV")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("ensemble", help="fuse member distance matrices with a rule")
    _add_common(p)
    p.add_argument("--members", required=True, nargs="+", help="member matrix CSVs")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("evaluate", help="score a distance matrix against ground truth")
    _add_common(p)
    p.add_argument("--matrix", required=True, help="distance matrix CSV")
    p.add_argument("--gt", required=True, help="ground truth CSV (t_query_s,t_ref_s)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline: filter, window, describe, fuse, evaluate")
    _add_common(p)
    p.add_argument("--query", help="query event CSV")
    p.add_argument("--reference", help="reference event CSV")
    p.add_argument("--query-descriptors", nargs="+", help="precomputed query descriptor CSVs")
    p.add_argument(
        "--reference-descriptors", nargs="+", help="precomputed reference descriptor CSVs"
    )
    p.add_argument("--gt", required=True, help="ground truth CSV (t_query_s,t_ref_s)")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as e:
        print(f"evplace {args.command}: error {e}", file=sys.stderr)
        return 1
    except EvPlaceError as e:
        print(f"evplace {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
