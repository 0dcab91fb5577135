"""Command-line interface.

Subcommands:

* ``run``       process a capture file into map snapshots and a peaks log
* ``simulate``  render a synthetic scene into a capture file
* ``evaluate``  score run artifacts against ground truth
* ``plot``      draw per-stage scatter figures and the obstacle map

Exit codes: 0 success; 2 missing or unreadable file (argparse usage
errors also exit 2); 3 malformed or empty input data; 4 invalid
configuration.  The ``UWB_MAPPER_LOG`` environment variable sets the log
level (DEBUG, INFO, WARNING, ...).
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .capture import CaptureError, Channel, parse_capture_stream, write_captures_csv, \
    write_captures_jsonl
from .clustering import ClusterParams, load_cluster_overrides, read_snapshots
from .evaluation import (DEFAULT_MARGIN_CM, EvalError, EvalMode, evaluate,
                         combine_reports, format_table, load_truth,
                         write_report)
from .filtering import Material, load_filter_overrides, threshold_preset
from .geometry import Mount, geometry_preset, load_geometry_overrides
from .pipeline import (PipelineConfig, frames_from_peaks, read_peaks_jsonl,
                       run_stream, write_peaks_jsonl, write_snapshots_jsonl,
                       write_summary)
from .sim import load_scene, never_visible_obstacles, synth_scene_stream

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Bad parameters, scene or truth configuration."""


def _detect_format(path: str, explicit: str | None) -> str:
    if explicit:
        return explicit
    return "csv" if str(path).endswith(".csv") else "jsonl"


def _load_params_file(path) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parameters file {path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"parameters file {path}: expected a JSON object")
    return obj


def _pipeline_config(args, channel: Channel) -> tuple[PipelineConfig, ClusterParams]:
    fparams = threshold_preset(channel, Material(args.material))
    gparams = geometry_preset(channel)
    cparams = ClusterParams()
    mount = Mount()
    if args.params:
        overrides = _load_params_file(args.params)
        try:
            fparams = load_filter_overrides(fparams, overrides)
            gparams = load_geometry_overrides(gparams, overrides)
            cparams = load_cluster_overrides(cparams, overrides)
            if "mount" in overrides:
                m = overrides["mount"]
                mount = Mount(dx=float(m.get("dx", 0.0)),
                              dy=float(m.get("dy", 0.0)),
                              dyaw=float(m.get("dyaw", 0.0)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"parameters file {args.params}: {exc}") from None
    if args.baseline_in_delay is not None:
        gparams = replace(gparams, baseline_in_delay=args.baseline_in_delay == "true")
    cfg = PipelineConfig(filter_params=fparams, geometry=gparams, mount=mount,
                         refine=not args.no_subsample_refine,
                         all_survivors=args.all_survivors)
    return cfg, cparams


def cmd_run(args) -> int:
    captures = parse_capture_stream(args.input,
                                    fmt=_detect_format(args.input, args.format))
    first = next(captures, None)
    if first is None:
        print(f"error: {args.input}: no capture records", file=sys.stderr)
        return 3
    channel = Channel(int(args.channel)) if args.channel else first.channel
    cfg, cparams = _pipeline_config(args, channel)

    def stream():
        yield first
        yield from captures

    result = run_stream(stream(), cfg, cparams)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_snapshots_jsonl(result.snapshots, out_dir / "snapshots.jsonl")
    write_peaks_jsonl(result.records, out_dir / "peaks.jsonl")
    write_summary(result.summary, out_dir / "summary.json")
    s = result.summary
    print(f"frames={s['frames']} detections={s['detections']} "
          f"snapshots={s['snapshots']} mean_frame_ms={s['mean_frame_ms']:.3f} "
          f"(budget {s['frame_budget_ms']:.2f} ms) -> {out_dir}")
    return 0


def cmd_simulate(args) -> int:
    try:
        scene = load_scene(args.scene)
    except OSError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"scene file {args.scene}: {exc}") from None
    if args.seed is not None:
        scene.seed = args.seed
    for obs in never_visible_obstacles(scene):
        print(f"warning: obstacle {obs.label!r} at ({obs.x:g}, {obs.y:g}) "
              "never enters the capture window", file=sys.stderr)
    captures = synth_scene_stream(scene)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    if _detect_format(args.out, args.format) == "csv":
        n = write_captures_csv(captures, out)
    else:
        n = write_captures_jsonl(captures, out)
    if args.truth:
        truth = {"objects": [{"x": o.x, "y": o.y, "label": o.label}
                             for o in scene.obstacles]}
        with open(args.truth, "w") as fh:
            json.dump(truth, fh, indent=2)
            fh.write("\n")
    print(f"wrote {n} captures -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    try:
        truth = load_truth(args.truth)
    except OSError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"truth file {args.truth}: {exc}") from None
    mode = EvalMode(args.mode)
    if mode is EvalMode.CLUSTERS:
        snapshots = read_snapshots(args.input)
        if not snapshots:
            print(f"error: {args.input}: no map snapshots to evaluate",
                  file=sys.stderr)
            return 3
        if args.window == "final":
            snapshots = snapshots[-1:]
        reports = []
        for snap in snapshots:
            centroids = [tuple(c["centroid"]) for c in snap["clusters"]]
            reports.append(evaluate(centroids, truth, margin=args.margin,
                                    mode=mode))
        report = combine_reports(reports)
    else:
        records = read_peaks_jsonl(args.input)
        if not records:
            print(f"error: {args.input}: no frame records to evaluate",
                  file=sys.stderr)
            return 3
        report = evaluate(frames_from_peaks(records), truth,
                          margin=args.margin, mode=mode)

    out_dir = Path(args.out_dir)
    paths = write_report(report, out_dir)
    from .plots import render_cdf
    paths["figure"] = render_cdf(report.stats.cdf, out_dir / "cdf.svg")
    sys.stdout.write(format_table(report))
    print(f"report -> {out_dir}")
    return 0


def cmd_plot(args) -> int:
    snapshots = read_snapshots(args.snapshots)
    final = snapshots[-1] if snapshots else {"t_ms": 0, "clusters": [],
                                             "noise_count": 0}
    records = read_peaks_jsonl(args.peaks) if args.peaks else []
    from .plots import STAGES, render_map, render_stage

    stages = list(STAGES) + ["map"] if args.stage == "all" else [args.stage]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for stage in stages:
        if stage == "map":
            written.append(render_map(final, records, out_dir / "map.svg"))
        else:
            if not records:
                if args.stage != "all":
                    print("error: stage figures need --peaks PEAKS_JSONL",
                          file=sys.stderr)
                    return 4
                continue
            written.append(render_stage(records, stage,
                                        out_dir / f"stage_{stage}.svg"))
    print("wrote " + " ".join(str(p) for p in written))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uwb-mapper",
        description="Obstacle mapping from UWB radar channel impulse responses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="process captures into an obstacle map")
    run.add_argument("input", help="capture file (JSONL or CSV)")
    run.add_argument("--format", choices=["jsonl", "csv"])
    run.add_argument("--channel", choices=["5", "9"],
                     help="radio channel presets (default: from the stream)")
    run.add_argument("--material", default="overall",
                     choices=[m.value for m in Material],
                     help="threshold preset row (default: overall)")
    run.add_argument("--params", help="JSON parameters file with overrides")
    run.add_argument("--all-survivors", action="store_true",
                     help="emit every filter survivor, not just the strongest")
    run.add_argument("--no-subsample-refine", action="store_true",
                     help="keep integer peak positions")
    run.add_argument("--baseline-in-delay", choices=["true", "false"],
                     help="delays are measured from the first path (default true)")
    run.add_argument("--out-dir", default="out")
    run.set_defaults(func=cmd_run)

    simulate = sub.add_parser("simulate", help="render a synthetic scene")
    simulate.add_argument("scene", help="scene JSON file")
    simulate.add_argument("--out", default="captures.jsonl")
    simulate.add_argument("--format", choices=["jsonl", "csv"])
    simulate.add_argument("--seed", type=int, help="override the scene seed")
    simulate.add_argument("--truth", help="also write a ground-truth JSON here")
    simulate.set_defaults(func=cmd_simulate)

    ev = sub.add_parser("evaluate", help="score run artifacts against truth")
    ev.add_argument("input", help="snapshots JSONL (clusters) or peaks JSONL (frames)")
    ev.add_argument("truth", help="ground-truth JSON file")
    ev.add_argument("--mode", default="clusters",
                    choices=[m.value for m in EvalMode])
    ev.add_argument("--margin", type=float, default=DEFAULT_MARGIN_CM,
                    help="true-positive distance margin in cm")
    ev.add_argument("--window", default="final", choices=["final", "each"],
                    help="clusters mode: score the final snapshot or every one")
    ev.add_argument("--out-dir", default="eval")
    ev.set_defaults(func=cmd_evaluate)

    plot = sub.add_parser("plot", help="render stage figures and the map")
    plot.add_argument("snapshots", help="snapshots JSONL from a run")
    plot.add_argument("--peaks", help="peaks JSONL from the same run")
    plot.add_argument("--stage", default="all",
                      choices=["raw", "filtered", "pdoa", "aoa", "map", "all"])
    plot.add_argument("--out-dir", default="plots")
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=os.environ.get("UWB_MAPPER_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        name = exc.filename if exc.filename else exc
        print(f"error: missing file: {name}", file=sys.stderr)
        return 2
    except IsADirectoryError as exc:
        print(f"error: {exc.filename} is a directory", file=sys.stderr)
        return 2
    except (ConfigError, EvalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (CaptureError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
