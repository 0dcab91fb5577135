"""Detection quality against ground truth.

Two protocols are supported, mirroring how the pipeline is normally
inspected:

* ``frames`` mode scores one range estimate per frame against the true
  receiver-to-obstacle distance at that frame (angle ignored).
* ``clusters`` mode scores map-level cluster centroids against surveyed
  obstacle coordinates; each truth object that no centroid comes close
  to counts one miss per evaluation window.

A detection within ``margin`` centimetres of truth is a true positive.
Distance statistics are taken over the matched absolute errors: MAE,
population standard deviation, and percentiles by linear interpolation
on the sorted list.
"""

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

DEFAULT_MARGIN_CM = 20.0


class EvalError(ValueError):
    """The evaluation inputs cannot be scored (for example empty truth)."""


class EvalMode(str, Enum):
    FRAMES = "frames"
    CLUSTERS = "clusters"


@dataclass(frozen=True)
class TruthObject:
    x: float
    y: float
    label: str = ""


@dataclass
class GroundTruth:
    """Surveyed obstacle positions, plus optional per-frame true ranges."""

    objects: list[TruthObject]
    frame_ranges: dict[int, float] | None = None

    def range_at(self, t_ms: int, rx_xy: tuple[float, float] | None) -> float:
        """True receiver-to-obstacle range for one frame.

        Prefers an explicit per-frame table; otherwise derives the range
        to the nearest object from the logged receiver position.
        """
        if self.frame_ranges is not None and t_ms in self.frame_ranges:
            return self.frame_ranges[t_ms]
        if not self.objects or rx_xy is None:
            raise EvalError(f"no truth range available for frame t={t_ms} ms")
        return min(math.hypot(o.x - rx_xy[0], o.y - rx_xy[1]) for o in self.objects)


@dataclass(frozen=True)
class FrameDetection:
    """Per-frame pipeline output for frames-mode scoring."""

    t_ms: int
    range_cm: float | None
    rx_xy: tuple[float, float] | None = None


@dataclass
class MatchResult:
    tp: int
    fp: int
    fn: int
    errors: list[float]


def load_truth(source) -> GroundTruth:
    """Read ground truth from a JSON file, path or dict."""
    if not isinstance(source, dict):
        with open(source) as fh:
            source = json.load(fh)
    objects = []
    for o in source.get("objects", []):
        if isinstance(o, dict):
            objects.append(TruthObject(float(o["x"]), float(o["y"]),
                                       str(o.get("label", ""))))
        else:
            objects.append(TruthObject(float(o[0]), float(o[1]),
                                       str(o[2]) if len(o) > 2 else ""))
    frame_ranges = None
    if "frame_ranges" in source:
        frame_ranges = {int(row[0]): float(row[1]) for row in source["frame_ranges"]}
    return GroundTruth(objects=objects, frame_ranges=frame_ranges)


def match_points(points_xy, objects, margin: float = DEFAULT_MARGIN_CM):
    """Score x/y detections against truth objects.

    Returns (tp, fp, errors); an error is the distance to the nearest
    object for each true positive.
    """
    if not objects:
        raise EvalError("cannot match detections against empty truth")
    tp = fp = 0
    errors = []
    for x, y in points_xy:
        nearest = min(math.hypot(o.x - x, o.y - y) for o in objects)
        if nearest <= margin:
            tp += 1
            errors.append(nearest)
        else:
            fp += 1
    return tp, fp, errors


def missing_objects(points_xy, objects, margin: float = DEFAULT_MARGIN_CM) -> int:
    """Truth objects with no detection inside the margin."""
    fn = 0
    for o in objects:
        if not any(math.hypot(o.x - x, o.y - y) <= margin for x, y in points_xy):
            fn += 1
    return fn


def match_detections(detections, truth: GroundTruth,
                     margin: float = DEFAULT_MARGIN_CM,
                     mode: EvalMode = EvalMode.CLUSTERS) -> MatchResult:
    """Match detections to truth under the chosen protocol.

    ``clusters`` mode expects (x, y) pairs (cluster centroids for one
    evaluation window); ``frames`` mode expects ``FrameDetection`` rows,
    where a frame without a range estimate counts as a miss.
    """
    mode = EvalMode(mode)
    if mode is EvalMode.CLUSTERS:
        points = [(p[0], p[1]) for p in detections]
        tp, fp, errors = match_points(points, truth.objects, margin)
        fn = missing_objects(points, truth.objects, margin)
        return MatchResult(tp=tp, fp=fp, fn=fn, errors=errors)

    if not truth.objects and not truth.frame_ranges:
        raise EvalError("cannot match detections against empty truth")
    tp = fp = fn = 0
    errors = []
    for det in detections:
        if det.range_cm is None:
            fn += 1
            continue
        err = abs(det.range_cm - truth.range_at(det.t_ms, det.rx_xy))
        if err <= margin:
            tp += 1
            errors.append(err)
        else:
            fp += 1
    return MatchResult(tp=tp, fp=fp, fn=fn, errors=errors)


@dataclass
class Metrics:
    """Precision/recall/F1; a field is None when its ratio is undefined."""

    precision: float | None
    recall: float | None
    f1: float | None


def detection_metrics(tp: int, fp: int, fn: int) -> Metrics:
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    return Metrics(precision=precision, recall=recall, f1=f1)


@dataclass
class DistanceStats:
    mae: float | None
    sd: float | None
    p90: float | None
    p95: float | None
    cdf: list[float]


def distance_stats(errors) -> DistanceStats:
    """MAE, population SD and tail percentiles of absolute errors."""
    abs_err = np.abs(np.asarray(list(errors), dtype=float))
    if abs_err.size == 0:
        return DistanceStats(mae=None, sd=None, p90=None, p95=None, cdf=[])
    return DistanceStats(
        mae=float(np.mean(abs_err)),
        sd=float(np.std(abs_err)),
        p90=float(np.percentile(abs_err, 90)),
        p95=float(np.percentile(abs_err, 95)),
        cdf=sorted(float(e) for e in abs_err),
    )


@dataclass
class EvalReport:
    mode: EvalMode
    margin: float
    match: MatchResult
    metrics: Metrics
    stats: DistanceStats
    windows: int = 1


def evaluate(detections, truth: GroundTruth, margin: float = DEFAULT_MARGIN_CM,
             mode: EvalMode = EvalMode.CLUSTERS) -> EvalReport:
    match = match_detections(detections, truth, margin=margin, mode=mode)
    return EvalReport(
        mode=EvalMode(mode),
        margin=margin,
        match=match,
        metrics=detection_metrics(match.tp, match.fp, match.fn),
        stats=distance_stats(match.errors),
    )


def combine_reports(reports: list[EvalReport]) -> EvalReport:
    """Pool matches from several evaluation windows into one report."""
    if not reports:
        raise EvalError("no evaluation windows to combine")
    tp = sum(r.match.tp for r in reports)
    fp = sum(r.match.fp for r in reports)
    fn = sum(r.match.fn for r in reports)
    errors = [e for r in reports for e in r.match.errors]
    return EvalReport(
        mode=reports[0].mode,
        margin=reports[0].margin,
        match=MatchResult(tp=tp, fp=fp, fn=fn, errors=errors),
        metrics=detection_metrics(tp, fp, fn),
        stats=distance_stats(errors),
        windows=len(reports),
    )


# --- report files ---------------------------------------------------------


def report_to_obj(report: EvalReport) -> dict:
    def pct(v):
        return None if v is None else round(100.0 * v, 4)

    return {
        "mode": report.mode.value,
        "margin_cm": report.margin,
        "windows": report.windows,
        "counts": {"tp": report.match.tp, "fp": report.match.fp,
                   "fn": report.match.fn},
        "metrics": {
            "precision_pct": pct(report.metrics.precision),
            "recall_pct": pct(report.metrics.recall),
            "f1_pct": pct(report.metrics.f1),
        },
        "distance": {
            "mae_cm": report.stats.mae,
            "p90_cm": report.stats.p90,
            "p95_cm": report.stats.p95,
            "sd_cm": report.stats.sd,
            "n_errors": len(report.stats.cdf),
        },
    }


def format_table(report: EvalReport) -> str:
    """Single-row summary table in the usual benchmark column order."""
    def cm(v):
        return "   n/a" if v is None else f"{v:6.2f}"

    def pct(v):
        return "    n/a" if v is None else f"{100.0 * v:7.2f}"

    lines = [
        f"mode={report.mode.value}  margin={report.margin:g} cm  "
        f"windows={report.windows}",
        "   MAE[cm]  P90[cm]  P95[cm]   SD[cm] | Prec[%]  Rec[%]   F1[%]",
        f"    {cm(report.stats.mae)}   {cm(report.stats.p90)}   {cm(report.stats.p95)}"
        f"   {cm(report.stats.sd)} | {pct(report.metrics.precision)}"
        f" {pct(report.metrics.recall)} {pct(report.metrics.f1)}",
        f"counts: tp={report.match.tp} fp={report.match.fp} fn={report.match.fn}",
    ]
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, out_dir) -> dict[str, Path]:
    """Write report.json, report.txt and cdf.csv; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / "report.json",
        "table": out_dir / "report.txt",
        "cdf": out_dir / "cdf.csv",
    }
    with open(paths["json"], "w") as fh:
        json.dump(report_to_obj(report), fh, indent=2)
        fh.write("\n")
    with open(paths["table"], "w") as fh:
        fh.write(format_table(report))
    with open(paths["cdf"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["error_cm", "fraction"])
        n = len(report.stats.cdf)
        for i, err in enumerate(report.stats.cdf):
            writer.writerow([repr(err), repr((i + 1) / n)])
    return paths
