"""Figure rendering for run artifacts.

Each pipeline stage gets a world-frame scatter of the peaks that survive
up to that stage, colored by SNR score (brighter = higher), with the
robot path drawn underneath.  The final map view outlines each cluster's
convex hull.  Figures are written as static SVG with a fixed hash salt
and no embedded date, so identical inputs render byte-identical files.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.spatial import ConvexHull, QhullError

_RC = {"svg.hashsalt": "uwb-mapper", "figure.figsize": (7.0, 6.0)}
_META = {"Date": None}

# stage name -> (peak predicate, panel title)
STAGES = {
    "raw": (lambda p: True, "all CIR peaks, assumed straight ahead"),
    "filtered": (lambda p: p["pass_props"],
                 "after width / prominence / SNR thresholds"),
    "pdoa": (lambda p: p["pass_props"] and p["pass_pdoa"],
             "after the phase-difference gate"),
    "aoa": (lambda p: p["survivor"], "positioned with the arrival angle"),
}


def _path_xy(records):
    return np.array([[r["pose"][0], r["pose"][1]] for r in records], dtype=float)


def _draw_path(ax, path_xy):
    if len(path_xy) == 0:
        return
    ax.plot(path_xy[:, 0], path_xy[:, 1], color="0.55", lw=1.0, zorder=1,
            label="robot path")
    ax.plot(*path_xy[0], "o", color="0.55", alpha=0.4, ms=8, zorder=1)
    ax.plot(*path_xy[-1], "o", color="0.3", ms=8, zorder=1)


def _finish(ax, title):
    ax.set_title(title)
    ax.set_xlabel("x [cm]")
    ax.set_ylabel("y [cm]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, lw=0.3, alpha=0.5)


def _save(fig, out_path):
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, metadata=_META if out_path.suffix == ".svg" else None,
                bbox_inches="tight")
    plt.close(fig)
    return out_path


def render_stage(records, stage: str, out_path) -> Path:
    """Scatter one pipeline stage's peaks from a peaks log."""
    keep, title = STAGES[stage]
    xs, ys, snrs = [], [], []
    for rec in records:
        for p in rec["peaks"]:
            if not keep(p):
                continue
            xy = p["world_xy"] if stage == "aoa" else p["front_xy"]
            if xy is None:
                continue
            xs.append(xy[0])
            ys.append(xy[1])
            snrs.append(p["snr"] if p["snr"] is not None else 0.0)

    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        _draw_path(ax, _path_xy(records))
        if xs:
            sc = ax.scatter(xs, ys, c=_finite(snrs), cmap="viridis", s=7, zorder=2)
            fig.colorbar(sc, ax=ax, label="SNR score [dB]")
        _finish(ax, f"{title} ({len(xs)} peaks)")
        return _save(fig, out_path)


def _finite(values):
    arr = np.asarray(values, dtype=float)
    finite = arr[np.isfinite(arr)]
    hi = float(finite.max()) if finite.size else 0.0
    lo = float(finite.min()) if finite.size else 0.0
    return np.clip(np.nan_to_num(arr, posinf=hi, neginf=lo), lo, hi)


def render_map(snapshot_obj: dict, records, out_path) -> Path:
    """Final obstacle map: cluster members, hull outlines, centroids."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        if records:
            _draw_path(ax, _path_xy(records))
        cmap = plt.get_cmap("tab10")
        for cluster in snapshot_obj.get("clusters", []):
            pts = np.array([[p[0], p[1]] for p in cluster["points"]], dtype=float)
            color = cmap(cluster["id"] % 10)
            ax.scatter(pts[:, 0], pts[:, 1], s=7, color=color, zorder=2)
            if len(pts) >= 3:
                try:
                    hull = ConvexHull(pts)
                    ring = np.append(hull.vertices, hull.vertices[0])
                    ax.plot(pts[ring, 0], pts[ring, 1], color=color, lw=1.2,
                            zorder=3)
                except QhullError:
                    pass  # collinear members have no 2-D hull
            cx, cy = cluster["centroid"]
            ax.plot(cx, cy, "x", color="black", ms=9, zorder=4)
            ax.annotate(str(cluster["id"]), (cx, cy),
                        textcoords="offset points", xytext=(5, 5))
        n_clusters = len(snapshot_obj.get("clusters", []))
        noise = snapshot_obj.get("noise_count", 0)
        _finish(ax, f"obstacle map at t={snapshot_obj.get('t_ms', 0)} ms: "
                    f"{n_clusters} clusters, {noise} noise points")
        return _save(fig, out_path)


def render_cdf(cdf, out_path) -> Path:
    """Cumulative distribution of matched distance errors."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        if cdf:
            errors = np.asarray(cdf, dtype=float)
            fraction = np.arange(1, len(errors) + 1) / len(errors)
            ax.step(errors, fraction, where="post")
            p50 = float(np.percentile(errors, 50))
            ax.axvline(p50, color="0.6", lw=0.8, ls="--")
            ax.annotate(f"median {p50:.2f} cm", (p50, 0.5),
                        textcoords="offset points", xytext=(6, 0))
        ax.set_xlabel("absolute error [cm]")
        ax.set_ylabel("fraction of detections")
        ax.set_ylim(0.0, 1.05)
        ax.grid(True, lw=0.3, alpha=0.5)
        ax.set_title("distance error CDF")
        return _save(fig, out_path)
