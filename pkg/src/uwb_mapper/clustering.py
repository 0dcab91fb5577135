"""Density clustering of detected points into an obstacle map.

Detections accumulate in a buffer; each time enough new points arrive the
whole buffer is re-clustered with DBSCAN and a map snapshot is emitted.
Clustering is deterministic: points are processed in (timestamp, x, y)
order, clusters are numbered by the order their seed core point appears,
and a border point in reach of several clusters joins the
lowest-numbered one.  Noise points stay in the buffer and may join a
cluster on a later pass once their neighbourhood fills in.

Neighbour queries run on a uniform grid with cells of side eps/sqrt(2).
Any two points sharing a cell are then mutual eps-neighbours, so a cell
holding min_samples points is an all-core clique a cluster can claim in
one step; real distance work is left for cell-boundary interactions,
pre-screened by bounding-box gap and span tests.  Distances are
Euclidean on the world-frame x/y; a neighbourhood counts the point
itself.
"""

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .capture import clamp_json_float
from .geometry import DetectedPoint


@dataclass(frozen=True)
class ClusterParams:
    """eps/min_samples drive DBSCAN; min_peaks is the re-cluster trigger."""

    eps: float = 20.0
    min_samples: int = 20
    min_peaks: int = 50

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.min_samples < 1 or self.min_peaks < 1:
            raise ValueError("min_samples and min_peaks must be at least 1")


def load_cluster_overrides(params: ClusterParams, source) -> ClusterParams:
    """Apply overrides from a JSON parameters file or dict."""
    if not isinstance(source, dict):
        with open(source) as fh:
            source = json.load(fh)
    fields = {}
    if "eps" in source:
        fields["eps"] = float(source["eps"])
    for key in ("min_samples", "min_peaks"):
        if key in source:
            fields[key] = int(source[key])
    return replace(params, **fields) if fields else params


@dataclass
class Cluster:
    """One mapped obstacle: member points plus summary statistics."""

    cluster_id: int
    members: list[DetectedPoint]
    centroid: tuple[float, float]
    mean_snr: float


@dataclass
class MapSnapshot:
    timestamp_ms: int
    clusters: list[Cluster]
    noise: list[DetectedPoint] = field(default_factory=list)


def _sort_key(p: DetectedPoint):
    return (p.timestamp_ms, p.x, p.y)


def cluster_centroid(members) -> tuple[float, float]:
    """Arithmetic mean of member positions."""
    if not members:
        raise ValueError("centroid of an empty cluster")
    xs = [p.x for p in members]
    ys = [p.y for p in members]
    return (sum(xs) / len(xs), sum(ys) / len(ys))


# Cap on elements per distance matrix so dense regions stay memory-flat.
_CHUNK_ELEMS = 2_000_000

_UNSEEN = -2

# Two eps-neighbours sit at most two cells apart at side eps/sqrt(2).
_OFFSETS = tuple((dx, dy) for dx in (-2, -1, 0, 1, 2) for dy in (-2, -1, 0, 1, 2)
                 if (dx, dy) != (0, 0))


def _chunks(rows: np.ndarray, width: int):
    step = max(1, _CHUNK_ELEMS // max(1, width))
    for start in range(0, len(rows), step):
        yield rows[start:start + step]


def _gap_sq(a, b) -> float:
    """Squared distance between two bounding boxes (0 when they overlap)."""
    ax0, ax1, ay0, ay1 = a
    bx0, bx1, by0, by1 = b
    gx = max(bx0 - ax1, ax0 - bx1, 0.0)
    gy = max(by0 - ay1, ay0 - by1, 0.0)
    return gx * gx + gy * gy


def _span_sq(a, b) -> float:
    """Squared diagonal of the union of two bounding boxes."""
    ax0, ax1, ay0, ay1 = a
    bx0, bx1, by0, by1 = b
    sx = max(ax1, bx1) - min(ax0, bx0)
    sy = max(ay1, by1) - min(ay0, by0)
    return sx * sx + sy * sy


class _Grid:
    """Uniform grid over the points for exact batched DBSCAN queries."""

    def __init__(self, xy: np.ndarray, eps: float, min_samples: int):
        self.xy = xy
        self.eps = eps
        self.eps_sq = eps * eps
        self.min_samples = min_samples
        side = eps / math.sqrt(2.0)
        self.cell_of = np.floor(xy / side).astype(np.int64)
        order = np.lexsort((self.cell_of[:, 1], self.cell_of[:, 0]))
        sorted_keys = self.cell_of[order]
        starts = np.concatenate([
            [0],
            np.flatnonzero(np.any(np.diff(sorted_keys, axis=0) != 0, axis=1)) + 1,
        ])
        groups = np.split(order.astype(np.intp), starts[1:])
        xs = xy[order, 0]
        ys = xy[order, 1]
        x_min = np.minimum.reduceat(xs, starts)
        x_max = np.maximum.reduceat(xs, starts)
        y_min = np.minimum.reduceat(ys, starts)
        y_max = np.maximum.reduceat(ys, starts)
        self.cells = {}
        self.bbox = {}
        self.dense = set()
        for g, grp in enumerate(groups):
            key = (int(sorted_keys[starts[g], 0]), int(sorted_keys[starts[g], 1]))
            self.cells[key] = grp
            self.bbox[key] = (x_min[g], x_max[g], y_min[g], y_max[g])
            # A cell with min_samples points is a clique of core points.
            if grp.size >= min_samples:
                self.dense.add(key)

    def _key(self, i: int) -> tuple[int, int]:
        return (int(self.cell_of[i, 0]), int(self.cell_of[i, 1]))

    def _neighbours(self, key):
        cx, cy = key
        for dx, dy in _OFFSETS:
            k = (cx + dx, cy + dy)
            if k in self.cells:
                yield k

    def _mask(self, rows: np.ndarray, cand: np.ndarray) -> np.ndarray:
        dx = self.xy[rows, 0][:, None] - self.xy[cand, 0][None, :]
        dy = self.xy[rows, 1][:, None] - self.xy[cand, 1][None, :]
        return dx * dx + dy * dy <= self.eps_sq

    def _band(self, idx: np.ndarray, box) -> np.ndarray:
        """Subset of idx within eps of the box along both axes."""
        x0, x1, y0, y1 = box
        p = self.xy[idx]
        keep = ((p[:, 0] >= x0 - self.eps) & (p[:, 0] <= x1 + self.eps) &
                (p[:, 1] >= y0 - self.eps) & (p[:, 1] <= y1 + self.eps))
        return idx[keep]

    def core_mask(self) -> np.ndarray:
        """Points whose neighbourhood (inclusive) has at least min_samples."""
        core = np.zeros(len(self.xy), dtype=bool)
        for key, members in self.cells.items():
            if key in self.dense:
                core[members] = True
                continue
            # Same-cell points are all neighbours, the rest needs counting.
            counts = None
            box = self.bbox[key]
            for nb in self._neighbours(key):
                nb_box = self.bbox[nb]
                if _gap_sq(box, nb_box) > self.eps_sq:
                    continue
                if counts is None:
                    counts = np.full(members.size, members.size, dtype=np.intp)
                if _span_sq(box, nb_box) <= self.eps_sq:
                    counts += self.cells[nb].size
                    continue
                cand = self._band(self.cells[nb], box)
                if cand.size == 0:
                    continue
                start = 0
                for chunk in _chunks(members, cand.size):
                    counts[start:start + len(chunk)] += (
                        self._mask(chunk, cand).sum(axis=1))
                    start += len(chunk)
            if counts is not None:
                core[members] = counts >= self.min_samples
        return core

    def _touches(self, src: np.ndarray, src_box, nb) -> bool:
        """True when any src point is within eps of any point of cell nb."""
        nb_box = self.bbox[nb]
        if _gap_sq(src_box, nb_box) > self.eps_sq:
            return False
        if _span_sq(src_box, nb_box) <= self.eps_sq:
            return True
        a = self._band(src, nb_box)
        if a.size == 0:
            return False
        b = self._band(self.cells[nb], src_box)
        if b.size == 0:
            return False
        for chunk in _chunks(a, b.size):
            if self._mask(chunk, b).any():
                return True
        return False

    def _claim_from(self, src, src_box, nb, label, labels, core,
                    new_cells, new_points):
        """Label the points of cell nb reached from the src point set.

        Dense cells are claimed whole (their points are mutually
        reachable cores); sparse cells are claimed point by point and
        their reached cores join the next wave.
        """
        members = self.cells[nb]
        if nb in self.dense:
            if labels[members[0]] != _UNSEEN:
                return
            if self._touches(src, src_box, nb):
                labels[members] = label
                new_cells.append(nb)
            return
        open_ = members[labels[members] == _UNSEEN]
        if open_.size == 0:
            return
        nb_box = self.bbox[nb]
        if _gap_sq(src_box, nb_box) > self.eps_sq:
            return
        if _span_sq(src_box, nb_box) <= self.eps_sq:
            reached = open_
        else:
            band = self._band(src, nb_box)
            if band.size == 0:
                return
            hit = np.zeros(open_.size, dtype=bool)
            start = 0
            for chunk in _chunks(open_, band.size):
                hit[start:start + len(chunk)] = self._mask(chunk, band).any(axis=1)
                start += len(chunk)
            reached = open_[hit]
        if reached.size:
            labels[reached] = label
            fresh_cores = reached[core[reached]]
            if fresh_cores.size:
                new_points.append(fresh_cores)

    def expand(self, seed: int, label: int, labels: np.ndarray,
               core: np.ndarray) -> None:
        """Claim the whole density-reachability closure of an unseen core."""
        labels[seed] = label
        skey = self._key(seed)
        if skey in self.dense:
            labels[self.cells[skey]] = label
            cell_frontier = [skey]
            point_frontier = []
        else:
            cell_frontier = []
            point_frontier = [np.asarray([seed], dtype=np.intp)]
        while cell_frontier or point_frontier:
            new_cells: list[tuple[int, int]] = []
            new_points: list[np.ndarray] = []
            for key in cell_frontier:
                src = self.cells[key]
                box = self.bbox[key]
                for nb in self._neighbours(key):
                    self._claim_from(src, box, nb, label, labels, core,
                                     new_cells, new_points)
            if point_frontier:
                rows = np.unique(np.concatenate(point_frontier))
                keys = self.cell_of[rows]
                order = np.lexsort((keys[:, 1], keys[:, 0]))
                rows = rows[order]
                keys = keys[order]
                bounds = np.flatnonzero(
                    np.any(np.diff(keys, axis=0) != 0, axis=1)) + 1
                for grp in np.split(rows, bounds):
                    key = self._key(grp[0])
                    # Same-cell points are reached outright (clique).
                    members = self.cells[key]
                    open_ = members[labels[members] == _UNSEEN]
                    if open_.size:
                        labels[open_] = label
                        fresh_cores = open_[core[open_]]
                        if fresh_cores.size:
                            new_points.append(fresh_cores)
                    p = self.xy[grp]
                    box = (p[:, 0].min(), p[:, 0].max(),
                           p[:, 1].min(), p[:, 1].max())
                    for nb in self._neighbours(key):
                        self._claim_from(grp, box, nb, label, labels, core,
                                         new_cells, new_points)
            cell_frontier = new_cells
            point_frontier = new_points


def dbscan(points, params: ClusterParams) -> tuple[list[Cluster], list[DetectedPoint]]:
    """Cluster detections; returns (clusters, noise points).

    The input may arrive in any order; output is a function of the point
    set only.
    """
    pts = sorted(points, key=_sort_key)
    n = len(pts)
    if n == 0:
        return [], []
    xy = np.array([(p.x, p.y) for p in pts], dtype=float)
    grid = _Grid(xy, params.eps, params.min_samples)
    core = grid.core_mask()

    labels = np.full(n, _UNSEEN, dtype=np.intp)
    n_clusters = 0
    for i in range(n):
        if labels[i] != _UNSEEN or not core[i]:
            continue
        grid.expand(i, n_clusters, labels, core)
        n_clusters += 1

    clusters = []
    for cid in range(n_clusters):
        members = [pts[j] for j in np.flatnonzero(labels == cid)]
        snrs = [p.snr_score for p in members]
        clusters.append(Cluster(
            cluster_id=cid,
            members=members,
            centroid=cluster_centroid(members),
            mean_snr=sum(snrs) / len(snrs),
        ))
    noise = [pts[j] for j in np.flatnonzero(labels == _UNSEEN)]
    return clusters, noise


def accumulate_and_cluster(point_stream, params: ClusterParams, timings=None):
    """Buffer a detection stream, yielding a MapSnapshot per trigger.

    Re-clusters the entire buffer whenever at least ``min_peaks`` points
    arrived since the last pass, and once more at end of stream if any
    points are still unprocessed.  When ``timings`` is a list, the wall
    time of each clustering pass is appended to it, in seconds.
    """
    buffer: list[DetectedPoint] = []
    fresh = 0
    for point in point_stream:
        buffer.append(point)
        fresh += 1
        if fresh >= params.min_peaks:
            yield _snapshot(buffer, params, timings)
            fresh = 0
    if fresh > 0:
        yield _snapshot(buffer, params, timings)


def _snapshot(buffer, params, timings=None) -> MapSnapshot:
    t0 = time.perf_counter()
    clusters, noise = dbscan(buffer, params)
    if timings is not None:
        timings.append(time.perf_counter() - t0)
    return MapSnapshot(timestamp_ms=max(p.timestamp_ms for p in buffer),
                       clusters=clusters, noise=noise)


# --- snapshot JSON -------------------------------------------------------


def snapshot_to_obj(snapshot: MapSnapshot) -> dict:
    return {
        "t_ms": snapshot.timestamp_ms,
        "clusters": [
            {
                "id": c.cluster_id,
                "centroid": [c.centroid[0], c.centroid[1]],
                "n": len(c.members),
                "mean_snr": clamp_json_float(c.mean_snr),
                "points": [[p.x, p.y, clamp_json_float(p.snr_score)]
                           for p in c.members],
            }
            for c in snapshot.clusters
        ],
        "noise_count": len(snapshot.noise),
    }


def serialize_snapshot(snapshot: MapSnapshot) -> str:
    return json.dumps(snapshot_to_obj(snapshot), separators=(",", ":"))


def read_snapshots(path) -> list[dict]:
    """Parse a snapshots JSONL file back into plain dicts."""
    out = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {line_no}: invalid snapshot JSON ({exc})") from None
            if "clusters" not in obj or "t_ms" not in obj:
                raise ValueError(f"line {line_no}: not a map snapshot record")
            out.append(obj)
    return out
