"""Interior medial axis of a binary shape and its threshold-driven pruning."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.spatial import Voronoi, cKDTree

from .geometry import (
    ShapeError,
    SkeletonGraph,
    components,
    count_holes,
    extract_contour,
    morphology,
    points_in_polygon,
    polygon_area,
    primitive_pixels,
    resample_polygon,
)

log = logging.getLogger(__name__)

THRESHOLDS = (2.0, 4.0, 6.0)


@dataclass
class CleanReport:
    topology_changed: bool = False
    holes_closed: int = 0
    islands_removed: int = 0


def clean_shape(img: np.ndarray) -> tuple[np.ndarray, CleanReport]:
    """One-pixel closing, then drop every component but the largest and fill holes.

    ``topology_changed`` is raised when the closing itself merged separate parts or
    left holes that had to be filled, i.e. when a person should look at the result.
    """
    img = np.asarray(img, dtype=bool)
    if not img.any():
        raise ShapeError("empty shape", "empty")
    holes_before = count_holes(img)
    closed = morphology(morphology(img, "dilate"), "erode")
    report = CleanReport()

    _, parts_before = components(_drop_specks(img))
    labels, n = components(closed)
    _, parts_after = components(_drop_specks(closed))
    if parts_after < parts_before:
        report.topology_changed = True
    if n > 1:
        sizes = ndimage.sum_labels(np.ones_like(closed), labels, index=np.arange(1, n + 1))
        keep = 1 + int(np.argmax(sizes))
        closed = labels == keep
        report.islands_removed = n - 1

    holes_after = count_holes(closed)
    report.holes_closed = max(0, holes_before - holes_after)
    if holes_after:
        closed = ndimage.binary_fill_holes(closed)
        report.topology_changed = True
    if not closed.any():
        raise ShapeError("shape vanished under cleaning", "empty")
    return closed, report


def _drop_specks(img):
    labels, n = components(img)
    if n == 0:
        return img
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return sizes[labels] > 1


# --- Voronoi medial axis ------------------------------------------------------------


def voronoi_medial_axis(contour: np.ndarray, sample_step: float = 1.0) -> SkeletonGraph:
    """Interior Voronoi skeleton of a densely resampled polygon boundary.

    Voronoi vertices of the boundary samples that fall inside the polygon become nodes,
    Voronoi ridges with both ends (and midpoint) inside become edges, and each node's
    radius is its distance to the nearest sample. Only the connected component holding
    the widest node is kept, reduced to a spanning tree if numerical degeneracies leave
    a cycle.
    """
    contour = np.asarray(contour, dtype=float)
    if sample_step <= 0:
        raise ValueError("sample_step must be positive")
    if len(contour) < 3 or abs(polygon_area(contour)) < 1e-6:
        raise ShapeError("degenerate contour", "degenerate")
    samples = resample_polygon(contour, sample_step)
    # drop exact duplicates so qhull stays happy
    samples = np.unique(samples, axis=0)
    vor = Voronoi(samples)

    # vertices that coincide up to round-off are the same medial point; far-away
    # vertices are clipped first (they are outside anyway) to keep the keys finite
    lo, hi = contour.min(axis=0) - 1, contour.max(axis=0) + 1
    key = np.round(np.clip(vor.vertices, lo, hi) / 1e-6).astype(np.int64)
    _, first, vid = np.unique(key, axis=0, return_index=True, return_inverse=True)
    vid = vid.ravel()
    verts = vor.vertices[first]
    inside = points_in_polygon(verts, contour)

    edges = set()
    for a, b in vor.ridge_vertices:
        if a < 0 or b < 0:
            continue
        i, j = int(vid[a]), int(vid[b])
        if i == j or not (inside[i] and inside[j]):
            continue
        edges.add((min(i, j), max(i, j)))
    if not edges:
        # very small shapes may have a single interior vertex
        if inside.any():
            keep = np.flatnonzero(inside)
            r, _ = cKDTree(samples).query(verts[keep])
            best = int(np.argmax(r))
            return SkeletonGraph([[*verts[keep[best]], r[best]]])
        raise ShapeError("no interior Voronoi vertex; shape too thin", "degenerate")
    edges = np.array(sorted(edges), dtype=np.int64)
    mids = 0.5 * (verts[edges[:, 0]] + verts[edges[:, 1]])
    edges = edges[points_in_polygon(mids, contour)]

    used = np.unique(edges)
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    pts = verts[used]
    edges = remap[edges]
    radii, _ = cKDTree(samples).query(pts)

    n = len(pts)
    adj = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    ncomp, label = connected_components(adj, directed=False)
    root = int(np.argmax(radii))
    keep = np.flatnonzero(label == label[root])
    g = SkeletonGraph(np.column_stack([pts, radii]), edges).subgraph(keep)
    if len(g.edges) >= len(g):
        g = _spanning_tree(g)
    return g


def _spanning_tree(g: SkeletonGraph) -> SkeletonGraph:
    n = len(g)
    m = coo_matrix((np.ones(len(g.edges)), (g.edges[:, 0], g.edges[:, 1])), shape=(n, n))
    m = (m + m.T).tocsr()
    order, pred = breadth_first_order(m, int(np.argmax(g.radii)), directed=False)
    tree = [(min(i, int(pred[i])), max(i, int(pred[i]))) for i in order if pred[i] >= 0]
    log.debug("broke %d cycle edge(s) in Voronoi skeleton", len(g.edges) - len(tree))
    return SkeletonGraph(g.nodes, np.array(sorted(tree), dtype=np.int64))


# --- pruning ------------------------------------------------------------------------


class _Pruner:
    """Greedy leaf-branch removal under a one-sided raster Hausdorff bound.

    Keeps a per-pixel count of covering primitives (node disks and swept edges) and
    the distance of every pixel to the current reconstruction. A branch's removal cost
    is the largest new distance among shape pixels it pushes away from the
    reconstruction; since costs only grow as other branches go, a lazy priority queue
    picks the true cheapest branch at each step.
    """

    def __init__(self, g: SkeletonGraph, shape_img: np.ndarray, epsilon: float, cache=None):
        self.g = g
        self.shape_img = np.asarray(shape_img, dtype=bool)
        self.h, self.w = self.shape_img.shape
        self.eps = float(epsilon)
        self.margin = int(math.ceil(self.eps)) + 2
        self.prims = primitive_pixels(g, self.shape_img.shape, cache)
        flat = np.concatenate(self.prims) if self.prims else np.zeros(0, np.int64)
        self.count = np.bincount(flat, minlength=self.h * self.w).astype(np.int64)
        recon = (self.count > 0).reshape(self.h, self.w)
        if recon.any():
            self.dist = ndimage.distance_transform_edt(~recon)
        else:
            self.dist = np.full((self.h, self.w), np.inf)
        self.n = len(g)
        self.adj: list[dict[int, int]] = [dict() for _ in range(self.n)]
        for e, (i, j) in enumerate(g.edges.tolist()):
            self.adj[i][j] = e
            self.adj[j][i] = e
        self.alive = np.ones(self.n, dtype=bool)
        self.epoch = 0

    def candidates(self) -> dict[tuple, tuple[int, list[int], list[int]]]:
        alive = np.flatnonzero(self.alive)
        if len(alive) <= 1:
            return {}
        deg = {int(i): len(self.adj[i]) for i in alive}
        leaves = [i for i in deg if deg[i] == 1]
        out = {}
        if any(d >= 3 for d in deg.values()):
            for leaf in leaves:
                nodes, edges = [leaf], []
                prev, cur = -1, leaf
                while True:
                    nxt = next(k for k in self.adj[cur] if k != prev)
                    edges.append(self.adj[cur][nxt])
                    if deg[nxt] != 2:
                        break
                    nodes.append(nxt)
                    prev, cur = cur, nxt
                out[(tuple(nodes), tuple(edges))] = (leaf, nodes, edges)
        else:
            # a bare path has no junction to hang branches from: peel its ends
            for leaf in leaves:
                (nb, e), = self.adj[leaf].items()
                out[((leaf,), (e,))] = (leaf, [leaf], [e])
        return out

    def evaluate(self, leaf, nodes, edges):
        idx = np.concatenate([self.prims[i] for i in nodes] + [self.prims[self.n + e] for e in edges])
        if len(idx) == 0:
            return (0.0, 0, leaf), None
        if len(idx) < self.count.size // 4:
            u, c = np.unique(idx, return_counts=True)
        else:
            c = np.bincount(idx, minlength=self.count.size)
            u = np.flatnonzero(c)
            c = c[u]
        lost = u[self.count[u] == c]
        if len(lost) == 0:
            return (0.0, 0, leaf), (u, c, None)

        ly, lx = np.divmod(lost, self.w)
        m = self.margin
        wy0, wy1 = max(0, ly.min() - m), min(self.h, ly.max() + m + 1)
        wx0, wx1 = max(0, lx.min() - m), min(self.w, lx.max() + m + 1)
        ry0, ry1 = max(0, wy0 - m), min(self.h, wy1 + m)
        rx0, rx1 = max(0, wx0 - m), min(self.w, wx1 + m)

        local = self.count.reshape(self.h, self.w)[ry0:ry1, rx0:rx1].copy()
        uy, ux = np.divmod(u, self.w)
        sel = (uy >= ry0) & (uy < ry1) & (ux >= rx0) & (ux < rx1)
        local[uy[sel] - ry0, ux[sel] - rx0] -= c[sel]
        recon = local > 0
        if recon.any():
            d = ndimage.distance_transform_edt(~recon)
        else:
            d = np.full(recon.shape, np.inf)
        wy, wx = slice(wy0 - ry0, wy1 - ry0), slice(wx0 - rx0, wx1 - rx0)
        new = d[wy, wx]
        old = self.dist[wy0:wy1, wx0:wx1]
        shape = self.shape_img[wy0:wy1, wx0:wx1]
        changed = shape & (new > old + 1e-12)
        cost = float(new[changed].max()) if changed.any() else 0.0
        violates = bool(np.any(new[changed] > np.maximum(self.eps, old[changed]) + 1e-9))
        key = (math.inf if violates else cost, len(lost), leaf)
        return key, (u, c, (wy0, wy1, wx0, wx1, new))

    def apply(self, nodes, edges, update):
        u, c, window = update
        self.count[u] -= c
        if window is not None:
            wy0, wy1, wx0, wx1, new = window
            self.dist[wy0:wy1, wx0:wx1] = new
        for i in nodes:
            for j in list(self.adj[i]):
                del self.adj[j][i]
            self.adj[i].clear()
            self.alive[i] = False
        self.epoch += 1

    def run(self) -> SkeletonGraph:
        heap: list = []
        known: set = set()

        def push_new():
            cands = self.candidates()
            # a branch that vanished and reappears is a new candidate
            known.intersection_update(cands)
            for k, (leaf, nodes, edges) in cands.items():
                if k in known:
                    continue
                known.add(k)
                key, upd = self.evaluate(leaf, nodes, edges)
                if key[0] <= self.eps:
                    heapq.heappush(heap, (key, self.epoch, k, upd))
            return cands

        cands = push_new()
        while heap:
            key, epoch, k, upd = heapq.heappop(heap)
            if k not in cands:
                continue
            leaf, nodes, edges = cands[k]
            if epoch != self.epoch:
                key, upd = self.evaluate(leaf, nodes, edges)
                if key[0] > self.eps:
                    continue
                if heap and heap[0][0] < key:
                    heapq.heappush(heap, (key, self.epoch, k, upd))
                    continue
            self.apply(nodes, edges, upd)
            cands = push_new()
        return self.g.subgraph(np.flatnonzero(self.alive))


def prune(g: SkeletonGraph, shape_img: np.ndarray, epsilon: float, cache: dict | None = None) -> SkeletonGraph:
    """Remove leaf branches while every shape pixel stays within ``epsilon`` pixels of
    the reconstruction of what is left.

    The cheapest removable branch goes first. When the skeleton has no junction left,
    its two end nodes are peeled one at a time instead. Pixels that were already
    farther than ``epsilon`` may not get any farther. The result is a connected
    subgraph of ``g`` from which no further leaf branch can be dropped.
    ``cache`` (see ``primitive_pixels``) saves work when pruning one shape repeatedly.
    """
    if epsilon <= 0:
        raise ValueError("pruning threshold must be positive")
    if len(g) <= 1:
        return g
    return _Pruner(g, shape_img, epsilon, cache).run()


# --- automatic threshold choice -----------------------------------------------------


@dataclass
class Candidate:
    epsilon: float
    graph: SkeletonGraph
    branches: int


@dataclass
class AutoResult:
    graph: SkeletonGraph
    epsilon: float
    candidates: list[Candidate]
    clean: CleanReport
    needs_review: bool
    shape: np.ndarray | None = field(default=None, repr=False)


def skeleton_candidates(
    img: np.ndarray, thresholds=THRESHOLDS, sample_step: float = 1.0
) -> tuple[np.ndarray, CleanReport, list[Candidate]]:
    """Clean the shape and prune its medial axis at each threshold, smallest first.

    Each threshold prunes the previous result further, so node counts are monotone.
    """
    shape, report = clean_shape(img)
    raw = voronoi_medial_axis(extract_contour(shape), sample_step)
    out = []
    g = raw
    cache: dict = {}
    for eps in sorted(thresholds):
        g = prune(g, shape, eps, cache)
        out.append(Candidate(float(eps), g, g.branch_count()))
    return shape, report, out


def choose_threshold(cands: list[Candidate]) -> int:
    """Index of the preferred candidate.

    Walk up the thresholds while the branch count stays within one of the next-smaller
    threshold's count; move the choice up only when the count actually changes, so equal
    candidates resolve to the smallest threshold.
    """
    chosen = 0
    for i in range(1, len(cands)):
        if abs(cands[i].branches - cands[i - 1].branches) > 1:
            break
        if cands[i].branches != cands[chosen].branches:
            chosen = i
    return chosen


def skeletonize_auto(
    img: np.ndarray, thresholds=THRESHOLDS, sample_step: float = 1.0
) -> AutoResult:
    shape, report, cands = skeleton_candidates(img, thresholds, sample_step)
    i = choose_threshold(cands)
    counts = [c.branches for c in cands]
    return AutoResult(
        graph=cands[i].graph,
        epsilon=cands[i].epsilon,
        candidates=cands,
        clean=report,
        needs_review=report.topology_changed or (max(counts) - min(counts) > 2),
        shape=shape,
    )


def skeletonize(img: np.ndarray, epsilon: float, sample_step: float = 1.0):
    """Clean, extract and prune at a single fixed threshold."""
    shape, report = clean_shape(img)
    raw = voronoi_medial_axis(extract_contour(shape), sample_step)
    return prune(raw, shape, epsilon), report
