"""Shared 2D geometry: rasters, contours, distance fields and medial-disk reconstruction.

Conventions used throughout the package:

* A binary image is a 2D ``numpy`` bool array indexed ``img[row, col]``; ``True`` is
  foreground (white, 255 on disk).
* Points are ``(x, y)`` with ``x = col`` and ``y = row``. Pixel ``(x, y)`` has its
  center at integer coordinates and covers the unit square around it.
* Point sets and contours are ``(N, 2)`` float arrays. A skeleton node is a row
  ``(x, y, r)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

EIGHT = np.ones((3, 3), dtype=bool)
FOUR = ndimage.generate_binary_structure(2, 1)


class ShapeError(ValueError):
    """Raised when a raster or contour is not a valid single simply connected shape."""

    def __init__(self, message: str, violation: str = "invalid"):
        super().__init__(message)
        self.violation = violation


@dataclass
class SkeletonGraph:
    """Medial points ``(x, y, r)`` joined by undirected edges (pairs of node indices)."""

    nodes: np.ndarray
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 3)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if not np.all(np.isfinite(self.nodes)):
            raise ValueError("skeleton nodes must be finite")
        if np.any(self.nodes[:, 2] < 0):
            raise ValueError("medial radii must be non-negative")
        if len(self.edges):
            if self.edges.min() < 0 or self.edges.max() >= len(self.nodes):
                raise ValueError("edge index out of range")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ValueError("self-loops are not allowed")

    def __len__(self):
        return len(self.nodes)

    @property
    def points(self) -> np.ndarray:
        return self.nodes[:, :2]

    @property
    def radii(self) -> np.ndarray:
        return self.nodes[:, 2]

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(len(self.nodes))]
        for i, j in self.edges.tolist():
            adj[i].append(j)
            adj[j].append(i)
        for a in adj:
            a.sort()
        return adj

    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=len(self.nodes))

    def is_connected(self) -> bool:
        n = len(self.nodes)
        if n == 0:
            return True
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        m = coo_matrix(
            (np.ones(len(self.edges)), (self.edges[:, 0], self.edges[:, 1])), shape=(n, n)
        )
        return connected_components(m, directed=False)[0] == 1

    def subgraph(self, keep) -> "SkeletonGraph":
        """Induced subgraph on the node indices ``keep`` (order preserved)."""
        keep = np.asarray(sorted(set(int(k) for k in keep)), dtype=np.int64)
        remap = -np.ones(len(self.nodes), dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        e = remap[self.edges] if len(self.edges) else self.edges
        e = e[(e >= 0).all(axis=1)] if len(e) else e
        return SkeletonGraph(self.nodes[keep], e)

    def branch_count(self) -> int:
        """Number of curves between joints and endpoints (degree-2 chains contracted).

        A lone node counts as one degenerate branch.
        """
        n = len(self.nodes)
        if n == 0:
            return 0
        if len(self.edges) == 0:
            return n
        deg = self.degree()
        adj = self.adjacency()
        seen: set[tuple[int, int]] = set()
        count = 0
        for s in range(n):
            if deg[s] == 2:
                continue
            for nb in adj[s]:
                if (s, nb) in seen:
                    continue
                count += 1
                prev, cur = s, nb
                seen.add((prev, cur))
                while deg[cur] == 2:
                    nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
                    prev, cur = cur, nxt
                    seen.add((prev, cur))
                seen.add((cur, prev))
        # pure cycles of degree-2 nodes have no anchor
        if count == 0 and len(self.edges):
            count = 1
        return count


# --- distance fields and morphology -------------------------------------------------


def distance_transform(img: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from every foreground pixel center to the nearest
    background pixel center. Pixels outside the image count as background."""
    img = np.asarray(img, dtype=bool)
    if not img.any():
        raise ShapeError("empty shape", "empty")
    padded = np.pad(img, 1, constant_values=False)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def morphology(img: np.ndarray, op: str, radius: int = 1) -> np.ndarray:
    img = np.asarray(img, dtype=bool)
    if op == "dilate":
        return ndimage.binary_dilation(img, structure=EIGHT, iterations=radius)
    if op == "erode":
        return ndimage.binary_erosion(img, structure=EIGHT, iterations=radius, border_value=0)
    raise ValueError(f"unknown morphology op {op!r}")


def count_holes(img: np.ndarray) -> int:
    """Background components (4-connected) not reachable from outside the image."""
    padded = np.pad(np.asarray(img, dtype=bool), 1, constant_values=False)
    _, n = ndimage.label(~padded, structure=FOUR)
    return n - 1


def components(img: np.ndarray) -> tuple[np.ndarray, int]:
    return ndimage.label(np.asarray(img, dtype=bool), structure=EIGHT)


def check_simple_shape(img: np.ndarray) -> None:
    img = np.asarray(img, dtype=bool)
    if not img.any():
        raise ShapeError("empty shape", "empty")
    _, n = components(img)
    if n != 1:
        raise ShapeError(f"expected one 8-connected component, found {n}", "components")
    holes = count_holes(img)
    if holes:
        raise ShapeError(f"shape has {holes} hole(s)", "holes")


# --- contours and polygons ----------------------------------------------------------

# crack edges of pixel (x, y) in corner coordinates, keyed by the neighbour that must
# be background; walking them keeps the shape on the left (positive signed area)
_CRACKS = (
    ((0, -1), (0, 0), (1, 0)),
    ((1, 0), (1, 0), (1, 1)),
    ((0, 1), (1, 1), (0, 1)),
    ((-1, 0), (0, 1), (0, 0)),
)


def extract_contour(img: np.ndarray, smooth: bool = False) -> np.ndarray:
    """Trace the outer pixel-edge boundary of a single hole-free shape.

    Returns the polygon vertices (not repeated at the end) in counter-clockwise order,
    i.e. with positive shoelace area in ``(x, y)`` coordinates. Vertices lie on pixel
    corners (half-integers). Diagonal-only contacts are followed, so an 8-connected
    shape yields one closed loop.

    With ``smooth`` the polygon instead joins the midpoints of consecutive boundary
    edges, which cuts every staircase corner; useful when the outline is rescaled.
    """
    img = np.asarray(img, dtype=bool)
    check_simple_shape(img)
    padded = np.pad(img, 1, constant_values=False)
    ys, xs = np.nonzero(img)
    out: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for (nx, ny), (ax, ay), (bx, by) in _CRACKS:
        bg = ~padded[ys + 1 + ny, xs + 1 + nx]
        for x, y in zip(xs[bg].tolist(), ys[bg].tolist()):
            out.setdefault((x + ax, y + ay), []).append((x + bx, y + by))
    start = min(out)
    total = sum(len(v) for v in out.values())
    prev = start
    cur = out[start][0] if len(out[start]) == 1 else _turn_right(None, start, out[start])
    loop = [start]
    used = 1
    while cur != start:
        loop.append(cur)
        nexts = out[cur]
        nxt = nexts[0] if len(nexts) == 1 else _turn_right(prev, cur, nexts)
        prev, cur = cur, nxt
        used += 1
        if used > total:
            raise ShapeError("contour tracing did not close", "trace")
    if used != total:
        raise ShapeError("boundary is not a single closed loop", "components")
    verts = np.asarray(loop, dtype=float)
    if smooth:
        verts = 0.5 * (verts + np.roll(verts, -1, axis=0))
    verts = _drop_collinear(verts)
    return verts - 0.5


def _turn_right(prev, cur, options):
    if prev is None:
        return min(options)
    dx, dy = cur[0] - prev[0], cur[1] - prev[1]
    want = (cur[0] + dy, cur[1] - dx)
    return want if want in options else options[0]


def _drop_collinear(verts: np.ndarray) -> np.ndarray:
    prev = np.roll(verts, 1, axis=0)
    nxt = np.roll(verts, -1, axis=0)
    d1 = verts - prev
    d2 = nxt - verts
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    dot = (d1 * d2).sum(axis=1)
    keep = ~((np.abs(cross) < 1e-12) & (dot > 0))
    return verts[keep] if keep.sum() >= 3 else verts


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise in x/y)."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def points_in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule; points exactly on an edge get an arbitrary but stable answer."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    px, py = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for ax, ay, bx, by in zip(x0, y0, x1, y1):
        if ay == by:
            continue
        crosses = (ay > py) != (by > py)
        if not crosses.any():
            continue
        xint = ax + (py[crosses] - ay) * (bx - ax) / (by - ay)
        inside[crosses] ^= px[crosses] < xint
    return inside


def segment_distance(points: np.ndarray, a, b) -> np.ndarray:
    """Euclidean distance from each point to the closed segment ``ab``."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    ll = float(d @ d)
    if ll == 0.0:
        return np.hypot(points[:, 0] - a[0], points[:, 1] - a[1])
    t = np.clip(((points - a) @ d) / ll, 0.0, 1.0)
    proj = a + t[:, None] * d
    return np.hypot(points[:, 0] - proj[:, 0], points[:, 1] - proj[:, 1])


def resample_polygon(poly: np.ndarray, step: float) -> np.ndarray:
    """Points along the closed polygon with spacing at most ``step``; vertices kept."""
    if step <= 0:
        raise ValueError("step must be positive")
    a = poly
    b = np.roll(poly, -1, axis=0)
    out = []
    for p, q in zip(a, b):
        length = float(np.hypot(*(q - p)))
        n = max(1, int(np.ceil(length / step - 1e-9)))
        t = np.arange(n)[:, None] / n
        out.append(p + t * (q - p))
    return np.concatenate(out)


def grid_in_polygon(poly: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """``points_in_polygon`` on the grid ``xs x ys`` (sorted axes), by scanline parity.

    Returns a ``(len(ys), len(xs))`` mask; agrees with ``points_in_polygon`` exactly.
    """
    poly = np.asarray(poly, dtype=float)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    a = poly
    b = np.roll(poly, -1, axis=0)
    rows, cols = [], []
    for (ax, ay), (bx, by) in zip(a, b):
        if ay == by:
            continue
        lo, hi = min(ay, by), max(ay, by)
        # rows with (ay > y) != (by > y), i.e. lo <= y < hi
        j = np.arange(np.searchsorted(ys, lo, "left"), np.searchsorted(ys, hi, "left"))
        if len(j) == 0:
            continue
        xint = ax + (ys[j] - ay) * (bx - ax) / (by - ay)
        rows.append(j)
        cols.append(np.searchsorted(xs, xint, "left"))  # samples with x < xint toggle
    toggles = np.zeros((len(ys), len(xs) + 1), dtype=np.int32)
    if rows:
        r = np.concatenate(rows)
        np.add.at(toggles, (r, np.zeros_like(r)), 1)
        np.add.at(toggles, (r, np.concatenate(cols)), 1)
    return (np.cumsum(toggles, axis=1)[:, :-1] % 2).astype(bool)


def rasterize_polygon(poly: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Pixels whose centers fall inside the polygon."""
    h, w = shape
    return grid_in_polygon(poly, np.arange(w, dtype=float), np.arange(h, dtype=float))


# --- point-set distances ------------------------------------------------------------


def _as_points(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    if len(a) == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite coordinates")
    return a


def directed_hausdorff(a, b) -> float:
    """``max_{p in a} min_{q in b} |p - q|``."""
    a = _as_points(a, "first point set")
    b = _as_points(b, "second point set")
    d, _ = cKDTree(b).query(a)
    return float(d.max())


def hausdorff(a, b) -> float:
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def foreground_points(img: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(np.asarray(img, dtype=bool))
    return np.column_stack([xs, ys]).astype(float)


def coverage_gap(shape_img: np.ndarray, recon: np.ndarray) -> float:
    """One-sided Hausdorff from the shape's foreground pixels to the reconstruction's.

    Infinite when the reconstruction is empty but the shape is not.
    """
    shape_img = np.asarray(shape_img, dtype=bool)
    recon = np.asarray(recon, dtype=bool)
    if not shape_img.any():
        return 0.0
    if not recon.any():
        return float("inf")
    dist = ndimage.distance_transform_edt(~recon)
    return float(dist[shape_img].max())


# --- medial disk reconstruction -----------------------------------------------------


def swept_disk_distance(px, py, a, ra, b, rb):
    """Signed distance-like value of points to the union of disks swept from
    ``(a, ra)`` to ``(b, rb)`` with linearly interpolated radius.

    Negative or zero inside. Exactly the Euclidean signed distance outside the solid;
    inside it is ``min_t |p - c(t)| - r(t)``.
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    dx, dy = bx - ax, by - ay
    length = float(np.hypot(dx, dy))
    da = np.hypot(px - ax, py - ay) - ra
    db = np.hypot(px - bx, py - by) - rb
    if length < 1e-12 or abs(rb - ra) >= length:
        return np.minimum(da, db)
    ux, uy = dx / length, dy / length
    s = (px - ax) * ux + (py - ay) * uy
    q = np.abs((py - ay) * ux - (px - ax) * uy)
    k = (rb - ra) / length
    tau = np.clip(s + k * q / np.sqrt(1.0 - k * k), 0.0, length)
    return np.hypot(s - tau, q) - (ra + k * tau)


_INSIDE_TOL = 1e-9


def _solid_pixels(a, ra, b, rb, shape) -> np.ndarray:
    h, w = shape
    x0 = max(0, int(np.floor(min(a[0] - ra, b[0] - rb))))
    x1 = min(w - 1, int(np.ceil(max(a[0] + ra, b[0] + rb))))
    y0 = max(0, int(np.floor(min(a[1] - ra, b[1] - rb))))
    y1 = min(h - 1, int(np.ceil(max(a[1] + ra, b[1] + rb))))
    if x1 < x0 or y1 < y0:
        return np.zeros(0, dtype=np.int64)
    yy, xx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    inside = swept_disk_distance(xx, yy, a, ra, b, rb) <= _INSIDE_TOL
    return (yy[inside] * w + xx[inside]).astype(np.int64)


def _round_pixel(p, shape) -> np.ndarray:
    h, w = shape
    x = int(np.floor(p[0] + 0.5))
    y = int(np.floor(p[1] + 0.5))
    if 0 <= x < w and 0 <= y < h:
        return np.array([y * w + x], dtype=np.int64)
    return np.zeros(0, dtype=np.int64)


def primitive_pixels(g: SkeletonGraph, shape: tuple[int, int], cache: dict | None = None) -> list[np.ndarray]:
    """Flat pixel indices covered by each primitive of ``g``.

    The first ``len(g)`` entries are the node disks (each including the pixel the node
    rounds to, so zero-radius nodes still paint one pixel); the remaining entries are
    the edges, in ``g.edges`` order, as swept-disk solids. ``cache`` may be shared
    between graphs on the same canvas; it is keyed on primitive geometry.
    """
    cache = {} if cache is None else cache
    nodes = g.nodes
    prims = []
    for row in nodes:
        key = row.tobytes()
        if key not in cache:
            p = (row[0], row[1])
            cache[key] = np.union1d(_solid_pixels(p, row[2], p, row[2], shape), _round_pixel(p, shape))
        prims.append(cache[key])
    for i, j in g.edges:
        a, b = nodes[i], nodes[j]
        key = a.tobytes() + b.tobytes()
        if key not in cache:
            cache[key] = _solid_pixels(a[:2], a[2], b[:2], b[2], shape)
        prims.append(cache[key])
    return prims


def reconstruct_from_skeleton(g: SkeletonGraph, shape: tuple[int, int]) -> np.ndarray:
    """Raster union of node disks and edge-swept disks on an ``(height, width)`` canvas."""
    h, w = shape
    out = np.zeros(h * w, dtype=bool)
    for idx in primitive_pixels(g, shape):
        out[idx] = True
    return out.reshape(h, w)
