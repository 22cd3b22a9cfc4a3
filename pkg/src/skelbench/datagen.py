"""Dataset generation in the three modalities: pixels, points and parametric curves."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (
    ShapeError,
    SkeletonGraph,
    grid_in_polygon,
    points_in_polygon,
    polygon_area,
    resample_polygon,
)

log = logging.getLogger(__name__)

IMAGE_SIZE = 256
MARGIN = 8
SUPERSAMPLE = 3
NOISE_SCALE = 0.25
# split sizes of the released benchmark: 1218 / 241 / 266 of 1725 shapes
SPLIT_RATIOS = (1218 / 1725, 241 / 1725, 266 / 1725)
SKELETAL, NON_SKELETAL = 1, 2


def shape_seed(seed: int, shape_id: str) -> int:
    """64-bit seed for one shape's random stream; independent of processing order."""
    digest = hashlib.sha256(shape_id.encode("utf-8")).digest()
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int.from_bytes(digest[:8], "little")])
    return int(ss.generate_state(1, np.uint64)[0])


# --- pixel renders ------------------------------------------------------------------


@dataclass(frozen=True)
class RenderTransform:
    """Maps source coordinates to render coordinates: ``p' = scale * p + offset``."""

    scale: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.column_stack([p[:, 0] * self.scale + self.tx, p[:, 1] * self.scale + self.ty])

    def apply_graph(self, g: SkeletonGraph) -> SkeletonGraph:
        return SkeletonGraph(np.column_stack([self.apply(g.points), g.radii * self.scale]), g.edges)


def fit_transform(contour, size: int = IMAGE_SIZE, margin: int = MARGIN) -> RenderTransform:
    """Crop to the bounding box, scale the longer side to ``size - 2 * margin`` pixels
    and center."""
    c = np.asarray(contour, dtype=float)
    lo, hi = c.min(axis=0), c.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0 or abs(polygon_area(c)) < 1e-9:
        raise ShapeError("degenerate contour", "degenerate")
    scale = (size - 2 * margin) / extent
    center = 0.5 * (lo + hi)
    mid = size / 2 - 0.5
    return RenderTransform(float(scale), float(mid - scale * center[0]), float(mid - scale * center[1]))


def render_shape_image(
    contour, size: int = IMAGE_SIZE, margin: int = MARGIN, supersample: int = SUPERSAMPLE
) -> tuple[np.ndarray, RenderTransform]:
    """Fill the contour into a ``size x size`` raster.

    Each output pixel takes a majority vote over ``supersample**2`` sub-pixel samples
    (use an odd count to avoid ties).
    """
    tf = fit_transform(contour, size, margin)
    poly = tf.apply(contour)
    n = size * supersample
    sub = (np.arange(n) + 0.5) / supersample - 0.5  # sub-pixel sample coordinates
    fine = grid_in_polygon(poly, sub, sub)
    votes = fine.reshape(size, supersample, size, supersample).sum(axis=(1, 3))
    return votes * 2 > supersample * supersample, tf


def digital_segment(p, q) -> np.ndarray:
    """8-connected pixels ``(x, y)`` along the segment ``pq``.

    One pixel per integer step of the dominant axis; the other coordinate is the
    segment's, rounded. Both end pixels are always included. Each chosen pixel contains
    a point of the segment.
    """
    (x0, y0), (x1, y1) = np.asarray(p, float), np.asarray(q, float)
    r0 = np.floor(np.array([x0, y0]) + 0.5).astype(int)
    r1 = np.floor(np.array([x1, y1]) + 0.5).astype(int)
    # dominant axis from the real slope, so the minor coordinate moves <= 1 per step
    if abs(x1 - x0) >= abs(y1 - y0):
        major = np.arange(min(r0[0], r1[0]), max(r0[0], r1[0]) + 1)
        if x1 == x0:
            minor = np.full(len(major), y0)
        else:
            u = np.clip(major, min(x0, x1), max(x0, x1))
            minor = y0 + (u - x0) * (y1 - y0) / (x1 - x0)
        out = np.column_stack([major, np.floor(minor + 0.5).astype(int)])
    else:
        major = np.arange(min(r0[1], r1[1]), max(r0[1], r1[1]) + 1)
        if y1 == y0:
            minor = np.full(len(major), x0)
        else:
            u = np.clip(major, min(y0, y1), max(y0, y1))
            minor = x0 + (u - y0) * (x1 - x0) / (y1 - y0)
        out = np.column_stack([np.floor(minor + 0.5).astype(int), major])
    # the node pixels themselves; each sits next to the nearest end of the run
    ends = [r for r in (r0, r1) if not (out == r).all(axis=1).any()]
    if ends:
        out = np.vstack([out, *ends])
    return out


def render_skeleton_image(
    g: SkeletonGraph, transform: RenderTransform | None = None, size: int = IMAGE_SIZE
) -> np.ndarray:
    """Draw every node and every edge of the skeleton as 8-connected digital lines."""
    if len(g) == 0:
        raise ValueError("empty skeleton")
    if transform is not None:
        g = transform.apply_graph(g)
    pix = np.floor(g.points + 0.5).astype(int)
    if pix.min() < 0 or pix.max() >= size:
        raise ValueError("skeleton node falls outside the canvas")
    img = np.zeros((size, size), dtype=bool)
    img[pix[:, 1], pix[:, 0]] = True
    for i, j in g.edges:
        seg = digital_segment(g.points[i], g.points[j])
        img[seg[:, 1], seg[:, 0]] = True
    return img


# --- point clouds -------------------------------------------------------------------


@dataclass
class SamplingConfig:
    h: float = 1.0
    noise_kind: str = "uniform"  # uniform | gaussian | none
    noise_scale: float = NOISE_SCALE
    seed: int = 0

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("grid step h must be positive")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")
        if self.noise_kind not in ("uniform", "gaussian", "none"):
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")


def _on_boundary(points, contour, tol=1e-9) -> np.ndarray:
    hit = np.zeros(len(points), dtype=bool)
    a = contour
    b = np.roll(contour, -1, axis=0)
    lo = np.minimum(a, b) - tol
    hi = np.maximum(a, b) + tol
    for (ax, ay), (bx, by), l, u in zip(a, b, lo, hi):
        sel = np.flatnonzero(
            (points[:, 0] >= l[0]) & (points[:, 0] <= u[0]) & (points[:, 1] >= l[1]) & (points[:, 1] <= u[1])
        )
        if len(sel) == 0:
            continue
        p = points[sel]
        cross = (bx - ax) * (p[:, 1] - ay) - (by - ay) * (p[:, 0] - ax)
        length = math.hypot(bx - ax, by - ay)
        hit[sel[np.abs(cross) <= tol * max(length, 1.0)]] = True
    return hit


def add_noise(points, kind: str, scale: float, rng: np.random.Generator) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if kind == "none" or scale == 0:
        return points.copy()
    if kind == "uniform":
        return points + rng.uniform(-scale, scale, size=points.shape)
    if kind == "gaussian":
        return points + rng.normal(0.0, scale, size=points.shape)
    raise ValueError(f"unknown noise kind {kind!r}")


def sample_point_cloud(contour, cfg: SamplingConfig | None = None) -> np.ndarray:
    """Boundary samples every ``h`` plus the lattice ``h * Z^2`` strictly inside.

    Noise is per coordinate: uniform on ``[-s*h, s*h]`` or Gaussian with standard
    deviation ``s*h``, where ``s`` is ``cfg.noise_scale``.
    """
    cfg = cfg or SamplingConfig()
    contour = np.asarray(contour, dtype=float)
    if len(contour) < 3 or abs(polygon_area(contour)) < 1e-9:
        raise ShapeError("degenerate contour", "degenerate")
    h = cfg.h
    boundary = resample_polygon(contour, h)
    lo = np.ceil(contour.min(axis=0) / h).astype(int)
    hi = np.floor(contour.max(axis=0) / h).astype(int)
    gy, gx = np.mgrid[lo[1] : hi[1] + 1, lo[0] : hi[0] + 1]
    grid = np.column_stack([gx.ravel(), gy.ravel()]) * h
    inside = points_in_polygon(grid, contour)
    grid = grid[inside]
    grid = grid[~_on_boundary(grid, contour)]
    pts = np.vstack([boundary, grid])
    rng = np.random.default_rng(cfg.seed)
    return add_noise(pts, cfg.noise_kind, cfg.noise_scale * h, rng)


def resample_cloud(points, factor: float, seed: int = 0, jitter: float = 0.25) -> np.ndarray:
    """Coarsen (``factor < 1``) by random subsampling or densify (``factor > 1``) with
    duplicates jittered uniformly by at most ``jitter`` per coordinate."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if factor <= 0:
        raise ValueError("resampling factor must be positive")
    if len(points) == 0:
        raise ValueError("empty point cloud")
    n = len(points)
    target = math.ceil(factor * n - 1e-9)
    rng = np.random.default_rng(seed)
    if target == n:
        return points.copy()
    if target < n:
        keep = np.sort(rng.choice(n, size=target, replace=False))
        return points[keep]
    extra = target - n
    src = np.concatenate([rng.permutation(n) for _ in range(math.ceil(extra / n))])[:extra]
    dup = points[src] + rng.uniform(-jitter, jitter, size=(extra, 2))
    return np.vstack([points, dup])


def skeleton_distance(points, g: SkeletonGraph, cutoff: float) -> np.ndarray:
    """Distance from each point to the skeleton's nodes and edge segments, exact up to
    ``cutoff``; farther points get ``inf``."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    out = np.full(len(points), np.inf)
    if len(points) == 0 or len(g) == 0:
        return out
    tree = cKDTree(points)
    pos = g.points
    for k, idx in enumerate(tree.query_ball_point(pos, cutoff)):
        if idx:
            idx = np.asarray(idx)
            d = np.hypot(*(points[idx] - pos[k]).T)
            out[idx] = np.minimum(out[idx], d)
    for i, j in g.edges:
        a, b = pos[i], pos[j]
        half = 0.5 * math.hypot(*(b - a))
        idx = tree.query_ball_point(0.5 * (a + b), half + cutoff)
        if not idx:
            continue
        idx = np.asarray(idx)
        p = points[idx]
        d = b - a
        ll = float(d @ d)
        t = np.clip(((p - a) @ d) / ll, 0, 1) if ll > 0 else np.zeros(len(p))
        dist = np.hypot(*(p - (a + t[:, None] * d)).T)
        out[idx] = np.minimum(out[idx], dist)
    out[out > cutoff] = np.inf
    return out


def label_skeleton_points(cloud, g: SkeletonGraph, h: float = 1.0, tau: float | None = None):
    """1 for points within ``tau`` (default ``h``) of the skeleton, 2 otherwise."""
    cloud = np.asarray(cloud, dtype=float).reshape(-1, 2)
    tau = h if tau is None else tau
    if len(g) == 0:
        log.warning("empty skeleton: every point labelled non-skeletal")
        return np.full(len(cloud), NON_SKELETAL, dtype=np.int64)
    d = skeleton_distance(cloud, g, tau)
    return np.where(d <= tau, SKELETAL, NON_SKELETAL).astype(np.int64)


# --- splits -------------------------------------------------------------------------


class SplitError(ValueError):
    pass


def _apportion(sizes: dict[str, int], ratio: float, total: int, room: dict[str, int]) -> dict[str, int]:
    """Per-class quotas of at least one, at most ``room``, summing to ``total`` where
    possible; largest remainders get the extra slots."""
    quota = {c: min(room[c], max(1, math.floor(ratio * n))) for c, n in sizes.items()}
    frac = {c: ratio * n - math.floor(ratio * n) for c, n in sizes.items()}
    diff = total - sum(quota.values())
    order = sorted(sizes, key=lambda c: (-frac[c], c))
    while diff > 0:
        grown = False
        for c in order:
            if diff == 0:
                break
            if quota[c] < room[c]:
                quota[c] += 1
                diff -= 1
                grown = True
        if not grown:
            break
    for c in reversed(order):
        if diff >= 0:
            break
        if quota[c] > 1:
            quota[c] -= 1
            diff += 1
    return quota


def make_split(index, ratios=SPLIT_RATIOS, seed: int = 0) -> dict[str, tuple[str, str]]:
    """Stratified train/val/test assignment ``{shape_id: (class, split)}``.

    Every class contributes at least one shape to validation and to test; the global
    split sizes follow ``ratios`` up to rounding.
    """
    ratios = np.asarray(ratios, dtype=float)
    if ratios.shape != (3,) or np.any(ratios < 0) or ratios.sum() <= 0:
        raise ValueError("ratios must be three non-negative numbers")
    ratios = ratios / ratios.sum()
    by_class: dict[str, list[str]] = {}
    for sid, cls in index:
        by_class.setdefault(cls, []).append(sid)
    small = sorted(c for c, ids in by_class.items() if len(ids) < 3)
    if small:
        raise SplitError(f"classes with fewer than 3 shapes: {', '.join(small)}")
    sizes = {c: len(ids) for c, ids in by_class.items()}
    total = sum(sizes.values())
    room = {c: n - 2 for c, n in sizes.items()}
    n_val = _apportion(sizes, ratios[1], round(ratios[1] * total), room)
    room = {c: sizes[c] - n_val[c] - 1 for c in sizes}
    n_test = _apportion(sizes, ratios[2], round(ratios[2] * total), room)

    out = {}
    for cls in sorted(by_class):
        ids = sorted(by_class[cls])
        rng = np.random.default_rng(shape_seed(seed, "split:" + cls))
        ids = [ids[k] for k in rng.permutation(len(ids))]
        v, t = n_val[cls], n_test[cls]
        for k, sid in enumerate(ids):
            part = "val" if k < v else "test" if k < v + t else "train"
            out[sid] = (cls, part)
    return out
