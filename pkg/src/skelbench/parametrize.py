"""Canonical parametric skeletons: salience, branch merging and degree-5 Bezier fits.

A pruned skeleton tree is rooted at its widest node. Each node gets a salience
value (the area covered by the medial disks of the subtree hanging below it), joints
decide which proto-branches continue through them, and each resulting curve is
fitted by a quintic Bezier in ``(x, y, r)``. Branches are then sorted by importance
and flattened into one vector, 18 numbers per branch.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.optimize import lsq_linear

from .geometry import SkeletonGraph, primitive_pixels

log = logging.getLogger(__name__)

DEGREE = 5
TAU_WEDF = 0.15
TAU_EQ = 0.05


class TopologyError(ValueError):
    pass


@dataclass
class SkeletonTree:
    graph: SkeletonGraph
    root: int
    parent: np.ndarray
    children: list[list[int]]
    order: list[int]  # breadth-first from the root

    @property
    def nodes(self) -> np.ndarray:
        return self.graph.nodes

    def degree(self) -> np.ndarray:
        return self.graph.degree()


def build_tree(g: SkeletonGraph) -> SkeletonTree:
    """Root a connected acyclic skeleton at its widest node (lowest index on ties)."""
    n = len(g)
    if n == 0:
        raise ValueError("empty skeleton")
    if len(g.edges) != n - 1 or not g.is_connected():
        if g.is_connected():
            raise TopologyError("shape is not simply connected")
        raise ValueError("skeleton graph is not connected")
    root = int(np.argmax(g.radii))
    adj = g.adjacency()
    parent = -np.ones(n, dtype=np.int64)
    children: list[list[int]] = [[] for _ in range(n)]
    seen = np.zeros(n, dtype=bool)
    seen[root] = True
    order = []
    queue = deque([root])
    while queue:
        v = queue.popleft()
        order.append(v)
        for u in adj[v]:
            if not seen[u]:
                seen[u] = True
                parent[u] = v
                children[v].append(u)
                queue.append(u)
    return SkeletonTree(g, root, parent, children, order)


def compute_wedf(t: SkeletonTree) -> np.ndarray:
    """Area (px^2) of the union of disks over each node's subtree.

    The subtree of a node includes the swept disks of the edges to its children, so a
    leaf's value is its own disk and the root's is the whole reconstruction. Areas are
    pixel counts on a grid with unit spacing.
    """
    return _wedf_and_sides(t)[0]


def _wedf_and_sides(t: SkeletonTree):
    """WEDF plus, for every child ``c`` of a joint or of the root ``j``, the area
    contributed from ``c``'s side alone: disk of ``j``, edge ``j-c`` and subtree of ``c``.
    """
    g = t.graph
    nodes = g.nodes
    lo = np.floor((nodes[:, :2] - nodes[:, 2:3]).min(axis=0)) - 1
    hi = np.ceil((nodes[:, :2] + nodes[:, 2:3]).max(axis=0)) + 1
    shifted = SkeletonGraph(np.column_stack([nodes[:, :2] - lo, nodes[:, 2]]), g.edges)
    w, h = (hi - lo + 1).astype(int)
    prims = primitive_pixels(shifted, (h, w))
    n = len(g)
    edge_of = {}
    for e, (i, j) in enumerate(g.edges.tolist()):
        edge_of[(i, j)] = edge_of[(j, i)] = e
    deg = t.degree()

    masks: dict[int, np.ndarray] = {}
    wedf = np.zeros(n)
    sides: dict[tuple[int, int], float] = {}
    for v in reversed(t.order):
        m = masks.pop(v, None)
        if m is None:
            m = np.zeros(h * w, dtype=bool)
        m[prims[v]] = True
        for c in t.children[v]:
            m[prims[n + edge_of[(v, c)]]] = True
        wedf[v] = m.sum()
        p = t.parent[v]
        if p < 0:
            continue
        if deg[p] >= 3 or p == t.root:
            extra = np.union1d(prims[p], prims[n + edge_of[(p, v)]])
            sides[(p, v)] = float(m.sum() + np.count_nonzero(~m[extra]))
        if p in masks:
            masks[p] |= m
        else:
            masks[p] = m
    return wedf, sides


# --- branch merging -----------------------------------------------------------------


def _proto_branches(t: SkeletonTree) -> list[list[int]]:
    """Chains between joints/endpoints, each oriented away from the root."""
    deg = t.degree()
    out = []
    starts = [v for v in t.order if v == t.root or deg[v] != 2]
    for s in starts:
        for c in t.children[s]:
            chain = [s, c]
            while deg[chain[-1]] == 2:
                chain.append(t.children[chain[-1]][0])
            out.append(chain)
    return out


def _gap(a: float, b: float) -> float:
    hi = max(a, b)
    return abs(a - b) / hi if hi > 0 else 0.0


def merge_branches(
    t: SkeletonTree, wedf: np.ndarray, tau_wedf: float = TAU_WEDF, tau_eq: float = TAU_EQ
) -> list[list[int]]:
    """Group proto-branches into curves that pass continuously through joints.

    Children of a joint are compared by the area on their side of it (joint disk,
    connecting edge and the child's subtree). The parent branch continues into the
    most salient child when that side carries nearly all of the joint's WEDF
    (relative gap at most ``tau_wedf``), i.e. the WEDF is continuous across the
    joint. Two top children within ``tau_eq`` of each other make the joint an end
    point for every curve meeting there. At a root joint the two most salient
    children are joined instead, under the same two tolerances.

    Returns node chains. Every tree edge lies on exactly one chain. Each chain starts at
    its more salient end.
    """
    if len(t.graph) == 1:
        return [[t.root]]
    protos = _proto_branches(t)
    starting: dict[int, list[int]] = {}
    ending: dict[int, int] = {}
    for k, ch in enumerate(protos):
        starting.setdefault(ch[0], []).append(k)
        ending[ch[-1]] = k
    deg = t.degree()
    _, sides = _wedf_and_sides(t)

    def side(k):
        ch = protos[k]
        return sides.get((ch[0], ch[1]), wedf[ch[1]])

    def ranked(joint):
        ks = starting.get(joint, [])
        return sorted(ks, key=lambda k: (-side(k), protos[k][1]))

    nxt: dict[int, int] = {}
    root_pair = None
    for j in t.order:
        if j == t.root and deg[j] == 2:
            # the root only splits a curve because chains are oriented away from it
            root_pair = tuple(ranked(j))
            continue
        if deg[j] < 3:
            continue
        kids = ranked(j)
        vals = [side(k) for k in kids]
        if j == t.root:
            if len(kids) >= 2 and _gap(vals[0], vals[1]) <= tau_wedf:
                if len(kids) == 2 or _gap(vals[1], vals[2]) > tau_eq:
                    root_pair = (kids[0], kids[1])
            continue
        if len(kids) >= 2 and _gap(vals[0], vals[1]) <= tau_eq:
            continue
        if _gap(wedf[j], vals[0]) <= tau_wedf:
            nxt[ending[j]] = kids[0]

    has_prev = set(nxt.values())

    def follow(k):
        chain = list(protos[k])
        while k in nxt:
            k = nxt[k]
            chain.extend(protos[k][1:])
        return chain

    curves = []
    used = set()
    if root_pair is not None:
        a, b = root_pair
        curves.append(follow(a)[::-1] + follow(b)[1:])
        used.update(root_pair)
    for k in range(len(protos)):
        if k in has_prev or k in used:
            continue
        curves.append(follow(k))

    out = []
    for ch in curves:
        head, tail = ch[0], ch[-1]
        kh = (-wedf[head], *t.graph.nodes[head, :2])
        kt = (-wedf[tail], *t.graph.nodes[tail, :2])
        out.append(ch if kh <= kt else ch[::-1])
    return out


# --- Bezier fitting -----------------------------------------------------------------


def bernstein(t: np.ndarray, degree: int = DEGREE) -> np.ndarray:
    t = np.asarray(t, dtype=float)[:, None]
    i = np.arange(degree + 1)[None, :]
    coef = np.array([comb(degree, k) for k in range(degree + 1)], dtype=float)[None, :]
    return coef * t**i * (1.0 - t) ** (degree - i)


def bezier_eval(ctrl: np.ndarray, t) -> np.ndarray:
    return bernstein(np.atleast_1d(t), len(ctrl) - 1) @ ctrl


def _derivatives(ctrl, t):
    d1 = DEGREE * (ctrl[1:] - ctrl[:-1])
    d2 = (DEGREE - 1) * (d1[1:] - d1[:-1])
    return bernstein(t, DEGREE - 1) @ d1, bernstein(t, DEGREE - 2) @ d2


def chord_params(points: np.ndarray) -> np.ndarray:
    """Cumulative chord length in ``(x, y, r)``, normalised to ``[0, 1]``."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0:
        return np.linspace(0.0, 1.0, len(points))
    return s / s[-1]


def solve_controls(points: np.ndarray, t: np.ndarray) -> np.ndarray:
    """End-interpolating least-squares control points for fixed parameters.

    When the interior is under-determined the solution closest to evenly spaced
    points on the end-to-end segment is returned. Radii are kept non-negative: if the
    free optimum has a negative radius, that column is re-solved with the bound.
    """
    p0, p5 = points[0], points[-1]
    uniform = p0 + np.linspace(0, 1, DEGREE + 1)[1:-1, None] * (p5 - p0)
    a = bernstein(t)
    inner = a[:, 1:-1]
    rhs = points - np.outer(a[:, 0], p0) - np.outer(a[:, -1], p5) - inner @ uniform
    delta, *_ = np.linalg.lstsq(inner, rhs, rcond=None)
    ctrl = np.vstack([p0, uniform + delta, p5])
    if ctrl[:, 2].min() < 0:
        res = lsq_linear(inner, rhs[:, 2], bounds=(-uniform[:, 2], np.inf), method="bvls")
        ctrl[1:-1, 2] = np.maximum(uniform[:, 2] + res.x, 0.0)
    return ctrl


@dataclass
class BezierFit:
    control: np.ndarray  # (6, 3) rows of (x, y, r)
    params: np.ndarray
    residual: float  # sum of squared 3D residuals at ``params``

    def max_error(self, points) -> float:
        return float(np.linalg.norm(bezier_eval(self.control, self.params) - points, axis=1).max())


def _sse(ctrl, points, t):
    return float(((bernstein(t) @ ctrl - points) ** 2).sum())


def fit_bezier(chain, refine: int = 0, tol: float = 1e-14) -> BezierFit:
    """Quintic Bezier through the chain's end points, least squares elsewhere.

    Samples are placed at normalised chord length. With ``refine > 0`` up to that many
    rounds of Newton reprojection of the parameters alternate with the linear solve
    (each round must lower the residual).
    """
    points = np.asarray(chain, dtype=float).reshape(-1, 3)
    if len(points) < 2:
        raise ValueError("need at least two points to fit a branch")
    t = chord_params(points)
    ctrl = solve_controls(points, t)
    err = _sse(ctrl, points, t)
    if len(points) > DEGREE + 1:
        for _ in range(refine):
            if err <= tol:
                break
            b = bernstein(t) @ ctrl
            d1, d2 = _derivatives(ctrl, t)
            diff = b - points
            num = (diff * d1).sum(axis=1)
            den = (d1 * d1).sum(axis=1) + (diff * d2).sum(axis=1)
            step = np.divide(num, den, out=np.zeros_like(num), where=den > 1e-12)
            for _ in range(8):
                t_new = np.clip(t - step, 0.0, 1.0)
                t_new[0], t_new[-1] = 0.0, 1.0
                ctrl_new = solve_controls(points, t_new)
                err_new = _sse(ctrl_new, points, t_new)
                if err_new < err * (1 - 1e-12):
                    break
                step = 0.5 * step
            else:
                break
            t, ctrl, err = t_new, ctrl_new, err_new
    return BezierFit(ctrl, t, _sse(ctrl, points, t))


# --- ordering -----------------------------------------------------------------------


@dataclass
class ParametricSkeleton:
    branches: list[np.ndarray] = field(default_factory=list)  # each (6, 3)
    importance: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.branches)

    def vector(self) -> np.ndarray:
        """Control points flattened branch by branch as ``x0 y0 r0 x1 y1 r1 ...``."""
        if not self.branches:
            return np.zeros(0)
        return np.concatenate([np.asarray(b, dtype=float).ravel() for b in self.branches])

    @classmethod
    def from_vector(cls, v) -> "ParametricSkeleton":
        v = np.asarray(v, dtype=float).ravel()
        if v.size % 18:
            raise ValueError("parametric vector length must be a multiple of 18")
        return cls([b.reshape(6, 3) for b in v.reshape(-1, 18)])


def order_and_flatten(branches, importance) -> ParametricSkeleton:
    """Sort branches by decreasing importance; ties go to the lexicographically smaller
    control-point sequence so the result does not depend on input order."""
    branches = [np.asarray(b, dtype=float).reshape(DEGREE + 1, 3) for b in branches]
    importance = [float(x) for x in importance]
    if len(branches) != len(importance):
        raise ValueError("one importance value per branch is required")
    idx = sorted(range(len(branches)), key=lambda k: (-importance[k], tuple(branches[k].ravel())))
    return ParametricSkeleton([branches[k] for k in idx], [importance[k] for k in idx])


def parametrize(
    g: SkeletonGraph, tau_wedf: float = TAU_WEDF, tau_eq: float = TAU_EQ
) -> ParametricSkeleton:
    """Full conversion of a pruned skeleton into its canonical parametric form."""
    tree = build_tree(g)
    wedf = compute_wedf(tree)
    curves = merge_branches(tree, wedf, tau_wedf, tau_eq)
    branches, importance = [], []
    for ch in curves:
        pts = g.nodes[ch]
        if len(pts) == 1:
            pts = np.vstack([pts, pts])
        branches.append(fit_bezier(pts).control)
        importance.append(float(wedf[ch].max()))
    return order_and_flatten(branches, importance)
