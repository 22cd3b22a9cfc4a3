"""End-to-end acceptance checks, one test per criterion.

Each test records a ``CRITERION k: PASS|FAIL ...`` line that is echoed in the terminal
summary, then asserts.
"""

import math
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

import oracles
from conftest import ACCEPTANCE_LINES, corpus_candidates
from skelbench import io, metrics, shapes
from skelbench.cli import main
from skelbench.datagen import SamplingConfig, render_skeleton_image, sample_point_cloud
from skelbench.geometry import (
    SkeletonGraph,
    coverage_gap,
    foreground_points,
    reconstruct_from_skeleton,
)
from skelbench.parametrize import (
    ParametricSkeleton,
    bezier_eval,
    build_tree,
    compute_wedf,
    fit_bezier,
    merge_branches,
)
from skelbench.skeletonize import skeletonize, skeletonize_auto
from test_skeletonize import dist_to_set, rect_axis


def report(k, ok, detail):
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def rel_close(a, b, tol=1e-9):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


# 1 ----------------------------------------------------------------------------------


def test_criterion_1_metric_oracles():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    bad = []

    def check(name, got, want):
        nonlocal worst
        err = abs(got - want) / max(1.0, abs(want))
        worst = max(worst, err)
        if not rel_close(got, want):
            bad.append((name, got, want))

    for _ in range(120):
        shape = tuple(rng.integers(1, 12, 2))
        a = rng.random(shape) < rng.random()
        b = rng.random(shape) < rng.random()
        check("f1", metrics.f1_pixel(a, b).f1, oracles.f1(a, b)[3])
    for _ in range(120):
        a = rng.uniform(-50, 50, (rng.integers(1, 25), 2))
        b = rng.uniform(-50, 50, (rng.integers(1, 25), 2))
        check("chamfer", metrics.chamfer(a, b).value, oracles.chamfer(a.tolist(), b.tolist()))
    for _ in range(120):
        x, y = rng.uniform(-20, 20, (2, 6, 3))
        check("msd", metrics.msd(x, y), oracles.msd(x.tolist(), y.tolist()))
        check("mbe", metrics.mbe(x), oracles.mbe(x.tolist()))
    for _ in range(120):
        v = [rng.uniform(0, 30, (6, 3)) for _ in range(rng.integers(1, 6))]
        w = [rng.uniform(0, 30, (6, 3)) for _ in range(rng.integers(1, 6))]
        check("D", metrics.parametric_distance(v, w).D,
              oracles.parametric_distance([b.tolist() for b in v], [b.tolist() for b in w]))

    # hand-computed examples, exact
    gt = np.array([[1, 0], [0, 1]], bool)
    pred = np.array([[1, 0], [1, 0]], bool)
    hand = [
        metrics.f1_pixel(pred, gt).f1 == 0.5,
        metrics.f1_pixel(np.zeros_like(gt), gt).f1 == 0.0,
        metrics.chamfer([[0, 0]], [[3, 4]]).value == 10,
        metrics.chamfer([[0, 0], [4, 0]], [[0, 0]]).value == 2,
        metrics.msd(np.arange(18.0).reshape(6, 3), np.arange(18.0).reshape(6, 3) + 1) == 3,
        metrics.mbe(np.column_stack([np.arange(6.0), np.zeros(6), np.zeros(6)])) == 1,
        metrics.mbe(np.column_stack([np.zeros(6), np.zeros(6), np.full(6, 2.0)])) == 4,
    ]
    b1 = np.column_stack([np.arange(6.0), np.zeros(6), np.zeros(6)])
    hand.append(metrics.parametric_distance([b1], [b1, b1]).D == 0.5)
    elapsed = time.perf_counter() - start
    ok = not bad and all(hand) and elapsed < 10
    report(1, ok, f"600 random instances, worst rel err {worst:.1e}, "
                  f"{sum(hand)}/{len(hand)} hand examples, {elapsed:.2f}s")


# 2 ----------------------------------------------------------------------------------


def test_criterion_2_disks():
    details, ok = [], True
    for r in (20, 30, 40, 50, 60):
        img = shapes.disk(r)
        start = time.perf_counter()
        res = skeletonize_auto(img)
        elapsed = time.perf_counter() - start
        d = metrics.chamfer(res.graph.points, [[128.0, 128.0]]).value
        ok &= d <= 2 and elapsed < 1
        details.append(f"R={r}: {d:.2f}px {elapsed:.2f}s")
    report(2, ok, "; ".join(details))


# 3 ----------------------------------------------------------------------------------


def test_criterion_3_rectangle():
    img = shapes.rectangle(100, 40)
    res = skeletonize_auto(img)
    pts = res.graph.points
    axis = rect_axis(100, 40)
    h = max(dist_to_set(pts, axis).max(), dist_to_set(axis, pts).max())
    t = build_tree(res.graph)
    curves = merge_branches(t, compute_wedf(t))
    ok = h <= 2 and len(curves) <= 5
    report(3, ok, f"Hausdorff {h:.2f}px, {len(curves)} curves, eps {res.epsilon:g}")


# 4 ----------------------------------------------------------------------------------


def test_criterion_4_pruning_guarantee():
    worst_ratio, ok, detail = 0.0, True, []
    for sid, shape, cands in corpus_candidates():
        counts = [len(c.graph) for c in cands]
        if any(b > a for a, b in zip(counts, counts[1:])):
            ok = False
            detail.append(f"{sid} counts {counts}")
        fg = foreground_points(shape)
        for c in cands:
            recon = reconstruct_from_skeleton(c.graph, shape.shape)
            gap = coverage_gap(shape, recon)
            # independent nearest-neighbour check of the same one-sided distance
            nn = cKDTree(foreground_points(recon)).query(fg)[0].max()
            if not math.isclose(gap, nn, abs_tol=1e-9) or gap > c.epsilon:
                ok = False
                detail.append(f"{sid} eps={c.epsilon:g} gap={gap:.2f}")
            worst_ratio = max(worst_ratio, gap / c.epsilon)
    report(4, ok, f"20 shapes x 3 thresholds, worst gap/eps {worst_ratio:.2f}"
                  + (f"; {detail[:3]}" if detail else ""))


# 5 ----------------------------------------------------------------------------------


def test_criterion_5_bump():
    plain, _ = skeletonize(shapes.rectangle(100, 40), 4)
    bumped, _ = skeletonize(shapes.rectangle(100, 40, bump=True), 4)
    d = metrics.chamfer(plain.points, bumped.points).value
    ok = plain.branch_count() == bumped.branch_count() and d <= 1
    report(5, ok, f"branches {plain.branch_count()} vs {bumped.branch_count()}, Chamfer {d:.3f}px")


# 6 ----------------------------------------------------------------------------------


def test_criterion_6_bezier_refit():
    rng = np.random.default_rng(6)
    worst, ends_exact = 0.0, True
    for _ in range(20):
        ctrl = oracles.random_bezier(rng)
        pts, _ = oracles.chord_length_samples(ctrl, 100)
        fit = fit_bezier(pts)
        res = np.linalg.norm(bezier_eval(fit.control, fit.params) - pts, axis=1)
        worst = max(worst, res.max())
        ends_exact &= np.array_equal(fit.control[0], pts[0]) and np.array_equal(fit.control[-1], pts[-1])
    lin_worst = 0.0
    for _ in range(20):
        a, b = rng.uniform(0, 100, (2, 3))
        a[2], b[2] = rng.uniform(1, 10, 2)
        s = np.sort(rng.uniform(0, 1, 100))
        s[0], s[-1] = 0, 1
        pts = a + s[:, None] * (b - a)
        fit = fit_bezier(pts)
        lin_worst = max(lin_worst, fit.max_error(pts))
    ok = worst < 1e-3 and ends_exact and lin_worst < 1e-6
    report(6, ok, f"quintic residual {worst:.1e}px, endpoints exact {bool(ends_exact)}, "
                  f"linear residual {lin_worst:.1e}")


# 7 ----------------------------------------------------------------------------------


def test_criterion_7_round_trips(tmp_path):
    rng = np.random.default_rng(7)
    trips = {}
    img = rng.random((40, 30)) < 0.5
    io.write_png(tmp_path / "a.png", img)
    io.write_png(tmp_path / "b.png", io.read_png(tmp_path / "a.png"))
    trips["png"] = (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()

    pts = rng.normal(scale=50, size=(200, 2))
    io.write_pts(tmp_path / "a.pts", pts, rng.integers(1, 3, 200))
    io.write_pts(tmp_path / "b.pts", *io.read_pts(tmp_path / "a.pts"))
    trips["pts"] = (tmp_path / "a.pts").read_bytes() == (tmp_path / "b.pts").read_bytes()

    g = corpus_candidates()[3][2][0].graph
    io.write_graph(tmp_path / "a.skel", g)
    io.write_graph(tmp_path / "b.skel", io.read_graph(tmp_path / "a.skel"))
    trips["graph"] = (tmp_path / "a.skel").read_bytes() == (tmp_path / "b.skel").read_bytes()

    ps = ParametricSkeleton([rng.normal(scale=30, size=(6, 3)) for _ in range(4)])
    io.write_parametric(tmp_path / "a.csv", ps)
    io.write_parametric(tmp_path / "b.csv", io.read_parametric(tmp_path / "a.csv"))
    trips["csv"] = (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    connected = inside = True
    n = 0
    for sid, shape, cands in corpus_candidates():
        for c in cands:
            raster = render_skeleton_image(c.graph, size=shape.shape[0])
            n += 1
            connected &= oracles.eight_connected(raster)
            inside &= not (raster & ~shape).any()
    ok = all(trips.values()) and connected and inside
    report(7, ok, f"round trips {trips}, {n} rasters 8-connected {bool(connected)}, "
                  f"inside shape {bool(inside)}")


# 8 ----------------------------------------------------------------------------------


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_8_determinism(tmp_path):
    src = tmp_path / "shapes"
    for k in range(2):
        io.write_png(src / f"rect-{k + 1}.png", shapes.rectangle(50 + 8 * k, 20, size=80))
        io.write_png(src / f"blob-{k + 1}.png", shapes.blob(k, size=80, base=25))
    io.write_png(src / "rect-3.png", shapes.rectangle(44, 24, size=80))
    io.write_png(src / "blob-3.png", shapes.ellipse(30, 14, angle=0.4, size=80))
    runs = []
    for name in ("a", "b"):
        code = main(["pipeline", "--in", str(src), "--out", str(tmp_path / name), "--seed", "3",
                     "--figures", "--jobs", "2"])
        assert code == 0
        runs.append(tree_bytes(tmp_path / name))
    same = runs[0] == runs[1]
    square = np.array([[0, 0], [10, 0], [10, 10], [0, 10]], float)
    count = len(sample_point_cloud(square, SamplingConfig(h=1.0, noise_kind="none")))
    ok = same and count == 121
    report(8, ok, f"{len(runs[0])} output files identical {same}; square cloud {count} points")


# 9 ----------------------------------------------------------------------------------


def test_criterion_9_wedf():
    monotone, checked, worst = True, 0, 0.0
    for sid, shape, cands in corpus_candidates():
        for c in cands:
            t = build_tree(c.graph)
            w = compute_wedf(t)
            checked += 1
            for v in range(len(w)):
                p = t.parent[v]
                if p >= 0 and w[v] > w[p]:
                    monotone = False
    for r in (5.0, 10.0, 20.0, 37.5):
        g = SkeletonGraph(np.array([[50.3, 40.7, r]]), np.zeros((0, 2), int))
        area = compute_wedf(build_tree(g))[0]
        worst = max(worst, abs(area - math.pi * r * r) / (math.pi * r * r))
    ok = monotone and worst <= 0.05
    report(9, ok, f"{checked} skeletons monotone {monotone}; single-disk rel err {worst:.3f}")
