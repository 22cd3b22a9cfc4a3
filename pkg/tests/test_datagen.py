import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

import oracles
from skelbench import shapes
from skelbench.datagen import (
    NON_SKELETAL,
    SKELETAL,
    RenderTransform,
    SamplingConfig,
    SplitError,
    digital_segment,
    label_skeleton_points,
    make_split,
    render_shape_image,
    render_skeleton_image,
    resample_cloud,
    sample_point_cloud,
    shape_seed,
    skeleton_distance,
)
from skelbench.geometry import ShapeError, SkeletonGraph, extract_contour
from skelbench.metrics import chamfer

SQUARE = np.array([[0, 0], [10, 0], [10, 10], [0, 10]], float)


# --- shape renders ------------------------------------------------------------------


def test_render_square_fills_target():
    img, tf = render_shape_image(SQUARE)
    assert img.shape == (256, 256)
    ys, xs = np.nonzero(img)
    assert (xs.min(), xs.max(), ys.min(), ys.max()) == (8, 247, 8, 247)
    assert img.sum() == 240 * 240


def test_render_elongated_rectangle():
    img, _ = render_shape_image(np.array([[0, 0], [100, 0], [100, 4], [0, 4]], float))
    ys, xs = np.nonzero(img)
    assert (xs.min(), xs.max()) == (8, 247)
    # centered vertically within a pixel of the canvas middle
    assert abs((ys.min() + ys.max()) / 2 - 127.5) <= 0.5
    assert abs((ys.max() - ys.min() + 1) - 240 * 4 / 100) <= 1


def test_render_deterministic_and_transform():
    c = extract_contour(shapes.star(5, 60, 25))
    a, tf = render_shape_image(c)
    b, _ = render_shape_image(c)
    assert np.array_equal(a, b)
    mapped = tf.apply(c)
    assert math.isclose(mapped[:, 0].min(), 7.5) or math.isclose(mapped[:, 1].min(), 7.5)


def test_render_degenerate():
    with pytest.raises(ShapeError):
        render_shape_image(np.array([[0, 0], [5, 5], [10, 10]], float))


# --- skeleton renders ---------------------------------------------------------------


def test_skeleton_raster_examples():
    one = render_skeleton_image(SkeletonGraph([[5, 6, 1]]), size=16)
    assert one.sum() == 1 and one[6, 5]
    row = render_skeleton_image(SkeletonGraph([[2, 3, 1], [12, 3, 1]], [[0, 1]]), size=16)
    assert row.sum() == 11 and row[3, 2:13].all()
    diag = render_skeleton_image(SkeletonGraph([[0, 0, 1], [5, 5, 1]], [[0, 1]]), size=16)
    assert sorted(zip(*np.nonzero(diag))) == [(k, k) for k in range(6)]
    assert oracles.eight_connected(diag)


def test_skeleton_raster_errors():
    with pytest.raises(ValueError):
        render_skeleton_image(SkeletonGraph(np.zeros((0, 3))))
    with pytest.raises(ValueError):
        render_skeleton_image(SkeletonGraph([[300, 5, 1]]))
    g = SkeletonGraph([[100, 100, 1]])
    with pytest.raises(ValueError):
        render_skeleton_image(g, RenderTransform(3.0, 0, 0))


@given(st.tuples(*[st.floats(0, 40, allow_nan=False)] * 4))
@example((0.4, 3.6, 2.675, 0.5125))  # rounded deltas tie while the true slope is steep
def test_digital_segment_connected_and_on_segment(coords):
    x0, y0, x1, y1 = coords
    pix = digital_segment((x0, y0), (x1, y1))
    img = np.zeros((42, 42), bool)
    img[pix[:, 1], pix[:, 0]] = True
    ends = {tuple(np.floor(np.array(p) + 0.5).astype(int)) for p in ((x0, y0), (x1, y1))}
    assert ends <= set(map(tuple, pix.tolist()))
    assert oracles.eight_connected(img)
    # each pixel square meets the segment
    for x, y in pix:
        assert oracles.point_segment((x, y), (x0, y0), (x1, y1)) <= math.sqrt(0.5) + 1e-9
    n = max(abs(round(x1) - round(x0)), abs(round(y1) - round(y0))) + 1
    assert n - 1 <= len(pix) <= n + 2


@settings(max_examples=30)
@given(st.lists(st.tuples(st.floats(20, 230), st.floats(20, 230), st.floats(0, 5)), min_size=1,
                max_size=12), st.integers(0, 10**6))
def test_skeleton_raster_of_tree_is_connected(nodes, seed):
    rng = np.random.default_rng(seed)
    edges = [[int(rng.integers(0, k)), k] for k in range(1, len(nodes))]
    img = render_skeleton_image(SkeletonGraph(nodes, edges))
    assert oracles.eight_connected(img)


# --- point clouds -------------------------------------------------------------------


def test_square_cloud_counts():
    pts = sample_point_cloud(SQUARE, SamplingConfig(noise_kind="none"))
    assert len(pts) == 121
    expected = {(x, y) for x in range(11) for y in range(11)}
    assert {tuple(map(float, p)) for p in pts} == {tuple(map(float, p)) for p in expected}


def test_zero_noise_matches_none():
    a = sample_point_cloud(SQUARE, SamplingConfig(noise_kind="none"))
    b = sample_point_cloud(SQUARE, SamplingConfig(noise_kind="uniform", noise_scale=0.0))
    assert np.array_equal(a, b)


def test_noise_seed_and_bounds():
    cfg = SamplingConfig(h=0.5, noise_scale=0.25, seed=7)
    base = sample_point_cloud(SQUARE, SamplingConfig(h=0.5, noise_kind="none"))
    a = sample_point_cloud(SQUARE, cfg)
    b = sample_point_cloud(SQUARE, cfg)
    c = sample_point_cloud(SQUARE, SamplingConfig(h=0.5, noise_scale=0.25, seed=8))
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.abs(a - base).max() <= 0.25 * 0.5


def test_gaussian_noise_std():
    base = sample_point_cloud(SQUARE * 10, SamplingConfig(noise_kind="none"))
    g = sample_point_cloud(SQUARE * 10, SamplingConfig(noise_kind="gaussian", noise_scale=0.3, seed=1))
    assert abs(np.std(g - base) - 0.3) < 0.02


def test_sampling_config_validation():
    with pytest.raises(ValueError):
        SamplingConfig(h=0)
    with pytest.raises(ValueError):
        SamplingConfig(noise_scale=-1)
    with pytest.raises(ValueError):
        SamplingConfig(noise_kind="salt")


def test_sample_grid_step():
    pts = sample_point_cloud(SQUARE, SamplingConfig(h=2.0, noise_kind="none"))
    assert len(pts) == 36


# --- resampling ---------------------------------------------------------------------


def test_resample_identity_and_subsample(rng):
    p = rng.uniform(0, 10, (200, 2))
    assert np.array_equal(resample_cloud(p, 1.0), p)
    half = resample_cloud(p, 0.5, seed=3)
    assert len(half) == 100
    assert {tuple(q) for q in half} <= {tuple(q) for q in p}
    assert np.array_equal(half, resample_cloud(p, 0.5, seed=3))


def test_resample_augment(rng):
    p = rng.uniform(0, 10, (100, 2))
    big = resample_cloud(p, 2.0, seed=1, jitter=0.25)
    assert len(big) == 200
    assert chamfer(p, big).value <= 0.25 * math.sqrt(2)
    assert np.array_equal(big[:100], p)


def test_resample_errors():
    with pytest.raises(ValueError):
        resample_cloud(np.zeros((3, 2)), 0)
    with pytest.raises(ValueError):
        resample_cloud(np.zeros((0, 2)), 2)


@given(st.integers(1, 60), st.floats(0.05, 3.0))
def test_resample_size(n, f):
    p = np.arange(2.0 * n).reshape(n, 2)
    assert len(resample_cloud(p, f)) == math.ceil(f * n - 1e-9)


# --- labelling ----------------------------------------------------------------------


def test_label_basic():
    g = SkeletonGraph([[5, 5, 2], [15, 5, 2]], [[0, 1]])
    lab = label_skeleton_points([[5, 5], [10, 5.9], [10, 15], [30, 30]], g, h=1.0)
    assert lab.tolist() == [SKELETAL, SKELETAL, NON_SKELETAL, NON_SKELETAL]


def test_label_empty_skeleton(caplog):
    lab = label_skeleton_points([[0, 0], [1, 1]], SkeletonGraph(np.zeros((0, 3))))
    assert lab.tolist() == [NON_SKELETAL] * 2
    assert "empty skeleton" in caplog.text


def test_label_rectangle_against_brute_force():
    # analytic axis of the 100x40 block [0,100]x[0,40]
    nodes = [[20, 20, 20], [80, 20, 20], [0, 0, 0], [0, 40, 0], [100, 0, 0], [100, 40, 0]]
    g = SkeletonGraph(nodes, [[0, 1], [0, 2], [0, 3], [1, 4], [1, 5]])
    rect = np.array([[0, 0], [100, 0], [100, 40], [0, 40]], float)
    cloud = sample_point_cloud(rect, SamplingConfig(seed=5))
    lab = label_skeleton_points(cloud, g, h=1.0)
    segs = [(nodes[i][:2], nodes[j][:2]) for i, j in g.edges]
    brute = np.array([min(oracles.point_segment(p, a, b) for a, b in segs) for p in cloud])
    assert (lab == SKELETAL).any()
    assert np.all(brute[lab == SKELETAL] <= 1.0)
    assert np.array_equal(lab == SKELETAL, brute <= 1.0)


def test_skeleton_distance_matches_brute_force(rng):
    nodes = rng.uniform(0, 30, (6, 3))
    g = SkeletonGraph(nodes, [[0, 1], [1, 2], [1, 3], [3, 4], [4, 5]])
    pts = rng.uniform(-5, 35, (300, 2))
    fast = skeleton_distance(pts, g, cutoff=4.0)
    segs = [(nodes[i][:2], nodes[j][:2]) for i, j in g.edges]
    brute = np.array([min(oracles.point_segment(p, a, b) for a, b in segs) for p in pts])
    near = brute <= 4.0
    assert np.allclose(fast[near], brute[near], atol=1e-12)
    assert np.all(np.isinf(fast[~near]))


# --- splits -------------------------------------------------------------------------


def index(classes, per):
    return [(f"c{c}-{k}", f"c{c}") for c in range(classes) for k in range(per)]


def test_split_totals():
    split = make_split(index(90, 20), (0.706, 0.14, 0.154), seed=1)
    counts = Counter(s for _, s in split.values())
    total = 1800
    assert abs(counts["val"] - 0.14 * total) <= 1
    assert abs(counts["test"] - 0.154 * total) <= 1
    assert abs(counts["train"] - 0.706 * total) <= 1
    for c in range(90):
        parts = {split[f"c{c}-{k}"][1] for k in range(20)}
        assert {"val", "test"} <= parts


def test_split_deterministic_and_seeded():
    a = make_split(index(5, 10), seed=3)
    assert a == make_split(list(reversed(index(5, 10))), seed=3)
    assert a != make_split(index(5, 10), seed=4)


def test_split_small_class():
    with pytest.raises(SplitError, match="lonely"):
        make_split(index(3, 5) + [("x-1", "lonely")])


@given(st.lists(st.integers(3, 30), min_size=1, max_size=12), st.integers(0, 100))
def test_split_partition(sizes, seed):
    idx = [(f"k{c}-{i}", f"k{c}") for c, n in enumerate(sizes) for i in range(n)]
    split = make_split(idx, seed=seed)
    assert set(split) == {sid for sid, _ in idx}
    for c in range(len(sizes)):
        parts = [split[f"k{c}-{i}"][1] for i in range(sizes[c])]
        assert "val" in parts and "test" in parts


def test_shape_seed_stable():
    assert shape_seed(1, "a") == shape_seed(1, "a")
    assert shape_seed(1, "a") != shape_seed(1, "b")
    assert shape_seed(1, "a") != shape_seed(2, "a")
