"""Static figures: skeleton overlays and score histograms."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402

from .geometry import SkeletonGraph, extract_contour  # noqa: E402
from .io import write_atomic  # noqa: E402
from .parametrize import ParametricSkeleton, bezier_eval  # noqa: E402

# fixed ids and no timestamps, so the same figure always gives the same bytes
plt.rcParams["svg.hashsalt"] = "skelbench"
_META = {"svg": {"Date": None}, "png": {"Software": None}, "pdf": {"CreationDate": None}}


def save(fig, path) -> None:
    import io as _io

    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "svg"
    buf = _io.BytesIO()
    fig.savefig(buf, format=fmt, metadata=_META.get(fmt), bbox_inches="tight")
    plt.close(fig)
    write_atomic(path, buf.getvalue())


def overlay_figure(
    shape: np.ndarray,
    g: SkeletonGraph,
    path,
    parametric: ParametricSkeleton | None = None,
    circles: int = 8,
) -> None:
    """Shape outline, skeleton polyline and a handful of inscribed circles."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(shape, cmap="gray_r", alpha=0.15, interpolation="nearest")
    c = extract_contour(shape)
    ax.plot(*np.vstack([c, c[:1]]).T, color="black", lw=0.8)
    pts = g.points
    if len(g.edges):
        ax.add_collection(LineCollection(pts[g.edges], colors="tab:red", linewidths=1.2))
    ax.plot(pts[:, 0], pts[:, 1], ".", color="tab:red", ms=2)
    if circles and len(g):
        order = np.argsort(-g.radii, kind="stable")
        pick = order[np.unique(np.linspace(0, len(order) - 1, min(circles, len(order))).astype(int))]
        for k in pick:
            ax.add_patch(Circle(pts[k], g.radii[k], fill=False, color="tab:blue", lw=0.6))
    if parametric is not None:
        t = np.linspace(0, 1, 64)
        for k, b in enumerate(parametric.branches):
            curve = bezier_eval(np.asarray(b), t)
            ax.plot(curve[:, 0], curve[:, 1], lw=2, alpha=0.6, color=f"C{k % 10}")
    ax.set_xlim(-0.5, shape.shape[1] - 0.5)
    ax.set_ylim(shape.shape[0] - 0.5, -0.5)
    ax.set_aspect("equal")
    ax.set_axis_off()
    save(fig, path)


def score_histogram(values, metric: str, path, bins: int = 20) -> None:
    values = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if len(values):
        ax.hist(values, bins=bins, color="tab:gray", edgecolor="black")
        ax.axvline(values.mean(), color="tab:red", lw=1, label=f"mean {values.mean():.4g}")
        ax.legend()
    ax.set_xlabel(metric)
    ax.set_ylabel("shapes")
    save(fig, path)
