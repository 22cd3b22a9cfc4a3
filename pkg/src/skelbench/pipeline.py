"""End-to-end dataset generation: shape image in, all three modalities out."""

from __future__ import annotations

import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .datagen import (
    NOISE_SCALE,
    SPLIT_RATIOS,
    SamplingConfig,
    label_skeleton_points,
    make_split,
    render_shape_image,
    render_skeleton_image,
    sample_point_cloud,
    shape_seed,
)
from .geometry import SkeletonGraph, extract_contour
from .parametrize import TAU_EQ, TAU_WEDF, ParametricSkeleton, parametrize
from .skeletonize import clean_shape, skeletonize, skeletonize_auto

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    epsilon: str | float = "auto"
    h: float = 1.0
    noise_kind: str = "uniform"
    noise_scale: float = NOISE_SCALE
    tau_wedf: float = TAU_WEDF
    tau_eq: float = TAU_EQ
    ratios: tuple[float, float, float] = SPLIT_RATIOS
    seed: int = 0
    figures: bool = False
    figure_format: str = "svg"
    jobs: int = 1

    def __post_init__(self):
        if self.epsilon != "auto":
            self.epsilon = float(self.epsilon)
            if self.epsilon <= 0:
                raise ValueError("epsilon must be positive or 'auto'")
        for name in ("h", "tau_wedf", "tau_eq"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")


@dataclass
class ShapeResult:
    shape_id: str
    shape: np.ndarray = field(repr=False)
    graph: SkeletonGraph = field(repr=False)
    epsilon: float
    needs_review: bool
    skeleton_image: np.ndarray = field(repr=False)
    cloud: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    parametric: ParametricSkeleton = field(repr=False)


def skeletonize_shape(img: np.ndarray, epsilon="auto"):
    """Clean and skeletonize; returns ``(cleaned shape, graph, epsilon, needs_review)``."""
    if epsilon == "auto":
        res = skeletonize_auto(img)
        return res.shape, res.graph, res.epsilon, res.needs_review
    shape, report = clean_shape(img)
    g, _ = skeletonize(shape, float(epsilon))
    return shape, g, float(epsilon), report.topology_changed


def process_shape(shape_id: str, img: np.ndarray, cfg: PipelineConfig) -> ShapeResult:
    """Render to the standard canvas, skeletonize the render, and derive every modality
    from it, so the pixel, point and parametric ground truths share one frame."""
    src, report = clean_shape(img)
    render, _ = render_shape_image(extract_contour(src, smooth=True))
    shape, g, eps, review = skeletonize_shape(render, cfg.epsilon)
    sampling = SamplingConfig(cfg.h, cfg.noise_kind, cfg.noise_scale, shape_seed(cfg.seed, shape_id))
    cloud = sample_point_cloud(extract_contour(shape), sampling)
    return ShapeResult(
        shape_id=shape_id,
        shape=shape,
        graph=g,
        epsilon=eps,
        needs_review=review or report.topology_changed,
        skeleton_image=render_skeleton_image(g, size=shape.shape[0]),
        cloud=cloud,
        labels=label_skeleton_points(cloud, g, cfg.h),
        parametric=parametrize(g, cfg.tau_wedf, cfg.tau_eq),
    )


def write_result(res: ShapeResult, out: Path, cfg: PipelineConfig) -> None:
    sid = res.shape_id
    io.write_png(out / "png" / "shapes" / f"{sid}.png", res.shape)
    io.write_png(out / "png" / "skeletons" / f"{sid}.png", res.skeleton_image)
    io.write_pts(out / "pts" / f"{sid}.pts", res.cloud)
    io.write_pts(out / "pts" / f"{sid}.skel.pts", res.cloud[res.labels == 1])
    io.write_parametric(out / "csv" / f"{sid}.csv", res.parametric)
    io.write_graph(out / "skel" / f"{sid}.skel", res.graph)
    if cfg.figures:
        from .plotting import overlay_figure

        path = out / "figures" / f"{sid}.{cfg.figure_format}"
        overlay_figure(res.shape, res.graph, path, parametric=res.parametric)


def shape_class(shape_id: str) -> str:
    """Class name from ids like ``camel-12``; ids without a numeric suffix are their
    own class."""
    m = re.fullmatch(r"(.+?)[-_]\d+", shape_id)
    return m.group(1) if m else shape_id


def _run_one(args):
    path, out, cfg = args
    sid = path.stem
    try:
        res = process_shape(sid, io.read_png(path), cfg)
        write_result(res, out, cfg)
    except Exception as exc:  # reported per shape, the run goes on
        return sid, None, f"{type(exc).__name__}: {exc}"
    row = (res.epsilon, len(res.graph), res.graph.branch_count(), len(res.parametric), res.needs_review)
    return sid, row, None


@dataclass
class PipelineSummary:
    rows: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    split_error: str | None = None

    @property
    def ok(self) -> bool:
        return not self.errors and self.split_error is None


def run_pipeline(in_dir, out_dir, cfg: PipelineConfig, index: dict[str, str] | None = None):
    """Process every ``*.png`` under ``in_dir``; write modality trees, a per-shape
    report and the split manifest under ``out_dir``."""
    in_dir, out = Path(in_dir), Path(out_dir)
    files = sorted(in_dir.glob("*.png"))
    if not files:
        raise ValueError(f"no PNG files in {in_dir}")
    tasks = [(f, out, cfg) for f in files]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]

    summary = PipelineSummary()
    lines = ["shape_id\tclass\tepsilon\tnodes\tbranches\tcurves\tneeds_review\tstatus"]
    for sid, row, err in results:
        cls = (index or {}).get(sid, shape_class(sid))
        if err is not None:
            log.error("%s: %s", sid, err)
            summary.errors[sid] = err
            lines.append(f"{sid}\t{cls}\t\t\t\t\t\terror: {err}")
            continue
        summary.rows[sid] = (cls, *row)
        eps, nodes, branches, curves, review = row
        lines.append(f"{sid}\t{cls}\t{eps!r}\t{nodes}\t{branches}\t{curves}\t{str(review).lower()}\tok")
    io.write_atomic(out / "report.tsv", "\n".join(lines) + "\n")

    try:
        split = make_split([(sid, r[0]) for sid, r in summary.rows.items()], cfg.ratios, cfg.seed)
    except ValueError as exc:
        summary.split_error = str(exc)
        log.error("split: %s", exc)
    else:
        io.write_atomic(out / "split.tsv", io.format_manifest(split))
    return summary
