"""Evaluation metrics for the pixel, point and parametric tracks."""

from __future__ import annotations

import csv
import io as _io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .parametrize import ParametricSkeleton


@dataclass(frozen=True)
class PixelReport:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp else 0.0

    @property
    def f1(self) -> float:
        # undefined when nothing matches; scored as 0
        if self.tp == 0:
            return 0.0
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r)


def f1_pixel(pred: np.ndarray, gt: np.ndarray) -> PixelReport:
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"image size mismatch: {pred.shape} vs {gt.shape}")
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return PixelReport(tp, fp, fn)


@dataclass(frozen=True)
class ChamferReport:
    a_to_b: float
    b_to_a: float

    @property
    def value(self) -> float:
        return self.a_to_b + self.b_to_a


def _mean_nn(a: np.ndarray, b: np.ndarray) -> float:
    d, _ = cKDTree(b).query(a)
    return math.fsum(d) / len(a)


def chamfer(a, b) -> ChamferReport:
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("undefined Chamfer on empty set")
    return ChamferReport(_mean_nn(a, b), _mean_nn(b, a))


def _ctrl(b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.size != 18:
        raise ValueError("a branch has six (x, y, r) control points")
    return b.reshape(6, 3)


def msd(b, bt) -> float:
    """Mean squared distance between corresponding (x, y, r) control points."""
    d = _ctrl(b) - _ctrl(bt)
    return float(np.sum(d * d) / 6)


def mbe(b) -> float:
    """Penalty for an unmatched branch: mean squared leg length of its control
    polygon plus mean squared radius."""
    c = _ctrl(b)
    legs = np.diff(c[:, :2], axis=0)
    return float(np.sum(legs * legs) / 5 + np.sum(c[:, 2] ** 2) / 6)


@dataclass
class ParametricReport:
    msd: list[float]
    mbe: list[float]
    n_b: int  # branches paired
    N_b: int  # branches in the longer vector
    unpaired: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def D(self) -> float:
        return math.fsum(self.msd + self.mbe) / self.N_b


def _branches(v) -> list[np.ndarray]:
    if isinstance(v, ParametricSkeleton):
        return [_ctrl(b) for b in v.branches]
    arr = np.asarray(v, dtype=float)
    if arr.size % 18:
        raise ValueError("parametric vector length must be a multiple of 18")
    return [b for b in arr.reshape(-1, 6, 3)]


def parametric_distance(v, vt) -> ParametricReport:
    """Positional pairing in canonical order; leftover branches of the longer vector
    are charged their missing-branch error. Normalised by the larger branch count."""
    a, b = _branches(v), _branches(vt)
    if not a or not b:
        raise ValueError("parametric distance needs at least one branch on each side")
    n_b, N_b = min(len(a), len(b)), max(len(a), len(b))
    longer = a if len(a) > len(b) else b
    rest = longer[n_b:]
    return ParametricReport(
        msd=[msd(a[j], b[j]) for j in range(n_b)],
        mbe=[mbe(x) for x in rest],
        n_b=n_b,
        N_b=N_b,
        unpaired=rest,
    )


# --- batch scoring ------------------------------------------------------------------

TRACKS = {"pixel": "f1", "point": "chamfer", "parametric": "D"}


@dataclass
class ScoreRow:
    shape_id: str
    metric: str
    value: float
    flags: str = ""


@dataclass
class BatchResult:
    track: str
    rows: list[ScoreRow]
    mean: float
    scored: int
    errors: int

    def to_csv(self) -> str:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["shape_id", "metric", "value", "flags"])
        for r in self.rows:
            w.writerow([r.shape_id, r.metric, _fmt(r.value), r.flags])
        flags = f"aggregate;n={self.scored};errors={self.errors}"
        w.writerow(["mean", TRACKS[self.track], _fmt(self.mean), flags])
        return buf.getvalue()


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def _gt_files(track: str, gt_dir: Path) -> list[Path]:
    if track == "pixel":
        files = sorted(gt_dir.glob("*.png"))
    elif track == "point":
        files = sorted(gt_dir.glob("*.skel.pts")) or sorted(gt_dir.glob("*.pts"))
    else:
        files = sorted(gt_dir.glob("*.csv"))
    return files


def _stem(track: str, path: Path) -> str:
    name = path.name
    for suffix in (".skel.pts", ".pts", ".png", ".csv"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def _skeleton_points(path) -> np.ndarray:
    from .io import read_pts

    pts, labels = read_pts(path)
    if labels is not None:
        pts = pts[labels == 1]
    return pts


def _score_one(args) -> ScoreRow:
    from .io import read_parametric, read_png

    track, sid, gt_path, pred_path = args
    metric = TRACKS[track]
    try:
        if track == "pixel":
            gt = read_png(gt_path)
            if not pred_path.exists():
                return ScoreRow(sid, metric, 0.0, "missing")
            return ScoreRow(sid, metric, f1_pixel(read_png(pred_path), gt).f1)
        if track == "point":
            gt = _skeleton_points(gt_path)
            if len(gt) == 0:
                raise ValueError("ground truth has no skeleton points")
            flag = "" if pred_path.exists() else "missing"
            pred = _skeleton_points(pred_path) if not flag else np.zeros((0, 2))
            if len(pred) == 0:
                # scored against the ground-truth centroid instead
                flag = flag or "empty"
                pred = gt.mean(axis=0, keepdims=True)
            return ScoreRow(sid, metric, chamfer(pred, gt).value, flag)
        gt = read_parametric(gt_path)
        if not gt.branches:
            raise ValueError("ground truth has no branches")
        flag = "" if pred_path.exists() else "missing"
        pred = read_parametric(pred_path) if not flag else ParametricSkeleton([])
        if not pred.branches:
            flag = flag or "empty"
            value = math.fsum(mbe(b) for b in gt.branches) / len(gt.branches)
            return ScoreRow(sid, metric, value, flag)
        return ScoreRow(sid, metric, parametric_distance(pred, gt).D, flag)
    except (OSError, ValueError) as exc:
        msg = str(exc).replace("\n", " ").replace(",", ";")
        return ScoreRow(sid, metric, float("nan"), f"error: {msg}")


def batch_evaluate(track: str, pred_dir, gt_dir, jobs: int = 1) -> BatchResult:
    """Score every ground-truth file against the same-named prediction.

    A missing prediction scores F1 = 0 (pixel), Chamfer against the ground-truth
    centroid (point), or the mean missing-branch error of all ground-truth branches
    (parametric), and is flagged. Unreadable files give an error row that is left
    out of the mean.
    """
    if track not in TRACKS:
        raise ValueError(f"unknown track {track!r}")
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    if not gt_dir.is_dir():
        raise ValueError(f"ground-truth directory not found: {gt_dir}")
    files = _gt_files(track, gt_dir)
    if not files:
        raise ValueError(f"no ground-truth files in {gt_dir}")
    tasks = [(track, _stem(track, f), f, pred_dir / f.name) for f in files]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_score_one, tasks))
    else:
        rows = [_score_one(t) for t in tasks]
    good = [r.value for r in rows if not r.flags.startswith("error")]
    mean = math.fsum(good) / len(good) if good else float("nan")
    return BatchResult(track, rows, mean, len(good), len(rows) - len(good))
