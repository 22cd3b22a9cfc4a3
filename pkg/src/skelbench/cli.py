"""Command-line interface.

Every option can also come from a TOML file given with ``--config``: top-level keys
apply to all subcommands, a ``[<subcommand>]`` table to one. Flags beat the file,
and ``SKELBENCH_SEED`` beats the file's seed.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import io
from .datagen import (
    IMAGE_SIZE,
    NOISE_SCALE,
    SPLIT_RATIOS,
    SamplingConfig,
    label_skeleton_points,
    make_split,
    render_shape_image,
    render_skeleton_image,
    resample_cloud,
    sample_point_cloud,
)
from .geometry import extract_contour
from .parametrize import TAU_EQ, TAU_WEDF, parametrize
from .skeletonize import clean_shape

log = logging.getLogger("skelbench")

DEFAULTS = {
    "epsilon": "auto",
    "h": 1.0,
    "noise_kind": "uniform",
    "noise_scale": NOISE_SCALE,
    "tau": None,
    "tau_wedf": TAU_WEDF,
    "tau_eq": TAU_EQ,
    "ratios": list(SPLIT_RATIOS),
    "seed": 0,
    "factor": 1.0,
    "jitter": 0.25,
    "size": IMAGE_SIZE,
    "figures": False,
    "figure_format": "svg",
    "jobs": 1,
}


class DataError(Exception):
    """Bad or unreadable input data; exit status 1."""


# --- option plumbing ----------------------------------------------------------------


def _add(p: argparse.ArgumentParser, *flags, key: str, help: str, **kw):
    default = DEFAULTS[key]
    if isinstance(default, list):
        shown = " ".join(f"{v:.6g}" for v in default)
    elif default is None:
        shown = "equal to h"
    else:
        shown = str(default).lower() if isinstance(default, bool) else str(default)
    p.add_argument(*flags, dest=key, default=None, help=f"{help} (default: {shown})", **kw)


def _epsilon(s: str):
    if s == "auto":
        return s
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'auto' or a positive number") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("epsilon must be positive")
    return v


def _positive(s: str) -> float:
    v = float(s)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _nonneg(s: str) -> float:
    v = float(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _opt_epsilon(p):
    _add(p, "--epsilon", key="epsilon", type=_epsilon,
         help="pruning threshold in px: auto picks among 2, 4 and 6 by branch-count stability")


def _opt_merge(p):
    _add(p, "--tau-wedf", key="tau_wedf", type=_positive,
         help="relative WEDF gap under which a curve continues through a junction")
    _add(p, "--tau-eq", key="tau_eq", type=_positive,
         help="relative WEDF gap under which two children count as equally important")


def _opt_sampling(p):
    _add(p, "--h", key="h", type=_positive, help="grid step of the point cloud in px")
    _add(p, "--noise", key="noise_kind", choices=("uniform", "gaussian", "none"),
         help="noise added to every point")
    _add(p, "--noise-scale", key="noise_scale", type=_nonneg,
         help="noise magnitude as a fraction of h (uniform half-width or gaussian std)")


def _opt_seed(p):
    _add(p, "--seed", key="seed", type=int, help="global random seed; SKELBENCH_SEED overrides the config file")


def _opt_jobs(p):
    _add(p, "--jobs", key="jobs", type=int, help="worker processes")


def _opt_figures(p):
    _add(p, "--figures", key="figures", action="store_const", const=True,
         help="also write overlay figures")
    _add(p, "--figure-format", key="figure_format", choices=("svg", "png"), help="figure file type")


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise DataError(f"config {path}: {exc}") from exc


def _resolve(args) -> None:
    """Fill unset options from config file, environment and built-in defaults."""
    conf = _load_config(args.config)
    section = conf.get(args.command, {})
    flat = {k.replace("-", "_"): v for k, v in conf.items() if not isinstance(v, dict)}
    flat.update({k.replace("-", "_"): v for k, v in section.items()})
    for key, default in DEFAULTS.items():
        if not hasattr(args, key) or getattr(args, key) is not None:
            continue
        if key == "seed" and os.environ.get("SKELBENCH_SEED"):
            try:
                value = int(os.environ["SKELBENCH_SEED"])
            except ValueError:
                raise DataError("SKELBENCH_SEED must be an integer") from None
        else:
            value = flat.get(key, default)
        setattr(args, key, value)
    if getattr(args, "jobs", 1) < 1:
        raise DataError("jobs must be at least 1")


# --- input helpers ------------------------------------------------------------------


def _expand(inputs, patterns) -> list[Path]:
    out = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            found = set()
            for pat in patterns:
                found.update(p.glob(pat))
            out.extend(sorted(found))
        else:
            out.append(p)
    return out


def _stem(path: Path) -> str:
    name = path.name
    for suffix in (".skel.pts", ".pts", ".skel", ".png", ".csv"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def _map(fn, tasks, jobs: int):
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def _report(results) -> int:
    """Print one line per item; return the number of failures."""
    failed = 0
    for name, info, err in results:
        if err:
            failed += 1
            log.error("%s: %s", name, err)
            print(f"{name}\terror\t{err}")
        else:
            print(f"{name}\tok\t{info}")
    return failed


# --- subcommands --------------------------------------------------------------------


def _skeletonize_one(task):
    from .pipeline import skeletonize_shape

    path, out, epsilon, figures, fmt = task
    name = _stem(path)
    try:
        shape, g, eps, review = skeletonize_shape(io.read_png(path), epsilon)
        io.write_graph(out / f"{name}.skel", g)
        if figures:
            from .plotting import overlay_figure

            overlay_figure(shape, g, out / f"{name}.{fmt}")
    except (ValueError, OSError) as exc:
        return name, None, str(exc)
    flag = "\tneeds_review" if review else ""
    return name, f"epsilon={eps!r}\tnodes={len(g)}{flag}", None


def cmd_skeletonize(args) -> int:
    out = Path(args.out)
    files = _expand(args.inputs, ["*.png"])
    tasks = [(f, out, args.epsilon, args.figures, args.figure_format) for f in files]
    return _report(_map(_skeletonize_one, tasks, args.jobs))


def _parametrize_one(task):
    path, out, tau_wedf, tau_eq = task
    name = _stem(path)
    try:
        ps = parametrize(io.read_graph(path), tau_wedf, tau_eq)
        io.write_parametric(out / f"{name}.csv", ps)
    except (ValueError, OSError) as exc:
        return name, None, str(exc)
    return name, f"branches={len(ps)}", None


def cmd_parametrize(args) -> int:
    out = Path(args.out)
    files = _expand(args.inputs, ["*.skel"])
    tasks = [(f, out, args.tau_wedf, args.tau_eq) for f in files]
    return _report(_map(_parametrize_one, tasks, args.jobs))


def cmd_rasterize(args) -> int:
    out = Path(args.out)
    results = []
    for path in _expand(args.inputs, ["*.skel", "*.png"]):
        name = _stem(path)
        try:
            if path.name.endswith(".skel"):
                img = render_skeleton_image(io.read_graph(path), size=args.size)
                kind = "skeleton"
            else:
                shape, _ = clean_shape(io.read_png(path))
                img, _ = render_shape_image(extract_contour(shape, smooth=True), size=args.size)
                kind = "shape"
            io.write_png(out / f"{name}.png", img)
            results.append((name, kind, None))
        except (ValueError, OSError) as exc:
            results.append((name, None, str(exc)))
    return _report(results)


def cmd_sample(args) -> int:
    from .datagen import shape_seed

    out = Path(args.out)
    results = []
    for path in _expand(args.inputs, ["*.png", "*.pts"]):
        name = _stem(path)
        seed = shape_seed(args.seed, name)
        try:
            if path.suffix == ".pts":
                pts, _ = io.read_pts(path)
                cloud = resample_cloud(pts, args.factor, seed, args.jitter)
            else:
                shape, _ = clean_shape(io.read_png(path))
                cfg = SamplingConfig(args.h, args.noise_kind, args.noise_scale, seed)
                cloud = sample_point_cloud(extract_contour(shape), cfg)
            io.write_pts(out / f"{name}.pts", cloud)
            results.append((name, f"points={len(cloud)}", None))
        except (ValueError, OSError) as exc:
            results.append((name, None, str(exc)))
    return _report(results)


def cmd_label(args) -> int:
    try:
        cloud, _ = io.read_pts(args.cloud)
        g = io.read_graph(args.skeleton)
    except (ValueError, OSError) as exc:
        raise DataError(str(exc)) from exc
    labels = label_skeleton_points(cloud, g, args.h, args.tau)
    out = Path(args.out)
    io.write_pts(out, cloud, labels)
    skel = out.with_name(_stem(out) + ".skel.pts")
    io.write_pts(skel, cloud[labels == 1])
    print(f"{_stem(out)}\tok\tskeletal={int((labels == 1).sum())}\ttotal={len(labels)}")
    return 0


def cmd_split(args) -> int:
    try:
        index = io.read_index(args.index)
        split = make_split(index, args.ratios, args.seed)
    except (ValueError, OSError) as exc:
        raise DataError(str(exc)) from exc
    io.write_atomic(args.out, io.format_manifest(split))
    counts = {k: sum(1 for _, s in split.values() if s == k) for k in ("train", "val", "test")}
    print("\t".join(f"{k}={v}" for k, v in counts.items()))
    return 0


def _evaluate(track):
    def run(args) -> int:
        from .metrics import batch_evaluate

        try:
            res = batch_evaluate(track, args.pred, args.gt, jobs=args.jobs)
        except (ValueError, OSError) as exc:
            raise DataError(str(exc)) from exc
        text = res.to_csv()
        if args.out:
            io.write_atomic(args.out, text)
        sys.stdout.write(text)
        if args.figure:
            from .metrics import TRACKS
            from .plotting import score_histogram

            score_histogram([r.value for r in res.rows], TRACKS[track], args.figure)
        return res.errors

    return run


def cmd_pipeline(args) -> int:
    from .pipeline import PipelineConfig, run_pipeline

    try:
        cfg = PipelineConfig(
            epsilon=args.epsilon, h=args.h, noise_kind=args.noise_kind, noise_scale=args.noise_scale,
            tau_wedf=args.tau_wedf, tau_eq=args.tau_eq, ratios=tuple(args.ratios), seed=args.seed,
            figures=bool(args.figures), figure_format=args.figure_format, jobs=args.jobs,
        )
        index = dict(io.read_index(args.index)) if args.index else None
        summary = run_pipeline(args.inp, args.out, cfg, index)
    except (ValueError, OSError) as exc:
        raise DataError(str(exc)) from exc
    for sid, row in summary.rows.items():
        cls, eps, nodes, branches, curves, review = row
        flag = "\tneeds_review" if review else ""
        print(f"{sid}\tok\tclass={cls}\tepsilon={eps!r}\tcurves={curves}{flag}")
    for sid, err in summary.errors.items():
        print(f"{sid}\terror\t{err}")
    if summary.split_error:
        print(f"split\terror\t{summary.split_error}")
    return 0 if summary.ok else 1


def cmd_render(args) -> int:
    from .plotting import overlay_figure, score_histogram

    try:
        if args.scores:
            import csv

            with open(args.scores, newline="") as fh:
                rows = [r for r in csv.DictReader(fh) if r["shape_id"] != "mean"]
            values = [float(r["value"]) for r in rows if r["value"]]
            metric = rows[0]["metric"] if rows else "score"
            score_histogram(values, metric, args.out)
        else:
            if not (args.shape and args.skeleton):
                raise DataError("render needs --shape and --skeleton, or --scores")
            shape, _ = clean_shape(io.read_png(args.shape))
            g = io.read_graph(args.skeleton)
            ps = io.read_parametric(args.parametric) if args.parametric else None
            overlay_figure(shape, g, args.out, parametric=ps)
    except (ValueError, OSError, KeyError) as exc:
        raise DataError(str(exc)) from exc
    print(f"{args.out}\tok")
    return 0


# --- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skelbench", description="Medial-axis dataset and evaluation toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, fn, help):
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("--config", help="TOML file with option values")
        p.set_defaults(func=fn)
        return p

    p = command("skeletonize", cmd_skeletonize, "Extract and prune skeletons from shape PNGs.")
    p.add_argument("inputs", nargs="+", help="PNG files or directories")
    p.add_argument("--out", required=True, help="output directory for .skel files")
    _opt_epsilon(p)
    _opt_figures(p)
    _opt_jobs(p)

    p = command("parametrize", cmd_parametrize, "Convert skeleton graphs into degree-5 Bezier branches.")
    p.add_argument("inputs", nargs="+", help=".skel files or directories")
    p.add_argument("--out", required=True, help="output directory for .csv files")
    _opt_merge(p)
    _opt_jobs(p)

    p = command("rasterize", cmd_rasterize,
                "Render .skel graphs as skeleton PNGs, or shape PNGs onto the standard canvas.")
    p.add_argument("inputs", nargs="+", help=".skel or .png files or directories")
    p.add_argument("--out", required=True, help="output directory")
    _add(p, "--size", key="size", type=int, help="canvas size in px")

    p = command("sample", cmd_sample, "Sample point clouds from shape PNGs, or resample .pts clouds.")
    p.add_argument("inputs", nargs="+", help=".png or .pts files or directories")
    p.add_argument("--out", required=True, help="output directory")
    _opt_sampling(p)
    _add(p, "--factor", key="factor", type=_positive, help="resampling factor for .pts inputs")
    _add(p, "--jitter", key="jitter", type=_nonneg, help="max displacement of duplicated points in px")
    _opt_seed(p)

    p = command("label", cmd_label, "Label cloud points near a skeleton as skeletal (1) or not (2).")
    p.add_argument("--cloud", required=True, help="input .pts")
    p.add_argument("--skeleton", required=True, help="input .skel")
    p.add_argument("--out", required=True, help="labelled .pts; the skeletal subset goes next to it as .skel.pts")
    _add(p, "--h", key="h", type=_positive, help="grid step of the cloud in px")
    _add(p, "--tau", key="tau", type=_positive, help="labelling distance in px")

    p = command("split", cmd_split, "Stratified train/val/test split of a shape index.")
    p.add_argument("--index", required=True, help="TSV of shape_id and class")
    p.add_argument("--out", required=True, help="split manifest path")
    _add(p, "--ratios", key="ratios", type=_nonneg, nargs=3, metavar=("TRAIN", "VAL", "TEST"),
         help="split proportions")
    _opt_seed(p)

    for track in ("pixel", "point", "parametric"):
        p = command(f"evaluate-{track}", _evaluate(track), f"Score {track}-track predictions against ground truth.")
        p.add_argument("--pred", required=True, help="prediction directory")
        p.add_argument("--gt", required=True, help="ground-truth directory")
        p.add_argument("--out", help="also write the scores CSV here")
        p.add_argument("--figure", help="write a histogram of the per-shape scores here (.svg or .png)")
        _opt_jobs(p)

    p = command("pipeline", cmd_pipeline, "Generate the full dataset from a directory of shape PNGs.")
    p.add_argument("--in", dest="inp", required=True, help="directory of shape PNGs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--index", help="TSV of shape_id and class (default: class is the id before '-N')")
    _opt_epsilon(p)
    _opt_sampling(p)
    _opt_merge(p)
    _add(p, "--ratios", key="ratios", type=_nonneg, nargs=3, metavar=("TRAIN", "VAL", "TEST"),
         help="split proportions")
    _opt_seed(p)
    _opt_figures(p)
    _opt_jobs(p)

    p = command("render", cmd_render, "Draw a skeleton overlay or a score histogram.")
    p.add_argument("--shape", help="shape PNG")
    p.add_argument("--skeleton", help=".skel file")
    p.add_argument("--parametric", help="parametric .csv to draw on top")
    p.add_argument("--scores", help="scores CSV from an evaluate command")
    p.add_argument("--out", required=True, help="figure path (.svg or .png)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        _resolve(args)
        failed = args.func(args)
    except DataError as exc:
        log.error("%s", exc)
        return 1
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
