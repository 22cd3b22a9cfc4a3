"""Readers and writers for every on-disk format the toolkit produces.

Numbers are written with ``repr`` so that reading a file and writing it back gives
the same bytes. Writes go through a temporary file and ``os.replace`` so a crashed
run never leaves half-written outputs.
"""

from __future__ import annotations

import io as _io
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import SkeletonGraph
from .parametrize import ParametricSkeleton


class FormatError(ValueError):
    pass


def _num(v) -> str:
    v = float(v)
    if v == 0.0:
        v = 0.0  # no negative zero
    return repr(v)


def write_atomic(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- PNG ----------------------------------------------------------------------------


def read_png(path) -> np.ndarray:
    """Load an image as a boolean raster; anything brighter than mid-grey is foreground."""
    try:
        with Image.open(path) as im:
            gray = np.asarray(im.convert("L"))
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: unreadable image ({exc})") from exc
    return gray > 127


def png_bytes(img: np.ndarray) -> bytes:
    arr = np.where(np.asarray(img, dtype=bool), 255, 0).astype(np.uint8)
    buf = _io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def write_png(path, img: np.ndarray) -> None:
    write_atomic(path, png_bytes(img))


# --- skeleton graphs ----------------------------------------------------------------


def format_graph(g: SkeletonGraph) -> str:
    lines = [f"nodes {len(g.nodes)} edges {len(g.edges)}"]
    lines += [" ".join(_num(v) for v in row) for row in g.nodes]
    lines += [f"{int(i)} {int(j)}" for i, j in g.edges]
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> SkeletonGraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty skeleton file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "nodes" or head[2] != "edges":
        raise FormatError(f"bad skeleton header: {lines[0]!r}")
    n, m = int(head[1]), int(head[3])
    if len(lines) != 1 + n + m:
        raise FormatError(f"expected {n} node and {m} edge lines, found {len(lines) - 1} lines")
    try:
        nodes = np.array([[float(v) for v in ln.split()] for ln in lines[1 : 1 + n]]).reshape(n, 3)
        edges = np.array([[int(v) for v in ln.split()] for ln in lines[1 + n :]]).reshape(m, 2)
    except ValueError as exc:
        raise FormatError(f"malformed skeleton line: {exc}") from exc
    return SkeletonGraph(nodes, edges)


def write_graph(path, g: SkeletonGraph) -> None:
    write_atomic(path, format_graph(g))


def read_graph(path) -> SkeletonGraph:
    return parse_graph(Path(path).read_text())


# --- point clouds -------------------------------------------------------------------


def format_pts(points, labels=None) -> str:
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if labels is None:
        rows = [f"{_num(x)} {_num(y)}" for x, y in points]
    else:
        rows = [f"{_num(x)} {_num(y)} {int(lab)}" for (x, y), lab in zip(points, labels)]
    return "".join(r + "\n" for r in rows)


def parse_pts(text: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Points and, when a third column is present, integer labels."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows:
        return np.zeros((0, 2)), None
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() not in (2, 3):
        raise FormatError("each .pts line must have 2 or 3 columns, consistently")
    try:
        pts = np.array([[float(r[0]), float(r[1])] for r in rows])
        labels = np.array([int(r[2]) for r in rows]) if len(rows[0]) == 3 else None
    except ValueError as exc:
        raise FormatError(f"malformed .pts line: {exc}") from exc
    return pts, labels


def write_pts(path, points, labels=None) -> None:
    write_atomic(path, format_pts(points, labels))


def read_pts(path):
    return parse_pts(Path(path).read_text())


# --- parametric CSV -----------------------------------------------------------------


def format_parametric(ps: ParametricSkeleton) -> str:
    return "".join(
        "\t".join(_num(v) for v in np.asarray(b).ravel()) + "\n" for b in ps.branches
    )


def parse_parametric(text: str) -> ParametricSkeleton:
    branches = []
    for k, ln in enumerate(text.splitlines()):
        if not ln.strip():
            continue
        fields = ln.rstrip("\n").split("\t")
        if len(fields) != 18:
            raise FormatError(f"row {k + 1}: expected 18 tab-separated fields, got {len(fields)}")
        try:
            branches.append(np.array([float(v) for v in fields]).reshape(6, 3))
        except ValueError as exc:
            raise FormatError(f"row {k + 1}: {exc}") from exc
    return ParametricSkeleton(branches)


def write_parametric(path, ps: ParametricSkeleton) -> None:
    write_atomic(path, format_parametric(ps))


def read_parametric(path) -> ParametricSkeleton:
    return parse_parametric(Path(path).read_text())


# --- split manifests ----------------------------------------------------------------


def format_manifest(assignment: dict[str, tuple[str, str]]) -> str:
    """``assignment`` maps shape id to ``(class, split)``; rows sorted by id."""
    return "".join(f"{sid}\t{cls}\t{part}\n" for sid, (cls, part) in sorted(assignment.items()))


def parse_manifest(text: str) -> dict[str, tuple[str, str]]:
    out = {}
    for ln in text.splitlines():
        if not ln.strip():
            continue
        fields = ln.split("\t")
        if len(fields) != 3 or fields[2] not in ("train", "val", "test"):
            raise FormatError(f"bad manifest row: {ln!r}")
        out[fields[0]] = (fields[1], fields[2])
    return out


def read_index(path) -> list[tuple[str, str]]:
    """Shape index file: ``shape_id<TAB>class`` per line."""
    rows = []
    for ln in Path(path).read_text().splitlines():
        if not ln.strip():
            continue
        fields = ln.split("\t")
        if len(fields) < 2:
            raise FormatError(f"bad index row: {ln!r}")
        rows.append((fields[0], fields[1]))
    return rows
