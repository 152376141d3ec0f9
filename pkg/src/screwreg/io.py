"""Text formats for clouds, correspondences and results.

XYZ clouds hold one ``x y z`` triple per line; ``#`` starts a comment. ASCII
PLY is read from its header (``element vertex``, float ``x``/``y``/``z``
properties; other properties are skipped). Correspondence files hold either
six columns ``px py pz qx qy qz`` or two integer columns ``i j`` indexing a
source and a target cloud. Results are flat ``key value...`` lines written with
17 significant digits so they read back exactly.
"""
from __future__ import annotations

import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import IndexOutOfRange, ParseError, UnsupportedFormat
from .geometry import GravityPair
from .stabbing import CorrespondenceSet

XYZ = "xyz"
PLY = "ply"


def _fmt(x) -> str:
    return format(float(x), ".17g")


@contextmanager
def atomic_write(path):
    """Open a temporary file next to ``path`` and move it into place on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if text:
                yield lineno, text


def _floats(path, lineno, fields, count):
    if len(fields) != count:
        raise ParseError(path, lineno, f"expected {count} values, found {len(fields)}")
    try:
        return [float(f) for f in fields]
    except ValueError as exc:
        raise ParseError(path, lineno, str(exc)) from None


def guess_format(path) -> str:
    return PLY if str(path).lower().endswith(".ply") else XYZ


def read_cloud(path, fmt: str | None = None) -> np.ndarray:
    fmt = fmt or guess_format(path)
    if fmt == PLY:
        return _read_ply(path)
    if fmt != XYZ:
        raise UnsupportedFormat(f"unknown cloud format {fmt!r}")
    pts = [_floats(path, n, text.split(), 3) for n, text in _data_lines(path)]
    return np.array(pts, dtype=np.float64).reshape(-1, 3)


def _read_ply(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    text = raw.decode("latin-1").splitlines()
    if not text or text[0].strip() != "ply":
        raise ParseError(path, 1, "missing 'ply' magic")
    n_vertex, props, in_vertex, fmt, header_end = None, [], False, None, None
    for k, line in enumerate(text[1:], start=2):
        parts = line.split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "format":
            fmt = parts[1] if len(parts) > 1 else ""
        elif parts[0] == "element":
            in_vertex = len(parts) == 3 and parts[1] == "vertex"
            if in_vertex:
                n_vertex = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            if parts[1] == "list":
                raise UnsupportedFormat(f"{path}: list properties on vertices are not supported")
            props.append(parts[-1])
        elif parts[0] == "end_header":
            header_end = k
            break
    if fmt != "ascii":
        raise UnsupportedFormat(f"{path}: only ASCII PLY is supported (got format {fmt!r})")
    if header_end is None or n_vertex is None:
        raise ParseError(path, len(text), "incomplete PLY header")
    try:
        cols = [props.index(a) for a in "xyz"]
    except ValueError:
        raise ParseError(path, header_end, "vertex element lacks x/y/z properties") from None
    pts = []
    body = text[header_end:header_end + n_vertex]
    if len(body) < n_vertex:
        raise ParseError(path, header_end + len(body), f"expected {n_vertex} vertices, found {len(body)}")
    for k, line in enumerate(body, start=header_end + 1):
        vals = _floats(path, k, line.split(), len(props))
        pts.append([vals[c] for c in cols])
    return np.array(pts, dtype=np.float64).reshape(-1, 3)


def write_cloud(points, path, fmt: str | None = None) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    fmt = fmt or guess_format(path)
    with atomic_write(path) as fh:
        if fmt == PLY:
            fh.write(f"ply\nformat ascii 1.0\nelement vertex {len(pts)}\n")
            fh.write("property double x\nproperty double y\nproperty double z\nend_header\n")
        for p in pts:
            fh.write(" ".join(_fmt(v) for v in p) + "\n")


def read_correspondences(path, source=None, target=None, gravity: GravityPair | None = None) -> CorrespondenceSet:
    """Read a 6-column or a 2-column (index) correspondence file."""
    gravity = gravity or GravityPair.down()
    rows = [(n, text.split()) for n, text in _data_lines(path)]
    if not rows:
        empty = np.empty((0, 3))
        return CorrespondenceSet(empty, empty, gravity)
    width = len(rows[0][1])
    if width == 6:
        arr = np.array([_floats(path, n, f, 6) for n, f in rows]).reshape(-1, 6)
        return CorrespondenceSet(arr[:, :3], arr[:, 3:], gravity)
    if width == 2:
        if source is None or target is None:
            raise ParseError(path, rows[0][0], "index correspondences need both source and target clouds")
        src, tgt = np.asarray(source), np.asarray(target)
        ij = []
        for n, f in rows:
            if len(f) != 2:
                raise ParseError(path, n, f"expected 2 values, found {len(f)}")
            try:
                i, j = int(f[0]), int(f[1])
            except ValueError as exc:
                raise ParseError(path, n, str(exc)) from None
            if not (0 <= i < len(src) and 0 <= j < len(tgt)):
                raise IndexOutOfRange(f"{path}:{n}: index pair ({i}, {j}) outside clouds of size {len(src)}/{len(tgt)}")
            ij.append((i, j))
        ij = np.array(ij, dtype=np.intp)
        return CorrespondenceSet(src[ij[:, 0]], tgt[ij[:, 1]], gravity)
    raise ParseError(path, rows[0][0], f"expected 6 or 2 columns, found {width}")


def write_correspondences(C: CorrespondenceSet, path) -> None:
    with atomic_write(path) as fh:
        for p, q in zip(C.p, C.q):
            fh.write(" ".join(_fmt(v) for v in (*p, *q)) + "\n")


def write_transform(rotation, translation, path, extra: dict | None = None) -> None:
    write_record({"rotation": np.asarray(rotation).reshape(9), "translation": translation, **(extra or {})}, path)


def write_record(record: dict, path) -> None:
    """Write ``key value...`` lines; sequences are space separated."""
    with atomic_write(path) as fh:
        for key, value in record.items():
            if isinstance(value, (list, tuple, np.ndarray)):
                vals = np.asarray(value).reshape(-1)
                text = " ".join(str(int(v)) if np.issubdtype(vals.dtype, np.integer) else _fmt(v) for v in vals)
            elif isinstance(value, (bool, np.bool_)):
                text = "1" if value else "0"
            elif isinstance(value, (int, np.integer)):
                text = str(int(value))
            elif isinstance(value, str):
                text = value
            else:
                text = _fmt(value)
            fh.write(f"{key} {text}\n")


def result_record(result, timings: bool = False) -> dict:
    rec = {
        "rotation": result.rotation.reshape(9),
        "translation": result.translation,
        "theta_star": result.theta_star,
        "theta_grid": result.theta_grid,
        "l_star": result.l_star,
        "inliers_stage1": int(len(result.inliers_stage1)),
        "inliers_stage2": int(len(result.inliers_stage2)),
        "inliers_stage3": int(len(result.inliers_stage3)),
        "bnb_branches": int(result.pole.branches_expanded) if result.pole is not None else 0,
    }
    if timings:
        for stage, secs in result.timings.items():
            rec[f"time_{stage}"] = secs
    return rec


def write_result(result, path, timings: bool = False) -> None:
    """Write a registration result.

    Timings are opt-in because they differ between otherwise identical runs.
    """
    write_record(result_record(result, timings), path)


def read_record(path) -> dict:
    rec = {}
    for n, text in _data_lines(path):
        key, *vals = text.split()
        if not vals:
            raise ParseError(path, n, f"key {key!r} has no value")
        parsed = []
        for v in vals:
            try:
                parsed.append(int(v) if v.lstrip("-").isdigit() else float(v))
            except ValueError:
                parsed.append(v)
        rec[key] = parsed[0] if len(parsed) == 1 else parsed
    return rec


def read_result(path) -> dict:
    """Parse a result or transform file; rotation comes back as a 3x3 array."""
    rec = read_record(path)
    if "rotation" in rec:
        rec["rotation"] = np.array(rec["rotation"], dtype=np.float64).reshape(3, 3)
    if "translation" in rec:
        rec["translation"] = np.array(rec["translation"], dtype=np.float64)
    return rec
