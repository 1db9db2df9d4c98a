"""On-disk formats.

Point clouds
    Headerless little-endian float32 triples ``x y z`` (KITTI ``.bin``
    compatible, without the intensity channel). Per-point traces, when
    present, live in a sidecar ``<name>.trace`` file of little-endian float32.
Boxes
    UTF-8 text, one record per line: ``class score x y z l w h yaw``.
    Blank lines and ``#`` comments are skipped. Floats are written with
    ``repr`` so they read back bit-identical.
Voxel grids
    CSV with header ``ix,iy,iz,fx,fy,fz,count``.
"""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .boxes import Box3D
from .fusion import VoxelGrid
from .propagation import TaggedPointCloud

POINT_DTYPE = np.dtype("<f4")
TRACE_SUFFIX = ".trace"


class FormatError(ValueError):
    """Malformed input file; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, path=None, offset: int | None = None, record: int | None = None):
        where = []
        if path is not None:
            where.append(str(path))
        if record is not None:
            where.append(f"record {record}")
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.path = path
        self.offset = offset
        self.record = record


def trace_path(path) -> Path:
    return Path(str(path) + TRACE_SUFFIX)


def write_cloud(path, points) -> None:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    Path(path).write_bytes(pts.astype(POINT_DTYPE).tobytes())


def read_cloud(path) -> np.ndarray:
    data = Path(path).read_bytes()
    usable = len(data) - len(data) % 12
    if usable != len(data):
        raise FormatError("truncated point record", path, offset=usable)
    pts = np.frombuffer(data, dtype=POINT_DTYPE).reshape(-1, 3).astype(float)
    bad = np.where(~np.isfinite(pts).all(axis=1))[0]
    if len(bad):
        raise FormatError("non-finite coordinate", path, offset=int(bad[0]) * 12, record=int(bad[0]))
    return pts


def write_traces(path, traces) -> None:
    Path(path).write_bytes(np.asarray(traces, dtype=float).reshape(-1).astype(POINT_DTYPE).tobytes())


def read_traces(path) -> np.ndarray:
    data = Path(path).read_bytes()
    usable = len(data) - len(data) % 4
    if usable != len(data):
        raise FormatError("truncated trace record", path, offset=usable)
    return np.frombuffer(data, dtype=POINT_DTYPE).astype(float)


def write_tagged_cloud(path, cloud: TaggedPointCloud) -> None:
    write_cloud(path, cloud.points)
    write_traces(trace_path(path), cloud.traces)


def read_tagged_cloud(path) -> TaggedPointCloud:
    pts = read_cloud(path)
    tp = trace_path(path)
    if not tp.exists():
        return TaggedPointCloud.untagged(pts)
    traces = read_traces(tp)
    if len(traces) != len(pts):
        raise FormatError(f"{len(traces)} traces for {len(pts)} points", tp, offset=min(len(traces), len(pts)) * 4)
    return TaggedPointCloud(pts, traces)


def format_box(b: Box3D) -> str:
    vals = [b.score, *b.center, *b.size, b.yaw]
    return " ".join([str(b.class_id)] + [repr(float(v)) for v in vals])


def dumps_boxes(boxes: Iterable[Box3D]) -> str:
    return "".join(format_box(b) + "\n" for b in boxes)


def write_boxes(path, boxes: Iterable[Box3D]) -> None:
    Path(path).write_text(dumps_boxes(boxes), encoding="utf-8")


def loads_boxes(text: str, path=None) -> list[Box3D]:
    boxes = []
    offset = 0
    record = 0
    for line in text.splitlines(keepends=True):
        body = line.split("#", 1)[0].strip()
        if body:
            fields = body.split()
            if len(fields) != 9:
                raise FormatError(f"expected 9 fields, got {len(fields)}", path, offset, record)
            try:
                vals = [float(v) for v in fields[1:]]
                cls = int(fields[0])
                box = Box3D(cls, vals[0], vals[1:4], vals[4:7], vals[7])
            except ValueError as exc:
                raise FormatError(str(exc), path, offset, record) from None
            boxes.append(box)
            record += 1
        offset += len(line.encode("utf-8"))
    return boxes


def read_boxes(path) -> list[Box3D]:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError("invalid UTF-8", path, offset=exc.start) from None
    return loads_boxes(text, path)


GRID_HEADER = ("ix", "iy", "iz", "fx", "fy", "fz", "count")


def dumps_grid(grid: VoxelGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GRID_HEADER)
    for idx, f, c in zip(grid.indices, grid.features, grid.counts):
        w.writerow([*(int(v) for v in idx), *(repr(float(v)) for v in f), int(c)])
    return buf.getvalue()


def write_grid(path, grid: VoxelGrid) -> None:
    Path(path).write_text(dumps_grid(grid), encoding="utf-8")


def write_csv(path_or_file, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Deterministic CSV: ``\\n`` line endings, floats via :func:`fmt`."""
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            emit(fh)


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
