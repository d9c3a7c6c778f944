"""On-disk formats.

Fields travel as TCF, a tiny binary format:

    offset 0   4 bytes  magic "TCF1"
    offset 4   4 bytes  height, u32 little-endian
    offset 8   4 bytes  width,  u32 little-endian
    offset 12  h*w*4    float32 little-endian, row-major

Values are stored as binary32 and widened to float64 in memory, so a
write/read round-trip reproduces a float32-representable field exactly.
Masks reuse the format with values restricted to {0.0, 1.0}.

Dot lists travel as UTF-8 CSV with LF line endings and a fixed header,
either ``x,y`` or ``x,y,w,h``. Floats are written with repr, i.e. the
shortest digit string that round-trips.

Reports and diagrams are JSON with a fixed key order, indent 2, and a
trailing newline.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Any, Union

import numpy as np

from .domain import (
    BinaryMask,
    DotAnnotation,
    GridField,
    PersistenceDiagram,
    make_annotation,
    make_field,
    make_mask,
)
from .metrics import GameReport, MatchReport, NwpuReport

MAGIC = b"TCF1"
MAX_PIXELS = 1 << 28  # refuse to allocate fields above 1 GiB of payload

PathLike = Union[str, Path]


def write_field(field: GridField, path: PathLike) -> None:
    payload = field.values.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", field.height, field.width))
        fh.write(payload)


def read_field(path: PathLike) -> GridField:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 12:
        raise ValueError(f"{path}: truncated header")
    height, width = struct.unpack("<II", data[4:12])
    if height < 1 or width < 1:
        raise ValueError(f"{path}: non-positive dimensions {height}x{width}")
    if height * width > MAX_PIXELS:
        raise ValueError(f"{path}: dimensions {height}x{width} overflow the pixel limit")
    expected = 12 + height * width * 4
    if len(data) < expected:
        raise ValueError(
            f"{path}: truncated payload, expected {expected} bytes, file has {len(data)}"
        )
    if len(data) > expected:
        raise ValueError(f"{path}: {len(data) - expected} bytes of trailing data")
    values = np.frombuffer(data, dtype="<f4", offset=12).astype(np.float64)
    try:
        return make_field(height, width, values)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_mask(mask: BinaryMask, path: PathLike) -> None:
    write_field(
        make_field(mask.height, mask.width, mask.bits.astype(np.float64)), path
    )


def read_mask(path: PathLike) -> BinaryMask:
    field = read_field(path)
    vals = field.values
    if not np.isin(vals, (0.0, 1.0)).all():
        raise ValueError(f"{path}: mask values must be exactly 0 or 1")
    return make_mask(field.height, field.width, vals.astype(bool))


def write_dots(ann: DotAnnotation, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if ann.boxes is None:
            writer.writerow(["x", "y"])
            for x, y in ann.points.tolist():
                writer.writerow([repr(x), repr(y)])
        else:
            writer.writerow(["x", "y", "w", "h"])
            for (x, y), (w, h) in zip(ann.points.tolist(), ann.boxes.tolist()):
                writer.writerow([repr(x), repr(y), repr(w), repr(h)])


def read_dots(path: PathLike) -> DotAnnotation:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        if header == ["x", "y"]:
            has_boxes = False
        elif header == ["x", "y", "w", "h"]:
            has_boxes = True
        else:
            raise ValueError(f"{path}: bad header {header!r}, expected x,y or x,y,w,h")
        width = 4 if has_boxes else 2
        points, boxes = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ValueError(
                    f"{path}:{lineno}: expected {width} fields, got {len(row)}"
                )
            try:
                nums = [float(cell) for cell in row]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
            if not all(np.isfinite(nums)):
                raise ValueError(f"{path}:{lineno}: non-finite value in {row!r}")
            points.append((nums[0], nums[1]))
            if has_boxes:
                boxes.append((nums[2], nums[3]))
    try:
        return make_annotation(points, boxes=boxes if has_boxes else None)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def diagram_records(diagram: PersistenceDiagram) -> list[dict[str, Any]]:
    """Diagram as JSON-ready records, in canonical diagram order."""
    return [
        {
            "mode": [p.mode[0], p.mode[1]],
            "saddle": [p.saddle[0], p.saddle[1]],
            "birth": p.birth,
            "death": p.death,
            "essential": p.essential,
        }
        for p in diagram.pairs
    ]


def match_report_dict(rep: MatchReport) -> dict[str, Any]:
    return {
        "mean_precision": rep.mean_precision,
        "mean_recall": rep.mean_recall,
        "mean_f": rep.mean_f,
        "thresholds": [
            {
                "threshold": row.threshold,
                "tp": row.tp,
                "fp": row.fp,
                "fn": row.fn,
                "precision": row.precision,
                "recall": row.recall,
                "f_score": row.f_score,
            }
            for row in rep.rows
        ],
    }


def gaussian_report_dict(rep: MatchReport) -> dict[str, Any]:
    out = {
        "map": rep.mean_precision,
        "mar": rep.mean_recall,
        "ap_50": rep.precision_at(0.50),
        "ar_50": rep.recall_at(0.50),
        "ap_75": rep.precision_at(0.75),
        "ar_75": rep.recall_at(0.75),
    }
    out.update(match_report_dict(rep))
    return out


def game_report_dict(rep: GameReport) -> dict[str, Any]:
    return {
        "n_images": rep.n_images,
        "levels": [
            {"level": level, "game": value}
            for level, value in zip(rep.levels, rep.values)
        ],
    }


def nwpu_report_dict(rep: NwpuReport) -> dict[str, Any]:
    return {
        "large": {
            "tp": rep.tp_l,
            "fp": rep.fp_l,
            "fn": rep.fn_l,
            "precision": rep.precision_l,
            "recall": rep.recall_l,
            "f_score": rep.f_l,
        },
        "small": {
            "tp": rep.tp_s,
            "fp": rep.fp_s,
            "fn": rep.fn_s,
            "precision": rep.precision_s,
            "recall": rep.recall_s,
            "f_score": rep.f_s,
        },
        "recall_by_area": [
            {
                "bucket": row.bucket,
                "gt_count": row.gt_count,
                "recall_large": row.recall_large,
                "recall_small": row.recall_small,
            }
            for row in rep.recall_by_area
        ],
    }


def write_json(obj: Any, path: PathLike) -> None:
    """Serialize with a stable key order (insertion order) and LF newline."""
    text = json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
        fh.write("\n")


def write_diagram(diagram: PersistenceDiagram, path: PathLike) -> None:
    write_json(diagram_records(diagram), path)
