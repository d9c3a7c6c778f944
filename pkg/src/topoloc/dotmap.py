"""Dot-map construction (dilation) and extraction (hysteresis labeling).

Training targets are built by dilating each annotated dot into a disk:
radius 7 by default, enlarged to half the box side when boxes are
available, and always capped at half the gap to the nearest neighboring
dot minus half a pixel so that disks of nearby dots never touch. The
resulting mask must have exactly one component per dot; that invariant
is checked and violations raise.

Predicted fields are read back out with a two-threshold scheme: every
component of ``{f >= high}`` seeds one dot, the seeds grow in lockstep
(breadth-first, one ring per step) through ``{f >= low}``, and pixels
reached by two seeds in the same step go to the smaller component id.
Detected centers are the centroids of the grown components, reported as
(x, y)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numba import njit

from .domain import (
    BinaryMask,
    Connectivity,
    DotAnnotation,
    GridField,
    _as_connectivity,
    _frozen_copy,
    make_mask,
)

DEFAULT_HIGH = 0.5
DEFAULT_LOW = 0.4
DEFAULT_RADIUS = 7.0


@dataclass(frozen=True)
class ExtractionConfig:
    high: float = DEFAULT_HIGH
    low: float = DEFAULT_LOW
    connectivity: Connectivity = Connectivity.FOUR

    def __post_init__(self) -> None:
        if not (0.0 <= self.low <= self.high <= 1.0):
            raise ValueError(
                f"thresholds must satisfy 0 <= low <= high <= 1, got low={self.low} high={self.high}"
            )
        object.__setattr__(self, "connectivity", _as_connectivity(self.connectivity))


@dataclass(frozen=True)
class DotMapResult:
    """``labels`` assigns 0 to background, 1..components to grown regions."""

    centers: np.ndarray
    labels: np.ndarray
    components: int


@njit(cache=True)
def _label_mask(mask, height, width, eight):
    """Label components 1..k in seed scan order (row-major first pixel)."""
    n = mask.size
    labels = np.zeros(n, np.int32)
    stack = np.empty(n, np.int64)
    count = 0
    for start in range(n):
        if mask[start] == 0 or labels[start] != 0:
            continue
        count += 1
        labels[start] = count
        top = 1
        stack[0] = start
        while top > 0:
            top -= 1
            p = stack[top]
            pr = p // width
            pc = p - pr * width
            for dr in range(-1, 2):
                for dc in range(-1, 2):
                    if dr == 0 and dc == 0:
                        continue
                    if (not eight) and dr != 0 and dc != 0:
                        continue
                    rr = pr + dr
                    cc = pc + dc
                    if rr < 0 or rr >= height or cc < 0 or cc >= width:
                        continue
                    q = rr * width + cc
                    if mask[q] != 0 and labels[q] == 0:
                        labels[q] = count
                        stack[top] = q
                        top += 1
    return labels, count


@njit(cache=True)
def _grow_labels(low_mask, labels, height, width, eight):
    """Breadth-first growth of labeled seeds through low_mask, in place.

    Strictly level-synchronized: all pixels at hop distance d are
    assigned before any at d+1, and a pixel proposed by several labels
    within one level takes the smallest.
    """
    n = labels.size
    frontier = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    proposal = np.zeros(n, np.int32)
    nf = 0
    for p in range(n):
        if labels[p] != 0:
            frontier[nf] = p
            nf += 1
    while nf > 0:
        nn = 0
        for i in range(nf):
            p = frontier[i]
            lp = labels[p]
            pr = p // width
            pc = p - pr * width
            for dr in range(-1, 2):
                for dc in range(-1, 2):
                    if dr == 0 and dc == 0:
                        continue
                    if (not eight) and dr != 0 and dc != 0:
                        continue
                    rr = pr + dr
                    cc = pc + dc
                    if rr < 0 or rr >= height or cc < 0 or cc >= width:
                        continue
                    q = rr * width + cc
                    if low_mask[q] != 0 and labels[q] == 0:
                        if proposal[q] == 0:
                            proposal[q] = lp
                            nxt[nn] = q
                            nn += 1
                        elif lp < proposal[q]:
                            proposal[q] = lp
        for i in range(nn):
            q = nxt[i]
            labels[q] = proposal[q]
            proposal[q] = 0
        frontier, nxt = nxt, frontier
        nf = nn
    return labels


def label_components(
    mask: BinaryMask, connectivity: Union[int, Connectivity] = Connectivity.FOUR
) -> tuple[np.ndarray, int]:
    """Connected-component labels (0 background, 1..k in scan order)."""
    conn = _as_connectivity(connectivity)
    flat = np.ascontiguousarray(mask.bits, dtype=np.uint8).ravel()
    labels, count = _label_mask(flat, mask.height, mask.width, conn == Connectivity.EIGHT)
    return labels.reshape(mask.height, mask.width), count


def dilate_dots(
    ann: DotAnnotation, height: int, width: int, base_radius: float = DEFAULT_RADIUS
) -> BinaryMask:
    """Disk mask around each dot; one component per dot, guaranteed.

    The per-dot radius starts at ``base_radius`` (or half the larger box
    side when boxes are bigger) and is capped at (nearest-neighbor
    distance - 1) / 2. A dot whose capped disk contains no pixel at all
    makes the invariant unsatisfiable and raises.
    """
    if height < 1 or width < 1:
        raise ValueError(f"mask dimensions must be positive, got {height}x{width}")
    if not np.isfinite(base_radius) or base_radius <= 0:
        raise ValueError(f"base_radius must be positive, got {base_radius}")
    n = len(ann)
    bits = np.zeros((height, width), dtype=bool)
    if n == 0:
        return make_mask(height, width, bits)
    x = ann.points[:, 0]
    y = ann.points[:, 1]
    outside = (x >= width) | (y >= height)
    if outside.any():
        i = int(np.flatnonzero(outside)[0])
        raise ValueError(
            f"dot {i} at ({x[i]}, {y[i]}) lies outside the {height}x{width} image"
        )
    radius = np.full(n, float(base_radius))
    if ann.boxes is not None:
        radius = np.maximum(radius, ann.boxes.max(axis=1) / 2.0)
    if n >= 2:
        delta = ann.points[:, None, :] - ann.points[None, :, :]
        dist = np.sqrt((delta**2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        nearest = dist.min(axis=1)
        radius = np.minimum(radius, (nearest - 1.0) / 2.0)
    for i in range(n):
        r = radius[i]
        r0 = max(0, int(np.ceil(y[i] - r)))
        r1 = min(height - 1, int(np.floor(y[i] + r)))
        c0 = max(0, int(np.ceil(x[i] - r)))
        c1 = min(width - 1, int(np.floor(x[i] + r)))
        placed = False
        if r0 <= r1 and c0 <= c1:
            rr = np.arange(r0, r1 + 1, dtype=np.float64)
            cc = np.arange(c0, c1 + 1, dtype=np.float64)
            disk = (rr[:, None] - y[i]) ** 2 + (cc[None, :] - x[i]) ** 2 <= r * r
            if disk.any():
                bits[r0 : r1 + 1, c0 : c1 + 1] |= disk
                placed = True
        if not placed:
            raise ValueError(
                f"dot {i} at ({x[i]}, {y[i]}) produces an empty disk "
                f"(capped radius {r:.3f}); dots are too close together"
            )
    mask = make_mask(height, width, bits)
    _, count = label_components(mask, Connectivity.FOUR)
    if count != n:
        raise ValueError(
            f"dilated mask has {count} components for {n} dots; "
            "dot spacing does not allow separated disks"
        )
    return mask


def extract_dot_map(field: GridField, cfg: ExtractionConfig = ExtractionConfig()) -> DotMapResult:
    """Detected dots of a likelihood field via two-threshold growth.

    The number of detections equals the number of components of
    ``{field >= cfg.high}``; pixels of ``{field >= cfg.low}`` that no
    seed reaches stay background.
    """
    vals = field.values
    lo = float(vals.min()) if vals.size else 0.0
    hi = float(vals.max()) if vals.size else 0.0
    if lo < 0.0 or hi > 1.0:
        raise ValueError(f"field values must lie in [0, 1], got range [{lo}, {hi}]")
    eight = cfg.connectivity == Connectivity.EIGHT
    high_flat = np.ascontiguousarray(vals >= cfg.high, dtype=np.uint8).ravel()
    labels, count = _label_mask(high_flat, field.height, field.width, eight)
    low_flat = np.ascontiguousarray(vals >= cfg.low, dtype=np.uint8).ravel()
    labels = _grow_labels(low_flat, labels, field.height, field.width, eight)
    labels2d = labels.reshape(field.height, field.width)
    centers = np.zeros((count, 2), dtype=np.float64)
    if count:
        rows, cols = np.nonzero(labels2d)
        ids = labels2d[rows, cols]
        sizes = np.bincount(ids, minlength=count + 1)[1:]
        sum_r = np.bincount(ids, weights=rows, minlength=count + 1)[1:]
        sum_c = np.bincount(ids, weights=cols, minlength=count + 1)[1:]
        centers[:, 0] = sum_c / sizes
        centers[:, 1] = sum_r / sizes
    return DotMapResult(_frozen_copy(centers), _frozen_copy(labels2d), count)
