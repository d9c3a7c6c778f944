"""Core value types: likelihood fields, dot annotations, masks, diagrams.

Conventions used throughout the package:

* Pixel coordinates are 0-based with the origin at the top-left corner.
* A point is an ``(x, y)`` pair where ``x`` indexes columns and ``y`` rows.
* Pixel ``(row, col)`` covers the unit square centered at ``(x, y) =
  (col, row)``.
* Field values are stored row-major as float64; all values must be finite.

All types here are immutable after construction. Arrays handed to the
constructors are copied and the copies are marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np


class Connectivity(IntEnum):
    """Pixel adjacency: 4-neighborhood (edges) or 8-neighborhood (+diagonals)."""

    FOUR = 4
    EIGHT = 8


def _as_connectivity(value: Union[int, Connectivity]) -> Connectivity:
    try:
        return Connectivity(value)
    except ValueError:
        raise ValueError(f"connectivity must be 4 or 8, got {value!r}") from None


def _frozen_copy(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GridField:
    """A real-valued image: ``values`` has shape ``(height, width)``."""

    height: int
    width: int
    values: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridField):
            return NotImplemented
        return (
            self.height == other.height
            and self.width == other.width
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class BinaryMask:
    """A boolean image: ``bits`` has shape ``(height, width)``."""

    height: int
    width: int
    bits: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return (
            self.height == other.height
            and self.width == other.width
            and np.array_equal(self.bits, other.bits)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class DotAnnotation:
    """Point annotations in (x, y) pixel coordinates, with optional boxes.

    ``points`` has shape ``(n, 2)`` with columns x, y. ``boxes``, when
    present, has shape ``(n, 2)`` with columns width, height (both > 0).
    Bounds against a particular image are checked by the operations that
    pair an annotation with an image, not here.
    """

    points: np.ndarray
    boxes: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DotAnnotation):
            return NotImplemented
        if not np.array_equal(self.points, other.points):
            return False
        if (self.boxes is None) != (other.boxes is None):
            return False
        return self.boxes is None or np.array_equal(self.boxes, other.boxes)

    __hash__ = None  # type: ignore[assignment]


class PersistencePair(NamedTuple):
    """One 0-dimensional feature of a superlevel-set sweep.

    ``mode`` is the (row, col) of the pixel where the component was born,
    ``saddle`` the (row, col) where it merged into an older component.
    The single essential pair of a diagram never dies; its ``death`` is
    the global minimum of the field and its ``saddle`` the location of
    that minimum.
    """

    mode: tuple[int, int]
    saddle: tuple[int, int]
    birth: float
    death: float
    essential: bool

    @property
    def persistence(self) -> float:
        return self.birth - self.death


@dataclass(frozen=True)
class PersistenceDiagram:
    """Pairs sorted by persistence desc, then birth desc, then mode index.

    The mode index used for tie-breaking is the row-major linear index
    ``row * width + col``; ``width`` is recorded for that purpose.
    """

    pairs: tuple[PersistencePair, ...]
    width: int

    def __post_init__(self) -> None:
        n_essential = 0
        prev_key = None
        for p in self.pairs:
            if p.birth < p.death:
                raise ValueError(f"pair {p} has birth < death")
            if p.essential:
                n_essential += 1
            key = (
                -(p.birth - p.death),
                -p.birth,
                p.mode[0] * self.width + p.mode[1],
            )
            if prev_key is not None and key < prev_key:
                raise ValueError("pairs are not in canonical order")
            prev_key = key
        if self.pairs and n_essential != 1:
            raise ValueError(f"diagram must have exactly one essential pair, got {n_essential}")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass(frozen=True)
class LossConfig:
    """Knobs shared by the loss functions and the optimization demo."""

    lambda_pers: float = 1.0
    patch_size: int = 50
    connectivity: Connectivity = Connectivity.FOUR
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not np.isfinite(self.lambda_pers) or self.lambda_pers < 0:
            raise ValueError(f"lambda_pers must be finite and >= 0, got {self.lambda_pers}")
        if int(self.patch_size) != self.patch_size or self.patch_size < 1:
            raise ValueError(f"patch_size must be an integer >= 1, got {self.patch_size}")
        object.__setattr__(self, "patch_size", int(self.patch_size))
        object.__setattr__(self, "connectivity", _as_connectivity(self.connectivity))


def make_field(height: int, width: int, values: Union[Sequence[float], np.ndarray]) -> GridField:
    """Build a GridField from row-major values of length height*width.

    Accepts a flat sequence or an ``(height, width)`` array. Rejects
    dimension mismatches and non-finite entries; the error for a
    non-finite entry names the first offending row-major index.
    """
    if height < 1 or width < 1:
        raise ValueError(f"field dimensions must be positive, got {height}x{width}")
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape != (height, width):
            raise ValueError(
                f"dimension mismatch: expected {height}x{width}, got {arr.shape[0]}x{arr.shape[1]}"
            )
    elif arr.ndim == 1:
        if arr.size != height * width:
            raise ValueError(
                f"dimension mismatch: expected {height * width} values "
                f"for {height}x{width}, got {arr.size}"
            )
        arr = arr.reshape(height, width)
    else:
        raise ValueError(f"values must be 1-D or 2-D, got ndim={arr.ndim}")
    finite = np.isfinite(arr)
    if not finite.all():
        idx = int(np.flatnonzero(~finite.ravel())[0])
        raise ValueError(f"non-finite value {arr.ravel()[idx]} at row-major index {idx}")
    return GridField(int(height), int(width), _frozen_copy(arr))


def make_mask(height: int, width: int, bits: Union[Sequence[bool], np.ndarray]) -> BinaryMask:
    """Build a BinaryMask from row-major booleans of length height*width."""
    if height < 1 or width < 1:
        raise ValueError(f"mask dimensions must be positive, got {height}x{width}")
    arr = np.asarray(bits)
    if arr.dtype != np.bool_:
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("mask bits must be boolean or 0/1")
        arr = arr.astype(bool)
    if arr.ndim == 2:
        if arr.shape != (height, width):
            raise ValueError(
                f"dimension mismatch: expected {height}x{width}, got {arr.shape[0]}x{arr.shape[1]}"
            )
    elif arr.ndim == 1:
        if arr.size != height * width:
            raise ValueError(
                f"dimension mismatch: expected {height * width} bits "
                f"for {height}x{width}, got {arr.size}"
            )
        arr = arr.reshape(height, width)
    else:
        raise ValueError(f"bits must be 1-D or 2-D, got ndim={arr.ndim}")
    return BinaryMask(int(height), int(width), _frozen_copy(arr))


def make_annotation(
    points: Union[Sequence[tuple[float, float]], np.ndarray],
    boxes: Optional[Union[Sequence[tuple[float, float]], np.ndarray]] = None,
) -> DotAnnotation:
    """Build a DotAnnotation from (x, y) points and optional (w, h) boxes."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        pts = pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError("point coordinates must be finite")
    if (pts < 0).any():
        idx = int(np.flatnonzero((pts < 0).any(axis=1))[0])
        raise ValueError(f"point {idx} has a negative coordinate")
    frozen_boxes = None
    if boxes is not None:
        bx = np.asarray(boxes, dtype=np.float64)
        if bx.size == 0:
            bx = bx.reshape(0, 2)
        if bx.ndim != 2 or bx.shape[1] != 2:
            raise ValueError(f"boxes must have shape (n, 2), got {bx.shape}")
        if bx.shape[0] != pts.shape[0]:
            raise ValueError(
                f"length mismatch: {bx.shape[0]} boxes for {pts.shape[0]} points"
            )
        if not np.isfinite(bx).all():
            raise ValueError("box dimensions must be finite")
        if (bx <= 0).any():
            idx = int(np.flatnonzero((bx <= 0).any(axis=1))[0])
            raise ValueError(f"box {idx} has a non-positive dimension")
        frozen_boxes = _frozen_copy(bx)
    return DotAnnotation(_frozen_copy(pts), frozen_boxes)


def count_in_rect(ann: DotAnnotation, x0: float, y0: float, x1: float, y1: float) -> int:
    """Count dots with x0 <= x < x1 and y0 <= y < y1 (half-open rect)."""
    if x0 > x1 or y0 > y1:
        raise ValueError(f"inverted rectangle: [{x0}, {x1}) x [{y0}, {y1})")
    if len(ann) == 0:
        return 0
    x = ann.points[:, 0]
    y = ann.points[:, 1]
    return int(((x >= x0) & (x < x1) & (y >= y0) & (y < y1)).sum())
