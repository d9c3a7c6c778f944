"""Differentiable training losses on likelihood fields.

Two parts, combined by :func:`combined_loss`:

* a soft-overlap loss (:func:`dice_loss`) pulling the field toward a
  ground-truth mask, and
* a persistence loss (:func:`persistence_loss`) that, per image patch,
  rewards the ``c`` most persistent modes (``c`` = annotated dot count in
  that patch) and penalizes every other mode.

The persistence loss is piecewise linear in the field values: its exact
gradient is +-1/(number of tiles) at the mode and saddle pixels of each
selected or rejected pair, and zero elsewhere. Patch boundaries are laid
on a grid whose origin is shifted by a random per-call offset so the
patching artifacts average out over training steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .domain import (
    BinaryMask,
    Connectivity,
    DotAnnotation,
    GridField,
    LossConfig,
    count_in_rect,
    make_field,
)
from .persistence import compute_persistence, split_top_c


@dataclass(frozen=True)
class Tile:
    """A half-open rectangle [row0, row0+height) x [col0, col0+width)."""

    row0: int
    col0: int
    height: int
    width: int
    gt_count: int


@dataclass(frozen=True)
class LossResult:
    value: float
    gradient: GridField


def _check_unit_range(values: np.ndarray, name: str) -> None:
    lo = float(values.min()) if values.size else 0.0
    hi = float(values.max()) if values.size else 0.0
    if lo < 0.0 or hi > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1], got range [{lo}, {hi}]")


def _gt_array(gt: Union[GridField, BinaryMask]) -> tuple[np.ndarray, int, int]:
    if isinstance(gt, BinaryMask):
        return gt.bits.astype(np.float64), gt.height, gt.width
    _check_unit_range(gt.values, "ground truth")
    return gt.values, gt.height, gt.width


def dice_loss(gt: Union[GridField, BinaryMask], est: GridField) -> LossResult:
    """Soft-overlap loss 1 - 2(<g,e> + 1)/(|g|^2 + |e|^2 + 1), with gradient.

    Minimized (at -1) when the estimate matches a binary ground truth
    exactly. The +1 terms keep the ratio defined for empty images.
    """
    g, gh, gw = _gt_array(gt)
    if (gh, gw) != (est.height, est.width):
        raise ValueError(
            f"shape mismatch: ground truth is {gh}x{gw}, estimate is {est.height}x{est.width}"
        )
    e = est.values
    _check_unit_range(e, "estimate")
    num = float((g * e).sum()) + 1.0
    den = float((g * g).sum() + (e * e).sum()) + 1.0
    value = 1.0 - 2.0 * num / den
    grad = -2.0 * (g * den - 2.0 * e * num) / (den * den)
    return LossResult(value, make_field(est.height, est.width, grad))


def _cut_points(extent: int, patch: int, offset: int) -> list[int]:
    pts = [0]
    x = offset if offset > 0 else patch
    while x < extent:
        pts.append(x)
        x += patch
    pts.append(extent)
    return pts


def _draw_offset(patch_size: int, rng_seed: int) -> tuple[int, int]:
    """Per-call grid shift; first draw is the row offset, second the column."""
    rng = np.random.default_rng(rng_seed)
    dr, dc = rng.integers(0, patch_size, size=2)
    return int(dr), int(dc)


def tile_grid(
    height: int, width: int, ann: DotAnnotation, patch_size: int, offset: tuple[int, int]
) -> list[Tile]:
    """Tiles of a patch grid anchored at ``offset``; every pixel in exactly one.

    Border tiles are smaller than ``patch_size`` when the grid does not
    divide the image evenly. Each tile carries the count of annotated
    dots inside its half-open rectangle.
    """
    if height < 1 or width < 1:
        raise ValueError(f"image dimensions must be positive, got {height}x{width}")
    if patch_size < 1:
        raise ValueError(f"patch_size must be >= 1, got {patch_size}")
    dr, dc = offset
    if not (0 <= dr < patch_size and 0 <= dc < patch_size):
        raise ValueError(f"offset {offset} outside [0, {patch_size})^2")
    if len(ann) > 0:
        x, y = ann.points[:, 0], ann.points[:, 1]
        if (x >= width).any() or (y >= height).any():
            raise ValueError("annotation has dots outside the image bounds")
    rows = _cut_points(height, patch_size, dr)
    cols = _cut_points(width, patch_size, dc)
    tiles = []
    for r0, r1 in zip(rows[:-1], rows[1:]):
        for c0, c1 in zip(cols[:-1], cols[1:]):
            tiles.append(Tile(r0, c0, r1 - r0, c1 - c0, count_in_rect(ann, c0, r0, c1, r1)))
    return tiles


def tile_image(
    height: int, width: int, ann: DotAnnotation, patch_size: int, rng_seed: int
) -> list[Tile]:
    """Tile the image with a randomly shifted patch grid (seeded)."""
    return tile_grid(height, width, ann, patch_size, _draw_offset(patch_size, rng_seed))


def _check_tiles(field: GridField, tiles: Sequence[Tile]) -> None:
    if not tiles:
        raise ValueError("tiles must be non-empty")
    for t in tiles:
        if t.height < 1 or t.width < 1:
            raise ValueError(f"tile {t} has a degenerate extent")
        if t.row0 < 0 or t.col0 < 0 or t.row0 + t.height > field.height or t.col0 + t.width > field.width:
            raise ValueError(f"tile {t} is not contained in a {field.height}x{field.width} field")
        if t.gt_count < 0:
            raise ValueError(f"tile {t} has a negative count")


def persistence_loss(
    field: GridField,
    tiles: Sequence[Tile],
    connectivity: Union[int, Connectivity] = Connectivity.FOUR,
) -> LossResult:
    """Mean over tiles of (-sum of top-c persistences + sum of the rest).

    Within a tile the diagram of the tile sub-field (the tile is its own
    domain; neighbors across tile borders are ignored) is split at c =
    the tile's dot count. Selected pairs are pushed to be more
    persistent, all other pairs to be less. The gradient places
    -+1/len(tiles) at each pair's mode/saddle pixels; contributions
    accumulate in tile order, then diagram order, so results are
    bit-reproducible.
    """
    _check_unit_range(field.values, "field")
    _check_tiles(field, tiles)
    inv = 1.0 / len(tiles)
    total = 0.0
    grad = np.zeros((field.height, field.width), dtype=np.float64)
    for t in tiles:
        sub = field.values[t.row0 : t.row0 + t.height, t.col0 : t.col0 + t.width]
        diagram = compute_persistence(make_field(t.height, t.width, sub), connectivity)
        selected, rejected = split_top_c(diagram, t.gt_count)
        tile_value = 0.0
        for p in selected:
            tile_value -= p.persistence
            grad[t.row0 + p.mode[0], t.col0 + p.mode[1]] -= inv
            grad[t.row0 + p.saddle[0], t.col0 + p.saddle[1]] += inv
        for p in rejected:
            tile_value += p.persistence
            grad[t.row0 + p.mode[0], t.col0 + p.mode[1]] += inv
            grad[t.row0 + p.saddle[0], t.col0 + p.saddle[1]] -= inv
        total += tile_value
    return LossResult(total * inv, make_field(field.height, field.width, grad))


def combined_loss(
    field: GridField,
    gt: Union[GridField, BinaryMask],
    tiles: Sequence[Tile],
    cfg: LossConfig,
) -> LossResult:
    """dice_loss + lambda_pers * persistence_loss (skips the latter at 0)."""
    dice = dice_loss(gt, field)
    lam = cfg.lambda_pers
    if lam == 0.0:
        return dice
    pers = persistence_loss(field, tiles, cfg.connectivity)
    value = dice.value + lam * pers.value
    grad = dice.gradient.values + lam * pers.gradient.values
    return LossResult(value, make_field(field.height, field.width, grad))
