"""Implementation of the three binding callables.

Each is a thin shim over the core package (same code paths, nothing
reimplemented):

- :func:`py_persistence` — persistence diagram as plain records
- :func:`py_loss` — combined loss value and dense gradient
- :func:`py_extract` — dot centers and component labels

Boundary contract: every input array is copied, never aliased, and
field-valued inputs (likelihood fields, masks) are narrowed to float32
before entering the core. That narrowing is deliberate: it is the same
quantization the core's field file container applies, so calling a
binding on an in-memory array gives byte-for-byte the result of saving
that array to a field file and running the CLI on it. float64 callers
lose the low 29 mantissa bits at the boundary; dot coordinates are NOT
narrowed (the CSV container preserves them exactly). All functions are
pure and safe to call from multiple threads.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

import topoloc
from topoloc import Connectivity, LossConfig, make_annotation, make_field, make_mask
from topoloc.dotmap import ExtractionConfig, extract_dot_map
from topoloc.io import diagram_records
from topoloc.losses import combined_loss, tile_image
from topoloc.persistence import compute_persistence

__version__ = topoloc.__version__
__all__ = ["py_persistence", "py_loss", "py_extract", "__version__"]


def _field_from(array2d) -> "topoloc.GridField":
    a = np.asarray(array2d)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {a.shape}")
    narrowed = a.astype(np.float32).astype(np.float64)  # copy, always
    return make_field(narrowed.shape[0], narrowed.shape[1], narrowed)


def py_persistence(
    array2d, connectivity: Union[int, Connectivity] = Connectivity.FOUR
) -> list[dict]:
    """Persistence diagram of a 2-D field as a list of plain records.

    Each record holds ``mode`` and ``saddle`` as [row, col] lists,
    ``birth``, ``death``, and the ``essential`` flag — the same content
    the CLI writes as JSON.
    """
    diagram = compute_persistence(_field_from(array2d), connectivity)
    return diagram_records(diagram)


def py_loss(
    pred2d,
    gt_mask2d,
    dots: Union[Sequence, np.ndarray],
    patch: int,
    lam: float,
    seed: int,
) -> tuple[float, np.ndarray]:
    """Combined loss of a predicted field against a 0/1 mask.

    ``dots`` is an (n, 2) array of (x, y) ground-truth centers used for
    the per-tile counts; ``patch`` and ``seed`` fix the tiling. Returns
    the scalar value and a dense float64 gradient of the prediction's
    shape (a fresh array the caller owns).
    """
    field = _field_from(pred2d)
    gt = np.asarray(gt_mask2d)
    if gt.ndim != 2:
        raise ValueError(f"expected a 2-D mask, got shape {gt.shape}")
    mask = make_mask(gt.shape[0], gt.shape[1], gt)
    ann = make_annotation(np.array(dots, dtype=np.float64).reshape(-1, 2))
    cfg = LossConfig(lambda_pers=lam, patch_size=patch, rng_seed=seed)
    tiles = tile_image(field.height, field.width, ann, patch, seed)
    res = combined_loss(field, mask, tiles, cfg)
    return res.value, res.gradient.values.copy()


def py_extract(
    pred2d, high: float = 0.5, low: float = 0.4
) -> tuple[np.ndarray, np.ndarray]:
    """Dot centers and per-pixel component labels of a likelihood field.

    Returns ``(centers, labels2d)``: centers as an (n, 2) float64 array
    of (x, y) rows, labels as the field-shaped int array with 0 for
    background and 1..n per component (both fresh arrays).
    """
    result = extract_dot_map(_field_from(pred2d), ExtractionConfig(high=high, low=low))
    return result.centers.copy(), result.labels.copy()
