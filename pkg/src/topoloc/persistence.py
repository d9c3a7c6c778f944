"""0-dimensional persistence of superlevel sets of a 2-D field.

The sweep visits pixels in decreasing value order (ties broken by
ascending row-major index) and maintains connected components of the
visited set with a union-find forest. A pixel with no visited neighbors
births a component; a pixel joining several components kills all but the
one with the earliest birth (highest birth value, then smallest mode
index). Each death emits a (mode, saddle) pair. The one component that
never dies is reported as the essential pair, paired with the global
minimum.

``compute_persistence`` is the production path (numba-compiled sweep).
``brute_force_persistence`` recomputes connected components from scratch
after every pixel insertion and exists as an independent oracle for
small fields; the two must agree pair for pair.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Union

import numpy as np
from numba import njit

from .domain import (
    Connectivity,
    GridField,
    PersistenceDiagram,
    PersistencePair,
    _as_connectivity,
)

_BRUTE_FORCE_MAX_PIXELS = 64


@njit(cache=True)
def _sweep(flat, order, height, width, eight):
    """Union-find sweep; returns (mode, saddle) linear indices of finite pairs."""
    n = flat.shape[0]
    parent = np.full(n, -1, np.int64)  # -1 marks pixels not yet visited
    csize = np.zeros(n, np.int64)
    mode = np.zeros(n, np.int64)  # valid at roots only
    rank = np.zeros(n, np.int64)  # sweep position of the mode, valid at roots
    pair_mode = np.empty(n, np.int64)
    pair_saddle = np.empty(n, np.int64)
    n_pairs = 0
    roots = np.empty(8, np.int64)
    for k in range(n):
        u = order[k]
        r = u // width
        c = u - r * width
        n_roots = 0
        for dr in range(-1, 2):
            for dc in range(-1, 2):
                if dr == 0 and dc == 0:
                    continue
                if (not eight) and dr != 0 and dc != 0:
                    continue
                rr = r + dr
                cc = c + dc
                if rr < 0 or rr >= height or cc < 0 or cc >= width:
                    continue
                v = rr * width + cc
                if parent[v] < 0:
                    continue
                root = v
                while parent[root] != root:
                    root = parent[root]
                while parent[v] != root:
                    nxt = parent[v]
                    parent[v] = root
                    v = nxt
                seen = False
                for i in range(n_roots):
                    if roots[i] == root:
                        seen = True
                        break
                if not seen:
                    roots[n_roots] = root
                    n_roots += 1
        if n_roots == 0:
            parent[u] = u
            csize[u] = 1
            mode[u] = u
            rank[u] = k
        else:
            # Earliest-born neighbor component survives. Creation order
            # follows the sweep, so the smallest mode rank is exactly
            # "highest birth value, ties to the smaller mode index".
            best = roots[0]
            for i in range(1, n_roots):
                if rank[roots[i]] < rank[best]:
                    best = roots[i]
            # best is the logical winner and must stay valid for the
            # g == best test below; phys tracks the physical root as
            # union-by-size reroots the forest.
            phys = best
            for i in range(n_roots):
                g = roots[i]
                if g == best:
                    continue
                pair_mode[n_pairs] = mode[g]
                pair_saddle[n_pairs] = u
                n_pairs += 1
                if csize[phys] >= csize[g]:
                    parent[g] = phys
                    csize[phys] += csize[g]
                else:
                    parent[phys] = g
                    csize[g] += csize[phys]
                    mode[g] = mode[phys]
                    rank[g] = rank[phys]
                    phys = g
            parent[u] = phys
            csize[phys] += 1
    return pair_mode[:n_pairs], pair_saddle[:n_pairs]


def _sweep_order(flat: np.ndarray) -> np.ndarray:
    # Stable sort of -values visits equal values in ascending index order.
    return np.argsort(-flat, kind="stable").astype(np.int64)


def _build_diagram(
    width: int,
    mode_idx: np.ndarray,
    saddle_idx: np.ndarray,
    birth: np.ndarray,
    death: np.ndarray,
    essential: np.ndarray,
) -> PersistenceDiagram:
    order = np.lexsort((mode_idx, -birth, -(birth - death)))
    mode_idx = mode_idx[order]
    saddle_idx = saddle_idx[order]
    mr = (mode_idx // width).tolist()
    mc = (mode_idx % width).tolist()
    sr = (saddle_idx // width).tolist()
    sc = (saddle_idx % width).tolist()
    b = birth[order].tolist()
    d = death[order].tolist()
    e = essential[order].tolist()
    pairs = tuple(
        PersistencePair((mr[i], mc[i]), (sr[i], sc[i]), b[i], d[i], e[i])
        for i in range(len(b))
    )
    return PersistenceDiagram(pairs, width)


def compute_persistence(
    field: GridField, connectivity: Union[int, Connectivity] = Connectivity.FOUR
) -> PersistenceDiagram:
    """Full 0-dim superlevel-set persistence diagram of ``field``.

    Runs in O(n log n) for the sort plus near-linear union-find. The
    returned diagram holds one essential pair (global max paired with
    the global min) and one finite pair per merged component.
    """
    conn = _as_connectivity(connectivity)
    flat = np.ascontiguousarray(field.values, dtype=np.float64).ravel()
    order = _sweep_order(flat)
    pm, ps = _sweep(flat, order, field.height, field.width, conn == Connectivity.EIGHT)
    ess_mode = int(np.argmax(flat))  # first occurrence = smallest index
    ess_saddle = int(np.argmin(flat))
    mode_idx = np.concatenate([pm, [ess_mode]])
    saddle_idx = np.concatenate([ps, [ess_saddle]])
    essential = np.zeros(mode_idx.size, dtype=bool)
    essential[-1] = True
    return _build_diagram(
        field.width, mode_idx, saddle_idx, flat[mode_idx], flat[saddle_idx], essential
    )


def _flood_components(
    present: set[int], height: int, width: int, eight: bool
) -> list[frozenset[int]]:
    comps = []
    todo = set(present)
    while todo:
        start = todo.pop()
        comp = {start}
        queue = deque([start])
        while queue:
            p = queue.popleft()
            pr, pc = divmod(p, width)
            for dr in range(-1, 2):
                for dc in range(-1, 2):
                    if dr == 0 and dc == 0:
                        continue
                    if (not eight) and dr != 0 and dc != 0:
                        continue
                    rr, cc = pr + dr, pc + dc
                    if rr < 0 or rr >= height or cc < 0 or cc >= width:
                        continue
                    q = rr * width + cc
                    if q in present and q not in comp:
                        comp.add(q)
                        queue.append(q)
                        todo.discard(q)
        comps.append(frozenset(comp))
    return comps


def brute_force_persistence(
    field: GridField, connectivity: Union[int, Connectivity] = Connectivity.FOUR
) -> PersistenceDiagram:
    """Reference diagram for tiny fields, recomputed from first principles.

    After each pixel insertion the connected components of the visited
    set are recomputed by flood fill, and merges are detected by set
    inclusion. Quadratic and deliberately naive; capped at 64 pixels.
    """
    conn = _as_connectivity(connectivity)
    h, w = field.height, field.width
    n = h * w
    if n > _BRUTE_FORCE_MAX_PIXELS:
        raise ValueError(f"brute-force oracle is limited to {_BRUTE_FORCE_MAX_PIXELS} pixels, got {n}")
    eight = conn == Connectivity.EIGHT
    flat = field.values.ravel()
    order = sorted(range(n), key=lambda i: (-flat[i], i))

    def mode_of(comp: frozenset[int]) -> int:
        return min(comp, key=lambda p: (-flat[p], p))

    present: set[int] = set()
    comps_prev: list[frozenset[int]] = []
    rec_mode: list[int] = []
    rec_saddle: list[int] = []
    for u in order:
        present.add(u)
        comps = _flood_components(present, h, w, eight)
        cu = next(comp for comp in comps if u in comp)
        absorbed = [P for P in comps_prev if P <= cu]
        if len(absorbed) >= 2:
            survivor = max(absorbed, key=lambda P: (flat[mode_of(P)], -mode_of(P)))
            for P in absorbed:
                if P is survivor:
                    continue
                rec_mode.append(mode_of(P))
                rec_saddle.append(u)
        comps_prev = comps

    ess_mode = min(range(n), key=lambda i: (-flat[i], i))
    ess_saddle = min(range(n), key=lambda i: (flat[i], i))
    mode_idx = np.array(rec_mode + [ess_mode], dtype=np.int64)
    saddle_idx = np.array(rec_saddle + [ess_saddle], dtype=np.int64)
    essential = np.zeros(mode_idx.size, dtype=bool)
    essential[-1] = True
    return _build_diagram(w, mode_idx, saddle_idx, flat[mode_idx], flat[saddle_idx], essential)


def split_top_c(
    diagram: PersistenceDiagram, c: int
) -> tuple[list[PersistencePair], list[PersistencePair]]:
    """Split a diagram into its min(c, len) most persistent pairs and the rest."""
    if c < 0:
        raise ValueError(f"c must be >= 0, got {c}")
    k = min(c, len(diagram.pairs))
    return list(diagram.pairs[:k]), list(diagram.pairs[k:])
