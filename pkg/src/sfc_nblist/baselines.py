"""Reference neighbor enumerations: O(n^2) brute force and a full Verlet list.

Both use the same radius criterion as the clustered store: ``d <= s*h_i``
in gather mode, ``d <= s*max(h_i, h_j)`` in symmetric mode, inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._geom import box_arrays, pair_delta
from .nblist import GATHER, MODES, SYMMETRIC
from .sfc import ParticleSet, SimulationBox

ORACLE_CAP = 50_000


@njit(cache=True)
def _brute_counts(x, y, z, h, box_len, periodic, scale, symmetric, include_self):
    n = x.shape[0]
    counts = np.zeros(n, np.int64)
    for i in range(n):
        for j in range(n):
            if j == i:
                if include_self:
                    counts[i] += 1
                continue
            d2 = pair_delta(x[i], y[i], z[i], x[j], y[j], z[j], box_len, periodic)[3]
            cut = scale * max(h[i], h[j]) if symmetric else scale * h[i]
            if d2 <= cut * cut:
                counts[i] += 1
    return counts


@njit(cache=True)
def _brute_fill(x, y, z, h, box_len, periodic, scale, symmetric, offsets, out):
    n = x.shape[0]
    for i in range(n):
        p = offsets[i]
        for j in range(n):
            if j == i:
                continue
            d2 = pair_delta(x[i], y[i], z[i], x[j], y[j], z[j], box_len, periodic)[3]
            cut = scale * max(h[i], h[j]) if symmetric else scale * h[i]
            if d2 <= cut * cut:
                out[p] = j
                p += 1


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")


def brute_force_counts(ps: ParticleSet, box: SimulationBox, scale: float = 1.0, mode: str = GATHER,
                       include_self: bool = False, cap: int = ORACLE_CAP) -> np.ndarray:
    _check_mode(mode)
    if ps.n > cap:
        raise ValueError(f"brute force limited to {cap} particles, got {ps.n}")
    box_len, periodic = box_arrays(box)
    return _brute_counts(ps.x, ps.y, ps.z, ps.h, box_len, periodic, float(scale),
                         mode == SYMMETRIC, include_self)


def _brute_csr(ps, box, scale, mode, cap):
    counts = brute_force_counts(ps, box, scale, mode, cap=cap)
    offsets = np.zeros(ps.n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    out = np.empty(int(offsets[-1]), dtype=np.int64)
    box_len, periodic = box_arrays(box)
    _brute_fill(ps.x, ps.y, ps.z, ps.h, box_len, periodic, float(scale), mode == SYMMETRIC, offsets, out)
    return offsets, out


def brute_force_pairs(ps: ParticleSet, box: SimulationBox, scale: float = 1.0, mode: str = GATHER,
                      cap: int = ORACLE_CAP) -> np.ndarray:
    """All ordered pairs ``(i, j)``, ``i != j``, within the radius criterion.

    Returns an ``(m, 2)`` int64 array sorted by ``i`` then ``j``.  In
    symmetric mode the criterion is symmetric, so both orientations appear.
    """
    offsets, nbrs = _brute_csr(ps, box, scale, mode, cap)
    i = np.repeat(np.arange(ps.n, dtype=np.int64), np.diff(offsets))
    return np.stack([i, nbrs], axis=1)


# --- cell grid ---------------------------------------------------------------

@njit(cache=True)
def _grid_pass(x, y, z, h, box_lo, box_len, periodic, scale, symmetric, include_self,
               ncell, cell_start, cell_items, offsets, out, fill):
    n = x.shape[0]
    counts = np.zeros(n, np.int64)
    cand = np.empty(n, np.int64)
    seen = np.zeros(ncell[0] * ncell[1] * ncell[2], np.int64) - 1
    c = np.empty(3, np.int64)
    for i in range(n):
        pos = (x[i], y[i], z[i])
        for d in range(3):
            c[d] = min(int((pos[d] - box_lo[d]) / box_len[d] * ncell[d]), ncell[d] - 1)
        m = 0
        for ox in range(-1, 2):
            cx = c[0] + ox
            if cx < 0 or cx >= ncell[0]:
                if not periodic[0]:
                    continue
                cx %= ncell[0]
            for oy in range(-1, 2):
                cy = c[1] + oy
                if cy < 0 or cy >= ncell[1]:
                    if not periodic[1]:
                        continue
                    cy %= ncell[1]
                for oz in range(-1, 2):
                    cz = c[2] + oz
                    if cz < 0 or cz >= ncell[2]:
                        if not periodic[2]:
                            continue
                        cz %= ncell[2]
                    cell = (cx * ncell[1] + cy) * ncell[2] + cz
                    # small periodic grids wrap onto the same cell twice
                    if seen[cell] == i:
                        continue
                    seen[cell] = i
                    for q in range(cell_start[cell], cell_start[cell + 1]):
                        j = cell_items[q]
                        if j == i:
                            if include_self:
                                cand[m] = j
                                m += 1
                            continue
                        d2 = pair_delta(x[i], y[i], z[i], x[j], y[j], z[j], box_len, periodic)[3]
                        cut = scale * max(h[i], h[j]) if symmetric else scale * h[i]
                        if d2 <= cut * cut:
                            cand[m] = j
                            m += 1
        counts[i] = m
        if fill:
            srt = np.sort(cand[:m])
            out[offsets[i]:offsets[i] + m] = srt
    return counts


def _grid_setup(ps, box, scale, mode):
    box_len, periodic = box_arrays(box)
    rmax = scale * float(ps.h.max()) if ps.n else 1.0
    ncell = np.maximum(1, np.floor(box_len / rmax)).astype(np.int64)
    # cap total cells to keep memory bounded for tiny radii
    while np.prod(ncell) > max(8 * ps.n, 27):
        ncell = np.maximum(1, ncell // 2)
    lo = box.lo_array
    c = np.minimum(((ps.positions - lo) / box_len * ncell).astype(np.int64), ncell - 1)
    c = np.maximum(c, 0)
    cell = (c[:, 0] * ncell[1] + c[:, 1]) * ncell[2] + c[:, 2]
    order = np.argsort(cell, kind="stable")
    cell_start = np.searchsorted(cell[order], np.arange(np.prod(ncell) + 1))
    return box_len, periodic, lo, ncell, cell_start.astype(np.int64), order.astype(np.int64)


def grid_counts(ps: ParticleSet, box: SimulationBox, scale: float = 1.0, mode: str = GATHER,
                include_self: bool = False) -> np.ndarray:
    """Per-particle neighbor counts via a uniform cell grid (no size cap)."""
    _check_mode(mode)
    if ps.n == 0:
        return np.zeros(0, dtype=np.int64)
    box_len, periodic, lo, ncell, cs, items = _grid_setup(ps, box, scale, mode)
    dummy = np.zeros(1, np.int64)
    return _grid_pass(ps.x, ps.y, ps.z, ps.h, lo, box_len, periodic, float(scale), mode == SYMMETRIC,
                      include_self, ncell, cs, items, dummy, dummy, False)


def neighbor_counts(ps, box, scale=1.0, mode=GATHER, include_self=False, cap=ORACLE_CAP):
    """Exact neighbor counts, brute force below ``cap`` and cell grid above."""
    if ps.n <= min(cap, 20_000):
        return brute_force_counts(ps, box, scale, mode, include_self, cap=cap)
    return grid_counts(ps, box, scale, mode, include_self)


# --- full Verlet list ----------------------------------------------------------

@dataclass(frozen=True)
class FullVerletList:
    """CSR per-particle neighbor lists (both orientations, ascending, no self)."""

    offsets: np.ndarray
    neighbors: np.ndarray
    mode: str
    build_scale: float

    @property
    def n(self) -> int:
        return self.offsets.shape[0] - 1

    def neighbors_of(self, i: int) -> np.ndarray:
        return self.neighbors[self.offsets[i]:self.offsets[i + 1]]

    def memory_footprint(self) -> tuple[int, float]:
        """Bytes with 4-byte indices and offsets, and bytes per particle."""
        total = 4 * self.neighbors.shape[0] + 4 * self.offsets.shape[0]
        return total, (total / self.n if self.n else 0.0)


def build_full_list(ps: ParticleSet, box: SimulationBox, scale: float = 1.0, mode: str = GATHER,
                    cap: int = ORACLE_CAP) -> FullVerletList:
    """Full list from brute force below ``cap`` particles, from a cell grid above."""
    _check_mode(mode)
    if ps.n <= cap:
        offsets, nbrs = _brute_csr(ps, box, scale, mode, cap)
    else:
        box_len, periodic, lo, ncell, cs, items = _grid_setup(ps, box, scale, mode)
        dummy = np.zeros(1, np.int64)
        args = (ps.x, ps.y, ps.z, ps.h, lo, box_len, periodic, float(scale), mode == SYMMETRIC, False,
                ncell, cs, items)
        counts = _grid_pass(*args, dummy, dummy, False)
        offsets = np.zeros(ps.n + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        nbrs = np.empty(int(offsets[-1]), dtype=np.int64)
        _grid_pass(*args, offsets, nbrs, True)
    return FullVerletList(offsets, nbrs.astype(np.uint32), mode, float(scale))


@njit(cache=True)
def _list_pairs(offsets, nbrs, x, y, z, h, box_len, periodic, symmetric, scale):
    total = offsets[-1]
    oi = np.empty(total, np.int64)
    oj = np.empty(total, np.int64)
    odx = np.empty((total, 3))
    od2 = np.empty(total)
    m = 0
    for i in range(offsets.shape[0] - 1):
        for q in range(offsets[i], offsets[i + 1]):
            j = np.int64(nbrs[q])
            a, b, c, d2 = pair_delta(x[i], y[i], z[i], x[j], y[j], z[j], box_len, periodic)
            cut = scale * max(h[i], h[j]) if symmetric else scale * h[i]
            if d2 <= cut * cut:
                oi[m] = i
                oj[m] = j
                odx[m, 0] = a
                odx[m, 1] = b
                odx[m, 2] = c
                od2[m] = d2
                m += 1
    return oi[:m], oj[:m], odx[:m], od2[:m]


def reduce_full(flist: FullVerletList, ps: ParticleSet, box: SimulationBox, kernel, cfg=None):
    """Evaluate a pair kernel over a full list; every pair is computed from both sides."""
    from .reduction import PassConfig, PassError, PassResult, _Accumulator, evaluate_pairs

    cfg = PassConfig() if cfg is None else cfg
    if flist.n != ps.n:
        raise PassError(f"list built for {flist.n} particles, got {ps.n}")
    if cfg.query_scale > flist.build_scale * (1 + 1e-12):
        raise PassError("query scale exceeds the list's build scale")
    box_len, periodic = box_arrays(box)
    acc = _Accumulator(kernel, ps.n, cfg.dtype)
    i, j, dx, d2 = _list_pairs(flist.offsets, flist.neighbors, ps.x, ps.y, ps.z, ps.h, box_len, periodic,
                               flist.mode == SYMMETRIC, float(cfg.query_scale))
    if i.size:
        acc.add(i, j, evaluate_pairs(kernel, ps, i, j, dx, d2, cfg.dtype), mirror=False)
    return PassResult(acc.finish(ps), acc.count)


def direct_reduce(ps: ParticleSet, box: SimulationBox, kernel, cfg=None, mode: str = GATHER,
                  cap: int = ORACLE_CAP):
    """Brute-force evaluation: every pair within the query cutoff, no list at all."""
    from .reduction import PassConfig, PassResult, _Accumulator, evaluate_pairs, periodic_delta_arrays

    cfg = PassConfig() if cfg is None else cfg
    pairs = brute_force_pairs(ps, box, cfg.query_scale, mode, cap=cap)
    i, j = pairs[:, 0], pairs[:, 1]
    box_len, periodic = box_arrays(box)
    dx, d2 = periodic_delta_arrays(ps.x[i], ps.y[i], ps.z[i], ps.x[j], ps.y[j], ps.z[j], box_len, periodic)
    acc = _Accumulator(kernel, ps.n, cfg.dtype)
    if i.size:
        acc.add(i, j, evaluate_pairs(kernel, ps, i, j, dx, d2, cfg.dtype), mirror=False)
    return PassResult(acc.finish(ps), acc.count)
