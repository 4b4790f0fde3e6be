"""Neighbor reductions over a clustered store.

A :class:`PairKernel` bundles a pure, vectorized pair function with its
input fields, per-output reduction and symmetry, and an optional
postamble.  The pair function is called on batches of particle pairs::

    pair_fn(i, j, pi, pj, dx, d2) -> tuple of arrays

``i`` and ``j`` are index arrays, ``pi``/``pj`` dicts holding ``x``,
``y``, ``z``, ``h`` and every declared input gathered for the i- and
j-side, ``dx = r_i - r_j`` (minimum image, shape ``(m, 3)``) and ``d2``
its squared norm.  Each returned array has leading dimension ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from ._geom import box_arrays, pair_delta
from .nblist import GATHER, SYMMETRIC, NeighborStore
from .sfc import ParticleSet, SimulationBox

SUM, MIN, MAX = "sum", "min", "max"
EVEN, ODD, NONE = "even", "odd", "none"

# candidate pair slots processed per batch
BATCH_SLOTS = 1 << 21


class PassError(ValueError):
    pass


@dataclass(frozen=True)
class Output:
    """One reduced output field; ``dim`` > 1 for vector outputs."""

    name: str
    symmetry: str = EVEN
    reduction: str = SUM
    dim: int = 1

    def __post_init__(self):
        if self.symmetry not in (EVEN, ODD, NONE):
            raise ValueError(f"bad symmetry {self.symmetry!r}")
        if self.reduction not in (SUM, MIN, MAX):
            raise ValueError(f"bad reduction {self.reduction!r}")

    @property
    def identity(self) -> float:
        return {SUM: 0.0, MIN: np.inf, MAX: -np.inf}[self.reduction]


@dataclass(frozen=True)
class PairKernel:
    pair_fn: Callable
    outputs: tuple[Output, ...]
    inputs: tuple[str, ...] = ()
    postamble: Callable | None = None
    name: str = "kernel"


@dataclass(frozen=True)
class PassConfig:
    """``query_scale`` maps stored radii to query cutoffs; ``precision`` is ``double`` or ``single``."""

    query_scale: float = 1.0
    precision: str = "double"

    def __post_init__(self):
        if not self.query_scale >= 0:
            raise ValueError("query_scale must be >= 0")
        if self.precision not in ("double", "single"):
            raise ValueError("precision must be 'double' or 'single'")

    @property
    def dtype(self):
        return np.float64 if self.precision == "double" else np.float32


@njit(cache=True)
def periodic_delta_arrays(xa, ya, za, xb, yb, zb, box_len, periodic):
    m = xa.shape[0]
    dx = np.empty((m, 3))
    d2 = np.empty(m)
    for k in range(m):
        a, b, c, s = pair_delta(xa[k], ya[k], za[k], xb[k], yb[k], zb[k], box_len, periodic)
        dx[k, 0] = a
        dx[k, 1] = b
        dx[k, 2] = c
        d2[k] = s
    return dx, d2


def periodic_delta(a, b, box: SimulationBox):
    """Minimum-image displacement ``a - b`` and its squared length."""
    box_len, periodic = box_arrays(box)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dx, d2 = periodic_delta_arrays(a[None, 0], a[None, 1], a[None, 2], b[None, 0], b[None, 1], b[None, 2],
                                   box_len, periodic)
    return dx[0], float(d2[0])


@njit(cache=True)
def _store_pairs(e0, e1, sc_of, js, ms, x, y, z, h, box_len, periodic, ci, cj,
                 symmetric, scale, cap):
    """In-range pairs of store entries ``[e0, e1)`` in pass order.

    Order: super-cluster, then ascending j-cluster, i-cluster bit, i, j.
    """
    n = x.shape[0]
    i_per_sc = 64 // ci
    oi = np.empty(cap, np.int64)
    oj = np.empty(cap, np.int64)
    odx = np.empty((cap, 3))
    od2 = np.empty(cap)
    m = 0
    for e in range(e0, e1):
        sc = sc_of[e]
        jb = js[e] * cj
        je = min(jb + cj, n)
        mask = ms[e]
        for b in range(i_per_sc):
            if not (mask >> np.uint64(b)) & np.uint64(1):
                continue
            i0 = (sc * i_per_sc + b) * ci
            i1 = min(i0 + ci, n)
            for i in range(i0, i1):
                for j in range(jb, je):
                    # self pair always excluded; half lists evaluate j > i only
                    if j == i or (symmetric and j < i):
                        continue
                    a, bb, c, d2 = pair_delta(x[i], y[i], z[i], x[j], y[j], z[j], box_len, periodic)
                    cut = scale * max(h[i], h[j]) if symmetric else scale * h[i]
                    if d2 <= cut * cut:
                        oi[m] = i
                        oj[m] = j
                        odx[m, 0] = a
                        odx[m, 1] = bb
                        odx[m, 2] = c
                        od2[m] = d2
                        m += 1
    return oi[:m], oj[:m], odx[:m], od2[:m]


def _popcount(ms: np.ndarray) -> np.ndarray:
    v = ms.copy()
    c = np.zeros(v.shape, dtype=np.int64)
    while np.any(v):
        c += (v & np.uint64(1)).astype(np.int64)
        v >>= np.uint64(1)
    return c


class _Accumulator:
    """Reduction buffers; i-side and mirrored j-side kept apart and merged at the end."""

    def __init__(self, kernel: PairKernel, n: int, dtype):
        self.kernel = kernel
        self.n = n
        self.dtype = dtype
        self.side_i = [self._fresh(o) for o in kernel.outputs]
        self.side_j = [self._fresh(o) for o in kernel.outputs]
        self.count = np.zeros(n, dtype=np.int64)

    def _fresh(self, o: Output):
        shape = (self.n,) if o.dim == 1 else (self.n, o.dim)
        return np.full(shape, o.identity, dtype=self.dtype)

    @staticmethod
    def _apply(o: Output, buf, idx, vals):
        if o.reduction == SUM:
            np.add.at(buf, idx, vals)
        elif o.reduction == MIN:
            np.minimum.at(buf, idx, vals)
        else:
            np.maximum.at(buf, idx, vals)

    def add(self, i, j, vals, mirror: bool):
        if len(vals) != len(self.kernel.outputs):
            raise PassError(f"pair function returned {len(vals)} outputs, kernel declares "
                            f"{len(self.kernel.outputs)}")
        self.count += np.bincount(i, minlength=self.n)
        if mirror:
            self.count += np.bincount(j, minlength=self.n)
        for k, (o, v) in enumerate(zip(self.kernel.outputs, vals)):
            v = np.asarray(v, dtype=self.dtype)
            if v.ndim == 0:
                v = np.full(i.shape, v, dtype=self.dtype)
            self._apply(o, self.side_i[k], i, v)
            if mirror and o.symmetry != NONE:
                self._apply(o, self.side_j[k], j, v if o.symmetry == EVEN else -v)

    def finish(self, ps: ParticleSet) -> dict[str, np.ndarray]:
        red = []
        for o, a, b in zip(self.kernel.outputs, self.side_i, self.side_j):
            if o.reduction == SUM:
                red.append(a + b)
            elif o.reduction == MIN:
                red.append(np.minimum(a, b))
            else:
                red.append(np.maximum(a, b))
        red = tuple(red)
        if self.kernel.postamble is not None:
            idx = np.arange(self.n)
            red = tuple(self.kernel.postamble(idx, particle_data(ps, self.kernel, idx, self.dtype),
                                              red, self.count))
        out = {o.name: np.asarray(r) for o, r in zip(self.kernel.outputs, red)}
        return out


def particle_data(ps: ParticleSet, kernel: PairKernel, idx, dtype=np.float64) -> dict:
    d = {"x": ps.x[idx], "y": ps.y[idx], "z": ps.z[idx], "h": ps.h[idx]}
    for name in kernel.inputs:
        if name not in ps.fields:
            raise PassError(f"kernel {kernel.name!r} needs input field {name!r}")
        d[name] = ps.fields[name][idx]
    if dtype != np.float64:
        d = {k: np.asarray(v, dtype=dtype) if np.issubdtype(np.asarray(v).dtype, np.floating) else v
             for k, v in d.items()}
    return d


def evaluate_pairs(kernel: PairKernel, ps: ParticleSet, i, j, dx, d2, dtype=np.float64):
    """Call the kernel's pair function on one batch of pairs."""
    return kernel.pair_fn(i, j, particle_data(ps, kernel, i, dtype), particle_data(ps, kernel, j, dtype),
                          np.asarray(dx, dtype=dtype), np.asarray(d2, dtype=dtype))


@dataclass
class PassResult:
    outputs: dict[str, np.ndarray]
    neighbor_count: np.ndarray = field(repr=False)

    def __getitem__(self, name):
        return self.outputs[name]


def reduce(ps: ParticleSet, box: SimulationBox, store: NeighborStore, kernel: PairKernel,
           cfg: PassConfig = PassConfig()) -> PassResult:
    """Run ``kernel`` over all neighbor pairs of the curve-sorted particles ``ps``.

    For each particle ``i`` the pair contributions of
    ``N(i) = {j != i : d_ij <= q*h_i}`` (gather) or ``q*max(h_i, h_j)``
    (symmetric) are reduced, then the postamble maps the result using
    ``|N(i)|``.  Half-list stores evaluate each pair once and mirror it onto
    ``j`` according to the output symmetry.
    """
    if store.n != ps.n:
        raise PassError(f"store built for {store.n} particles, got {ps.n}")
    if cfg.query_scale > store.build_scale * (1 + 1e-12):
        raise PassError(f"query scale {cfg.query_scale} exceeds the store's build scale {store.build_scale}")
    box_len, periodic = box_arrays(box)
    symmetric = store.mode == SYMMETRIC
    acc = _Accumulator(kernel, ps.n, cfg.dtype)
    sc_of, js, ms = store.flatten()
    cp = store.params
    slots = np.cumsum(_popcount(ms) * cp.ci * cp.cj)
    e0 = 0
    while e0 < len(js):
        base = slots[e0 - 1] if e0 else 0
        e1 = int(np.searchsorted(slots, base + BATCH_SLOTS, side="right"))
        e1 = max(e1, e0 + 1)
        cap = int(slots[e1 - 1] - base)
        i, j, dx, d2 = _store_pairs(e0, e1, sc_of, js, ms, ps.x, ps.y, ps.z, ps.h, box_len, periodic,
                                    cp.ci, cp.cj, symmetric, float(cfg.query_scale), cap)
        if i.size:
            acc.add(i, j, evaluate_pairs(kernel, ps, i, j, dx, d2, cfg.dtype), mirror=symmetric)
        e0 = e1
    return PassResult(acc.finish(ps), acc.count)
