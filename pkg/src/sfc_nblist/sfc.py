"""Hilbert keys, particle containers and space-filling-curve ordering.

The Hilbert variant used here is Skilling's transpose formulation
("Programming the Hilbert curve", AIP Conf. Proc. 707, 2004) with the
x axis as the most significant of the three interleaved bits at every
level.  Key values are specific to this variant; everything downstream
only relies on the mapping being a bijection whose consecutive keys are
face-adjacent grid cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_BITS = 21
MAX_BITS = 21


@dataclass(frozen=True)
class SimulationBox:
    """Axis-aligned simulation domain.

    Parameters
    ----------
    lo, hi : sequence of 3 floats
        Lower and upper corner.
    periodic : sequence of 3 bools
        Periodicity per axis.
    """

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    periodic: tuple[bool, bool, bool] = (False, False, False)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        per = tuple(bool(v) for v in self.periodic)
        if len(lo) != 3 or len(hi) != 3 or len(per) != 3:
            raise ValueError("box needs three components per corner and three periodic flags")
        if not all(np.isfinite(lo + hi)):
            raise ValueError("box corners must be finite")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"box hi must exceed lo on every axis, got lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "periodic", per)

    @classmethod
    def cube(cls, length: float, periodic: bool | str = True, origin: float = 0.0):
        """Cubic box ``[origin, origin + length]^3``.

        ``periodic`` may be a bool or a subset string such as ``"xy"``.
        """
        if isinstance(periodic, str):
            flags = tuple(ax in periodic for ax in "xyz")
        else:
            flags = (bool(periodic),) * 3
        return cls((origin,) * 3, (origin + length,) * 3, flags)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def lo_array(self) -> np.ndarray:
        return np.asarray(self.lo, dtype=np.float64)

    @property
    def periodic_array(self) -> np.ndarray:
        return np.asarray(self.periodic, dtype=np.bool_)

    def wrap(self, x, y, z):
        """Fold coordinates back into the box along periodic axes."""
        out = []
        for d, c in enumerate((x, y, z)):
            c = np.asarray(c, dtype=np.float64)
            if self.periodic[d]:
                length = self.hi[d] - self.lo[d]
                c = self.lo[d] + np.mod(c - self.lo[d], length)
                # mod can round up to exactly `length`
                c = np.where(c >= self.hi[d], self.lo[d], c)
            out.append(c)
        return tuple(out)

    def contains(self, x, y, z) -> np.ndarray:
        inside = np.ones(np.shape(x), dtype=bool)
        for d, c in enumerate((x, y, z)):
            c = np.asarray(c)
            inside &= (c >= self.lo[d]) & (c <= self.hi[d])
        return inside


@dataclass
class ParticleSet:
    """Structure-of-arrays particle container.

    ``fields`` holds extra per-particle payload arrays (mass, charge, ...).
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    h: np.ndarray
    fields: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        self.z = np.ascontiguousarray(self.z, dtype=np.float64)
        h = np.asarray(self.h, dtype=np.float64)
        if h.ndim == 0:
            h = np.full(self.x.shape, float(h))
        self.h = np.ascontiguousarray(h)
        n = self.x.shape[0]
        for name, arr in (("y", self.y), ("z", self.z), ("h", self.h)):
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
        if self.x.ndim != 1:
            raise ValueError("coordinates must be one-dimensional arrays")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.z))):
            raise ValueError("non-finite particle coordinate")
        if n and not np.all(self.h > 0):
            raise ValueError("interaction radii must be positive")
        fields = {}
        for name, arr in self.fields.items():
            arr = np.ascontiguousarray(arr)
            if arr.shape[:1] != (n,):
                raise ValueError(f"field {name!r} has leading dimension {arr.shape[:1]}, expected {n}")
            fields[name] = arr
        self.fields = fields

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def __len__(self):
        return self.n

    @property
    def positions(self) -> np.ndarray:
        return np.stack([self.x, self.y, self.z], axis=1)

    def take(self, perm) -> "ParticleSet":
        """Return a new set with every array permuted by ``perm``."""
        perm = np.asarray(perm)
        return ParticleSet(
            self.x[perm], self.y[perm], self.z[perm], self.h[perm],
            {k: v[perm] for k, v in self.fields.items()},
        )

    def check_in_box(self, box: SimulationBox):
        if not np.all(box.contains(self.x, self.y, self.z)):
            raise ValueError("particles outside the simulation box (wrap periodic axes first)")


@dataclass(frozen=True)
class SfcOrder:
    """Sorted Hilbert keys and the permutation ``sorted slot -> original index``."""

    keys: np.ndarray
    perm: np.ndarray
    bits: int = DEFAULT_BITS


def _check_bits(bits):
    if not 1 <= bits <= MAX_BITS:
        raise ValueError(f"bits per dimension must be in [1, {MAX_BITS}], got {bits}")


def grid_coords(pos, box: SimulationBox, bits: int = DEFAULT_BITS):
    """Map positions onto the integer ``2^bits`` key grid.

    ``pos`` is a 3-vector or an ``(n, 3)`` array.  Positions on the upper
    face are clamped into the last cell.
    """
    _check_bits(bits)
    p = np.asarray(pos, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError("non-finite coordinate")
    scalar = p.ndim == 1
    p = np.atleast_2d(p)
    cells = 1 << bits
    lo = box.lo_array
    u = (p - lo) / box.lengths * cells
    ic = np.clip(np.floor(u), 0, cells - 1).astype(np.uint64)
    if scalar:
        return tuple(int(v) for v in ic[0])
    return ic[:, 0], ic[:, 1], ic[:, 2]


def _as_uint64(a, bits):
    arr = np.array(a, dtype=np.int64 if np.ndim(a) == 0 else None, copy=True)
    if np.any(arr < 0) or np.any(arr >= (1 << bits)):
        raise ValueError(f"grid coordinate out of range [0, 2^{bits})")
    return np.asarray(arr, dtype=np.uint64)


def hilbert_encode(ix, iy, iz, bits: int = DEFAULT_BITS):
    """Hilbert key of integer grid cells (scalars or arrays)."""
    _check_bits(bits)
    scalar = np.ndim(ix) == 0 and np.ndim(iy) == 0 and np.ndim(iz) == 0
    X = list(np.broadcast_arrays(_as_uint64(ix, bits), _as_uint64(iy, bits), _as_uint64(iz, bits)))
    X = [np.array(c, dtype=np.uint64) for c in X]
    zero = np.uint64(0)

    # undo excess work, run in the encoding direction
    q = 1 << (bits - 1)
    while q > 1:
        Q, P = np.uint64(q), np.uint64(q - 1)
        for i in range(3):
            hit = (X[i] & Q) != zero
            t = np.where(hit, zero, (X[0] ^ X[i]) & P)
            x0 = np.where(hit, X[0] ^ P, X[0] ^ t)
            X[i] = X[i] ^ t
            X[0] = x0
        q >>= 1
    # gray encode
    X[1] ^= X[0]
    X[2] ^= X[1]
    t = np.zeros_like(X[0])
    q = 1 << (bits - 1)
    while q > 1:
        t ^= np.where((X[2] & np.uint64(q)) != zero, np.uint64(q - 1), zero)
        q >>= 1
    for i in range(3):
        X[i] ^= t

    key = np.zeros_like(X[0])
    one = np.uint64(1)
    for b in range(bits - 1, -1, -1):
        for i in range(3):
            key = (key << one) | ((X[i] >> np.uint64(b)) & one)
    return int(key) if scalar else key


def hilbert_decode(key, bits: int = DEFAULT_BITS):
    """Inverse of :func:`hilbert_encode`; returns ``(ix, iy, iz)``."""
    _check_bits(bits)
    scalar = np.ndim(key) == 0
    k = np.array(key, dtype=np.uint64, ndmin=1)
    if np.any(k >= np.uint64(1 << (3 * bits))):
        raise ValueError(f"key out of range [0, 2^{3 * bits})")
    one, zero = np.uint64(1), np.uint64(0)
    X = [np.zeros_like(k) for _ in range(3)]
    for b in range(bits):
        for i in range(3):
            shift = np.uint64(3 * b + (2 - i))
            X[i] |= ((k >> shift) & one) << np.uint64(b)

    # gray decode
    t = X[2] >> one
    X[2] ^= X[1]
    X[1] ^= X[0]
    X[0] ^= t
    # undo excess work
    q = 2
    while q != (1 << bits):
        Q, P = np.uint64(q), np.uint64(q - 1)
        for i in range(2, -1, -1):
            hit = (X[i] & Q) != zero
            t = np.where(hit, zero, (X[0] ^ X[i]) & P)
            x0 = np.where(hit, X[0] ^ P, X[0] ^ t)
            X[i] = X[i] ^ t
            X[0] = x0
        q <<= 1
    if scalar:
        return tuple(int(c[0]) for c in X)
    return X[0], X[1], X[2]


def particle_keys(ps: ParticleSet, box: SimulationBox, bits: int = DEFAULT_BITS) -> np.ndarray:
    if ps.n == 0:
        return np.zeros(0, dtype=np.uint64)
    ix, iy, iz = grid_coords(ps.positions, box, bits)
    return hilbert_encode(ix, iy, iz, bits)


def sort_by_sfc(ps: ParticleSet, box: SimulationBox, bits: int = DEFAULT_BITS) -> SfcOrder:
    """Stable sort of particles along the Hilbert curve.

    Ties between identical keys keep the original index order.
    """
    _check_bits(bits)
    keys = particle_keys(ps, box, bits)
    perm = np.argsort(keys, kind="stable")
    return SfcOrder(keys=keys[perm], perm=perm.astype(np.int64), bits=bits)
