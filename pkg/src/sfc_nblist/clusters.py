"""Cluster and super-cluster index arithmetic over the curve-sorted particles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .octree import Aabb
from .sfc import ParticleSet

SUPER_CLUSTER_SIZE = 64


@dataclass(frozen=True)
class ClusterParams:
    """Cluster geometry.

    ``ci`` particles per i-cluster, ``cj`` per j-cluster, 64 particles per
    super-cluster and codec block width ``w``.  ``ci`` must divide 64 and
    ``cj`` must divide ``ci``; the classic configurations are 8x8, 8x4 and
    the degenerate 1x1.
    """

    ci: int = 8
    cj: int = 8
    sc_size: int = SUPER_CLUSTER_SIZE
    w: int = 32

    def __post_init__(self):
        if self.sc_size != SUPER_CLUSTER_SIZE:
            raise ValueError("super-cluster size is fixed at 64")
        if self.ci < 1 or self.sc_size % self.ci:
            raise ValueError(f"ci={self.ci} must divide {self.sc_size}")
        if self.cj < 1 or self.ci % self.cj:
            raise ValueError(f"cj={self.cj} must divide ci={self.ci}")
        if self.w not in (32, 64):
            raise ValueError("block width w must be 32 or 64")

    @classmethod
    def parse(cls, label: str, w: int = 32) -> "ClusterParams":
        """``"8x4"`` -> ``ClusterParams(ci=8, cj=4)``."""
        ci, cj = (int(v) for v in label.lower().split("x"))
        return cls(ci=ci, cj=cj, w=w)

    @property
    def label(self) -> str:
        return f"{self.ci}x{self.cj}"

    @property
    def i_per_super(self) -> int:
        return self.sc_size // self.ci

    @property
    def mask_bytes(self) -> int:
        """Bytes of interaction bitmask per stored j-cluster."""
        return (self.i_per_super + 7) // 8


def _ceil_div(a, b):
    return -(-a // b)


@dataclass(frozen=True)
class ClusterIndexing:
    n: int
    params: ClusterParams = ClusterParams()

    @property
    def n_i_clusters(self) -> int:
        return _ceil_div(self.n, self.params.ci)

    @property
    def n_j_clusters(self) -> int:
        return _ceil_div(self.n, self.params.cj)

    @property
    def n_super_clusters(self) -> int:
        return _ceil_div(self.n, self.params.sc_size)

    def size_of(self, kind: str) -> int:
        return {"i": self.params.ci, "j": self.params.cj, "super": self.params.sc_size}[kind]

    def count(self, kind: str) -> int:
        return _ceil_div(self.n, self.size_of(kind))


def cluster_range(kind: str, k: int, params: ClusterParams, n: int) -> tuple[int, int]:
    """Half-open particle range of cluster ``k`` of the given kind (``i``, ``j`` or ``super``)."""
    if kind not in ("i", "j", "super"):
        raise ValueError(f"unknown cluster kind {kind!r}")
    idx = ClusterIndexing(n, params)
    if not 0 <= k < idx.count(kind):
        raise IndexError(f"{kind}-cluster {k} out of range [0, {idx.count(kind)})")
    size = idx.size_of(kind)
    return k * size, min((k + 1) * size, n)


def cluster_aabb(ps: ParticleSet, rng: tuple[int, int]) -> Aabb:
    b, e = rng
    if e <= b:
        raise ValueError("empty cluster range")
    return Aabb(
        np.array([ps.x[b:e].min(), ps.y[b:e].min(), ps.z[b:e].min()]),
        np.array([ps.x[b:e].max(), ps.y[b:e].max(), ps.z[b:e].max()]),
    )


def cluster_max_radius(ps: ParticleSet, rng: tuple[int, int]) -> float:
    b, e = rng
    if e <= b:
        raise ValueError("empty cluster range")
    return float(ps.h[b:e].max())


def cluster_bounds(ps: ParticleSet, size: int):
    """Tight boxes and max radius of all consecutive packs of ``size`` particles.

    Returns ``lo (m, 3)``, ``hi (m, 3)``, ``max_h (m,)``.
    """
    n = ps.n
    if n == 0:
        return np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0)
    starts = np.arange(0, n, size)
    pos = ps.positions
    lo = np.minimum.reduceat(pos, starts, axis=0)
    hi = np.maximum.reduceat(pos, starts, axis=0)
    maxh = np.maximum.reduceat(ps.h, starts)
    return np.ascontiguousarray(lo), np.ascontiguousarray(hi), maxh
