"""One-call wrapper: sort, build and reduce, with outputs in input order."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clusters import ClusterParams
from .nblist import BuildParams, NeighborStore, build
from .octree import Octree, build_octree
from .reduction import PairKernel, PassConfig, PassResult, reduce
from .sfc import DEFAULT_BITS, ParticleSet, SfcOrder, SimulationBox, sort_by_sfc


@dataclass
class NeighborList:
    """A clustered neighbor store together with the ordering it was built on.

    Examples
    --------
    >>> nl = NeighborList.build(ps, box, BuildParams(ClusterParams(8, 4)))  # doctest: +SKIP
    >>> rho = nl.reduce(ps, sph_density_kernel())["rho"]                      # doctest: +SKIP
    """

    box: SimulationBox
    order: SfcOrder
    tree: Octree = field(repr=False)
    store: NeighborStore = field(repr=False)
    sorted_ps: ParticleSet = field(repr=False)

    @classmethod
    def build(cls, ps: ParticleSet, box: SimulationBox, bp: BuildParams | None = None,
              bucket_size: int = 64, bits: int = DEFAULT_BITS) -> "NeighborList":
        bp = bp or BuildParams(ClusterParams())
        order = sort_by_sfc(ps, box, bits)
        sps = ps.take(order.perm)
        tree = build_octree(order, bucket_size)
        return cls(box, order, tree, build(sps, box, tree, bp), sps)

    def reduce(self, ps: ParticleSet | None, kernel: PairKernel, cfg: PassConfig = PassConfig()) -> PassResult:
        """Run ``kernel`` and return outputs indexed like the original particles.

        ``ps`` may carry updated positions or fields (same particle order as
        at build time); ``None`` reuses the particles the list was built on.
        """
        sps = self.sorted_ps if ps is None else ps.take(self.order.perm)
        res = reduce(sps, self.box, self.store, kernel, cfg)
        inv = np.empty_like(self.order.perm)
        inv[self.order.perm] = np.arange(len(inv))
        return PassResult({k: v[inv] for k, v in res.outputs.items()}, res.neighbor_count[inv])
