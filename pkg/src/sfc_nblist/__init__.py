"""Clustered, compressed neighbor lists on a Hilbert-curve particle layout.

Particles are sorted along a 3D Hilbert curve, grouped into 8-particle
i-clusters and 4- or 8-particle j-clusters, and each 64-particle
super-cluster stores its neighbor j-clusters with one interaction byte per
entry plus a delta/nibble-compressed index list.
"""

from .api import NeighborList
from .baselines import FullVerletList, brute_force_pairs, build_full_list, direct_reduce, reduce_full
from .clusters import ClusterIndexing, ClusterParams, cluster_aabb, cluster_max_radius, cluster_range
from .codec import CodecError, EncodedList, decode, encode, encoded_size_bits
from .kernels import count_kernel, cubic_spline, lj_kernel, sph_density_kernel
from .nblist import GATHER, SYMMETRIC, BuildError, BuildParams, NeighborStore, build
from .octree import Aabb, Octree, build_octree, min_dist_sq, node_aabb
from .reduction import (EVEN, MAX, MIN, NONE, ODD, SUM, Output, PairKernel, PassConfig, PassError,
                        PassResult, periodic_delta, reduce)
from .sfc import ParticleSet, SfcOrder, SimulationBox, grid_coords, hilbert_decode, hilbert_encode, sort_by_sfc

__version__ = "0.1.0"

__all__ = [
    "Aabb", "BuildError", "BuildParams", "ClusterIndexing", "ClusterParams", "CodecError", "EVEN",
    "EncodedList", "FullVerletList", "GATHER", "MAX", "MIN", "NONE", "NeighborList", "NeighborStore",
    "ODD", "Octree", "Output", "PairKernel", "ParticleSet", "PassConfig", "PassError", "PassResult",
    "SUM", "SYMMETRIC", "SfcOrder", "SimulationBox", "brute_force_pairs", "build", "build_full_list",
    "build_octree", "cluster_aabb", "cluster_max_radius", "cluster_range", "count_kernel", "cubic_spline",
    "decode", "direct_reduce", "encode", "encoded_size_bits", "grid_coords", "hilbert_decode",
    "hilbert_encode", "lj_kernel", "min_dist_sq", "node_aabb", "periodic_delta", "reduce", "reduce_full",
    "sort_by_sfc", "sph_density_kernel",
]
