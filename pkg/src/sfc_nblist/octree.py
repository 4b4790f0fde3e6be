"""Octree over sorted Hilbert keys.

Nodes are stored in breadth-first order; the eight children of an internal
node are contiguous, starting at ``first_child``.  Child ``k`` covers the
``k``-th eighth of its parent's key range, so a depth-first walk visiting
children in index order enumerates leaves in curve order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._geom import box_arrays, point_aabb_dist2
from .sfc import ParticleSet, SfcOrder, SimulationBox


@dataclass(frozen=True)
class Aabb:
    lo: np.ndarray
    hi: np.ndarray

    @property
    def empty(self) -> bool:
        return bool(np.any(self.lo > self.hi))

    def contains(self, p) -> bool:
        p = np.asarray(p)
        return bool(np.all(self.lo <= p) and np.all(p <= self.hi))

    def contains_box(self, other: "Aabb") -> bool:
        if other.empty:
            return True
        return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))

    @classmethod
    def empty_box(cls):
        return cls(np.full(3, np.inf), np.full(3, -np.inf))


@dataclass(frozen=True)
class Octree:
    """Implicit octree arrays, one entry per node.

    Attributes
    ----------
    key_start, key_end : uint64 arrays
        Half-open Hilbert key range of each node.
    begin, end : int64 arrays
        Particle range into the sorted particle arrays.
    first_child : int64 array
        Index of child 0, or -1 for leaves.
    depth : int64 array
    bits : int
        Key bits per dimension, also the maximum depth.
    """

    key_start: np.ndarray
    key_end: np.ndarray
    begin: np.ndarray
    end: np.ndarray
    first_child: np.ndarray
    depth: np.ndarray
    bits: int
    bucket_size: int

    @property
    def num_nodes(self) -> int:
        return self.begin.shape[0]

    def is_leaf(self, node: int) -> bool:
        return self.first_child[node] < 0

    def children(self, node: int) -> range:
        c = int(self.first_child[node])
        return range(0) if c < 0 else range(c, c + 8)

    def leaves_dfs(self) -> list[int]:
        """Leaf indices in depth-first (curve) order."""
        out, stack = [], [0]
        while stack:
            node = stack.pop()
            c = self.first_child[node]
            if c < 0:
                out.append(node)
            else:
                stack.extend(range(c + 7, c - 1, -1))
        return out


def build_octree(order: SfcOrder, bucket_size: int = 64) -> Octree:
    """Split the key domain until every leaf holds at most ``bucket_size`` particles.

    Leaves at the maximum depth ``order.bits`` may exceed the bucket size
    (many particles sharing one grid cell).
    """
    if bucket_size < 1:
        raise ValueError("bucket_size must be >= 1")
    keys = np.asarray(order.keys, dtype=np.uint64)
    if keys.size > 1 and np.any(keys[1:] < keys[:-1]):
        raise ValueError("keys must be sorted")
    bits = order.bits
    n = keys.shape[0]

    key_start = [0]
    key_end = [1 << (3 * bits)]
    begin, end, depth, first_child = [0], [n], [0], [-1]
    eighths = np.arange(1, 8, dtype=np.uint64)
    i = 0
    while i < len(begin):
        if end[i] - begin[i] > bucket_size and depth[i] < bits:
            first_child[i] = len(begin)
            k0 = key_start[i]
            step = (key_end[i] - k0) >> 3
            cuts = np.uint64(k0) + eighths * np.uint64(step)
            lo, hi = begin[i], end[i]
            split = (lo + np.searchsorted(keys[lo:hi], cuts, side="left")).tolist()
            bounds = [lo] + split + [hi]
            for c in range(8):
                key_start.append(k0 + c * step)
                key_end.append(k0 + (c + 1) * step)
                begin.append(bounds[c])
                end.append(bounds[c + 1])
                depth.append(depth[i] + 1)
                first_child.append(-1)
        i += 1

    return Octree(
        key_start=np.array(key_start, dtype=np.uint64),
        key_end=np.array(key_end, dtype=np.uint64),
        begin=np.array(begin, dtype=np.int64),
        end=np.array(end, dtype=np.int64),
        first_child=np.array(first_child, dtype=np.int64),
        depth=np.array(depth, dtype=np.int64),
        bits=bits,
        bucket_size=bucket_size,
    )


@njit(cache=True)
def _node_bounds(begin, end, first_child, x, y, z, h):
    nn = begin.shape[0]
    lo = np.full((nn, 3), np.inf)
    hi = np.full((nn, 3), -np.inf)
    maxh = np.zeros(nn)
    # children always have larger indices than their parent
    for node in range(nn - 1, -1, -1):
        c = first_child[node]
        if c < 0:
            for p in range(begin[node], end[node]):
                lo[node, 0] = min(lo[node, 0], x[p])
                lo[node, 1] = min(lo[node, 1], y[p])
                lo[node, 2] = min(lo[node, 2], z[p])
                hi[node, 0] = max(hi[node, 0], x[p])
                hi[node, 1] = max(hi[node, 1], y[p])
                hi[node, 2] = max(hi[node, 2], z[p])
                maxh[node] = max(maxh[node], h[p])
        else:
            for k in range(c, c + 8):
                for d in range(3):
                    lo[node, d] = min(lo[node, d], lo[k, d])
                    hi[node, d] = max(hi[node, d], hi[k, d])
                maxh[node] = max(maxh[node], maxh[k])
    return lo, hi, maxh


@dataclass(frozen=True)
class NodeBounds:
    """Tight per-node boxes and maximum interaction radius."""

    lo: np.ndarray
    hi: np.ndarray
    max_h: np.ndarray


def node_bounds(tree: Octree, ps: ParticleSet) -> NodeBounds:
    """Tight bounding boxes of every node, computed bottom-up."""
    if tree.end[0] != ps.n:
        raise ValueError("tree and particle set sizes differ")
    lo, hi, maxh = _node_bounds(tree.begin, tree.end, tree.first_child, ps.x, ps.y, ps.z, ps.h)
    return NodeBounds(lo, hi, maxh)


def node_aabb(tree: Octree, node: int, ps: ParticleSet) -> Aabb:
    """Tight box over the node's particles; empty nodes give an inverted box."""
    b, e = int(tree.begin[node]), int(tree.end[node])
    if b == e:
        return Aabb.empty_box()
    pos = ps.positions[b:e]
    return Aabb(pos.min(axis=0), pos.max(axis=0))


def min_dist_sq(p, box_aabb: Aabb, box: SimulationBox) -> float:
    """Minimum squared distance from point ``p`` to an Aabb, minimum image per periodic axis."""
    if box_aabb.empty:
        return np.inf
    box_len, periodic = box_arrays(box)
    return float(point_aabb_dist2(np.asarray(p, dtype=np.float64),
                                  np.asarray(box_aabb.lo, dtype=np.float64),
                                  np.asarray(box_aabb.hi, dtype=np.float64),
                                  box_len, periodic))
