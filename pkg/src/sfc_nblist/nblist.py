"""Clustered, optionally compressed neighbor store built by octree traversal.

Per super-cluster the store keeps a neighbor count in a header array and a
slice of one shared byte blob::

    [mask_0 .. mask_{k-1}]  one bitmask per neighbor j-cluster, mask_bytes each
    [j-cluster index list]  k ascending indices, nibble-compressed or uint32 LE

Bit ``b`` of a mask is set iff i-cluster ``b`` of the super-cluster has at
least one particle pair with the j-cluster inside the build radius.  The
particle itself counts as its own neighbor here, so the j-clusters holding
the super-cluster's own particles are always listed; the pass excludes
``i == j`` on the fly.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import codec
from ._geom import PRUNE_SLACK, aabb_dist2, box_arrays, pair_delta
from .clusters import ClusterIndexing, ClusterParams, cluster_bounds
from .octree import Octree, node_bounds
from .sfc import ParticleSet, SimulationBox

GATHER = "gather"
SYMMETRIC = "symmetric"
MODES = (GATHER, SYMMETRIC)


class BuildError(ValueError):
    pass


@dataclass(frozen=True)
class BuildParams:
    """Neighbor list build options.

    ``build_scale`` multiplies every interaction radius at build time (the
    Verlet skin); passes may query with any smaller scale.
    """

    params: ClusterParams = ClusterParams()
    mode: str = GATHER
    compress: bool = True
    build_scale: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.build_scale >= 1.0:
            raise ValueError("build_scale must be >= 1")


@njit(cache=True)
def _collect(x, y, z, h, box_len, periodic, ci, cj, symmetric, scale,
             nb_begin, nb_end, nb_child, nb_lo, nb_hi, nb_maxh,
             ic_lo, ic_hi, ic_maxh, jc_lo, jc_hi, jc_maxh,
             sc_lo, sc_hi, sc_maxh):
    n = x.shape[0]
    n_sc = sc_lo.shape[0]
    n_ic = ic_lo.shape[0]
    i_per_sc = 64 // ci
    counts = np.zeros(n_sc, np.int64)
    cap = max(1024, 16 * n_sc)
    out_j = np.empty(cap, np.int64)
    out_m = np.empty(cap, np.uint64)
    total = 0
    stack = np.empty(8 * 64 + 16, np.int64)

    for sc in range(n_sc):
        ib0 = sc * i_per_sc
        ib1 = min(ib0 + i_per_sc, n_ic)
        start = total
        last_j = -1
        sp = 1
        stack[0] = 0
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if nb_end[node] == nb_begin[node]:
                continue
            r = sc_maxh[sc]
            if symmetric:
                r = max(r, nb_maxh[node])
            r *= scale * PRUNE_SLACK
            if aabb_dist2(sc_lo[sc], sc_hi[sc], nb_lo[node], nb_hi[node], box_len, periodic) > r * r:
                continue
            c = nb_child[node]
            if c >= 0:
                for k in range(7, -1, -1):
                    stack[sp] = c + k
                    sp += 1
                continue
            # leaf: candidate j-clusters in ascending order
            jfirst = max(nb_begin[node] // cj, last_j + 1)
            jlast = (nb_end[node] - 1) // cj
            for jc in range(jfirst, jlast + 1):
                last_j = jc
                jb = jc * cj
                je = min(jb + cj, n)
                mask = np.uint64(0)
                for ib in range(ib0, ib1):
                    i0 = ib * ci
                    i1 = min(i0 + ci, n)
                    if symmetric and je - 1 < i0:
                        continue
                    rr = ic_maxh[ib]
                    if symmetric:
                        rr = max(rr, jc_maxh[jc])
                    rr *= scale * PRUNE_SLACK
                    if aabb_dist2(ic_lo[ib], ic_hi[ib], jc_lo[jc], jc_hi[jc], box_len, periodic) > rr * rr:
                        continue
                    hit = False
                    for i in range(i0, i1):
                        for j in range(jb, je):
                            if symmetric and j < i:
                                continue
                            d2 = pair_delta(x[i], y[i], z[i], x[j], y[j], z[j], box_len, periodic)[3]
                            if symmetric:
                                cut = scale * max(h[i], h[j])
                            else:
                                cut = scale * h[i]
                            if d2 <= cut * cut:
                                hit = True
                                break
                        if hit:
                            break
                    if hit:
                        mask |= np.uint64(1) << np.uint64(ib - ib0)
                if mask != np.uint64(0):
                    if total == cap:
                        cap *= 2
                        nj = np.empty(cap, np.int64)
                        nm = np.empty(cap, np.uint64)
                        nj[:total] = out_j[:total]
                        nm[:total] = out_m[:total]
                        out_j = nj
                        out_m = nm
                    out_j[total] = jc
                    out_m[total] = mask
                    total += 1
        counts[sc] = total - start
    return counts, out_j[:total], out_m[:total]


@njit(cache=True)
def _blob_sizes(counts, out_j, mask_bytes, compress, w):
    n_sc = counts.shape[0]
    sizes = np.zeros(n_sc, np.int64)
    pos = 0
    for sc in range(n_sc):
        k = counts[sc]
        if compress:
            idx_bytes = codec.encoded_nbytes(out_j[pos:pos + k], w)
        else:
            idx_bytes = 4 * k
        sizes[sc] = k * mask_bytes + idx_bytes
        pos += k
    return sizes


@njit(cache=True)
def _fill_blob(counts, out_j, out_m, offsets, blob, mask_bytes, compress, w):
    pos = 0
    for sc in range(counts.shape[0]):
        k = counts[sc]
        p = offsets[sc]
        for e in range(k):
            m = out_m[pos + e]
            for b in range(mask_bytes):
                blob[p] = np.uint8((m >> np.uint64(8 * b)) & np.uint64(0xFF))
                p += 1
        if compress:
            codec.encode_into(out_j[pos:pos + k], w, blob, p)
        else:
            for e in range(k):
                v = out_j[pos + e]
                for b in range(4):
                    blob[p] = np.uint8((v >> (8 * b)) & 0xFF)
                    p += 1
        pos += k


@njit(cache=True)
def _decode_all(counts, offsets, blob, mask_bytes, compress, w):
    """Flatten the store into ``(super_cluster, j_cluster, mask)`` arrays.

    Returns a negative ``status`` with the failing byte offset on corruption.
    """
    total = 0
    for sc in range(counts.shape[0]):
        total += counts[sc]
    sc_of = np.empty(total, np.int64)
    js = np.empty(total, np.int64)
    ms = np.empty(total, np.uint64)
    pos = 0
    status = 0
    for sc in range(counts.shape[0]):
        k = counts[sc]
        p = offsets[sc]
        end = offsets[sc + 1]
        if p + k * mask_bytes > end:
            return sc_of, js, ms, -(p + 1)
        for e in range(k):
            m = np.uint64(0)
            for b in range(mask_bytes):
                m |= np.uint64(blob[p]) << np.uint64(8 * b)
                p += 1
            ms[pos + e] = m
            sc_of[pos + e] = sc
        if compress:
            q = codec.decode_from(blob[:end], p, k, w, js[pos:pos + k])
            if q < 0:
                return sc_of, js, ms, q
        else:
            if p + 4 * k > end:
                return sc_of, js, ms, -(p + 1)
            for e in range(k):
                v = np.int64(0)
                for b in range(4):
                    v |= np.int64(blob[p]) << (8 * b)
                    p += 1
                js[pos + e] = v
        pos += k
    return sc_of, js, ms, status


@dataclass(frozen=True)
class NeighborStore:
    """Per-super-cluster neighbor data in one packed blob.

    ``offsets`` has ``n_super_clusters + 1`` entries; the blob slice of
    super-cluster ``s`` is ``blob[offsets[s]:offsets[s + 1]]``.
    """

    n: int
    params: ClusterParams
    mode: str
    compress: bool
    build_scale: float
    counts: np.ndarray
    offsets: np.ndarray
    blob: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "counts", np.ascontiguousarray(self.counts, dtype=np.uint32))
        object.__setattr__(self, "offsets", np.ascontiguousarray(self.offsets, dtype=np.uint64))
        object.__setattr__(self, "blob", np.ascontiguousarray(self.blob, dtype=np.uint8))

    @property
    def n_super_clusters(self) -> int:
        return self.counts.shape[0]

    def neighbor_clusters(self, sc: int) -> list[tuple[int, int]]:
        """``(j_cluster, mask)`` pairs of one super-cluster in ascending order."""
        if not 0 <= sc < self.n_super_clusters:
            raise IndexError(f"super-cluster {sc} out of range")
        k = int(self.counts[sc])
        p, end = int(self.offsets[sc]), int(self.offsets[sc + 1])
        mb = self.params.mask_bytes
        chunk = self.blob[p:end]
        if k * mb > len(chunk):
            raise codec.CodecError(f"truncated bitmask block at byte offset {p}")
        masks = [int.from_bytes(chunk[e * mb:(e + 1) * mb].tobytes(), "little") for e in range(k)]
        tail = chunk[k * mb:]
        if self.compress:
            js = np.empty(k, dtype=np.int64)
            q = codec.decode_from(tail, 0, k, self.params.w, js)
            if q < 0:
                raise codec.CodecError(f"corrupt index list at byte offset {p + k * mb - q - 1}")
        else:
            if len(tail) < 4 * k:
                raise codec.CodecError(f"truncated index list at byte offset {p + k * mb}")
            js = np.frombuffer(tail[:4 * k].tobytes(), dtype="<u4").astype(np.int64)
        return list(zip(js.tolist(), masks))

    def flatten(self):
        """All entries as arrays ``(super_cluster, j_cluster, mask)``."""
        sc_of, js, ms, status = _decode_all(self.counts.astype(np.int64), self.offsets.astype(np.int64), self.blob,
                                            self.params.mask_bytes, self.compress, self.params.w)
        if status < 0:
            raise codec.CodecError(f"corrupt neighbor blob at byte offset {-status - 1}")
        return sc_of, js, ms

    def memory_footprint(self) -> tuple[int, float]:
        """``(total_bytes, bytes_per_particle)``: header arrays plus blob."""
        total = self.counts.nbytes + self.offsets.nbytes + int(self.offsets[-1])
        return total, (total / self.n if self.n else 0.0)

    # --- debug dump ------------------------------------------------------------
    _MAGIC = b"SFCNBS01"
    _HEADER = struct.Struct("<8sQQIIIIIId")

    def dump(self, path):
        """Write the store to a binary file (see README for the layout)."""
        with open(path, "wb") as f:
            f.write(self._HEADER.pack(
                self._MAGIC, self.n, self.n_super_clusters, self.params.ci, self.params.cj,
                self.params.w, int(self.compress), MODES.index(self.mode), 0, self.build_scale))
            f.write(self.counts.astype("<u4").tobytes())
            f.write(self.offsets.astype("<u8").tobytes())
            f.write(self.blob.tobytes())

    @classmethod
    def load(cls, path) -> "NeighborStore":
        with open(path, "rb") as f:
            raw = f.read()
        hdr = cls._HEADER
        if len(raw) < hdr.size:
            raise codec.CodecError("file shorter than header")
        magic, n, n_sc, ci, cj, w, comp, mode, _, scale = hdr.unpack_from(raw)
        if magic != cls._MAGIC:
            raise codec.CodecError("bad magic")
        buf = io.BytesIO(raw[hdr.size:])
        counts = np.frombuffer(buf.read(4 * n_sc), dtype="<u4").astype(np.int64)
        offsets = np.frombuffer(buf.read(8 * (n_sc + 1)), dtype="<u8").astype(np.int64)
        blob = np.frombuffer(buf.read(), dtype=np.uint8).copy()
        if counts.size != n_sc or offsets.size != n_sc + 1 or blob.size != offsets[-1]:
            raise codec.CodecError("truncated store file")
        return cls(int(n), ClusterParams(ci=ci, cj=cj, w=w), MODES[mode], bool(comp), scale,
                   counts, offsets, blob)


def _check_box(ps: ParticleSet, box: SimulationBox, scale: float):
    if ps.n == 0:
        return
    cutoff = scale * float(ps.h.max())
    for d in range(3):
        if box.periodic[d] and box.hi[d] - box.lo[d] < 2.0 * cutoff:
            raise BuildError(
                f"periodic box length {box.hi[d] - box.lo[d]:g} on axis {'xyz'[d]} "
                f"is below twice the largest cutoff {cutoff:g}")


def build(ps: ParticleSet, box: SimulationBox, tree: Octree, bp: BuildParams = BuildParams()) -> NeighborStore:
    """Build the clustered neighbor store of curve-sorted particles ``ps``."""
    ps.check_in_box(box)
    if tree.end[0] != ps.n:
        raise BuildError("octree does not match the particle set")
    _check_box(ps, box, bp.build_scale)
    cp = bp.params
    idx = ClusterIndexing(ps.n, cp)
    box_len, periodic = box_arrays(box)
    nb = node_bounds(tree, ps)
    ic = cluster_bounds(ps, cp.ci)
    jc = cluster_bounds(ps, cp.cj)
    sc = cluster_bounds(ps, cp.sc_size)
    counts, out_j, out_m = _collect(
        ps.x, ps.y, ps.z, ps.h, box_len, periodic, cp.ci, cp.cj,
        bp.mode == SYMMETRIC, float(bp.build_scale),
        tree.begin, tree.end, tree.first_child, nb.lo, nb.hi, nb.max_h,
        *ic, *jc, *sc)
    assert counts.shape[0] == idx.n_super_clusters

    sizes = _blob_sizes(counts, out_j, cp.mask_bytes, bp.compress, cp.w)
    offsets = np.zeros(counts.shape[0] + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    blob = np.zeros(int(offsets[-1]), dtype=np.uint8)
    _fill_blob(counts, out_j, out_m, offsets, blob, cp.mask_bytes, bp.compress, cp.w)
    return NeighborStore(ps.n, cp, bp.mode, bp.compress, float(bp.build_scale), counts, offsets, blob)
