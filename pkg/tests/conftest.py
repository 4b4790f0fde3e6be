import numpy as np
import pytest

from sfc_nblist import BuildParams, ClusterParams, ParticleSet, SimulationBox, build, build_octree, sort_by_sfc


def uniform_particles(n, length=1.0, h=0.1, periodic=True, seed=0, h_spread=0.0):
    rng = np.random.default_rng(seed)
    box = SimulationBox.cube(length, periodic)
    pos = rng.uniform(0.0, length, size=(n, 3))
    hh = np.full(n, h)
    if h_spread:
        hh = hh * rng.uniform(1 - h_spread, 1 + h_spread, n)
    fields = {"m": rng.uniform(0.5, 1.5, n), "q": rng.choice([-1.0, 1.0], n)}
    return ParticleSet(pos[:, 0], pos[:, 1], pos[:, 2], hh, fields), box


def sorted_store(ps, box, cluster="8x4", mode="gather", compress=True, scale=1.0, w=32):
    """Sort ``ps`` along the curve and build a store; returns ``(sorted_ps, order, store)``."""
    order = sort_by_sfc(ps, box)
    sps = ps.take(order.perm)
    tree = build_octree(order, 64)
    bp = BuildParams(ClusterParams.parse(cluster, w=w), mode, compress, scale)
    return sps, order, build(sps, box, tree, bp)


def candidate_keys(store):
    """Every (i, j) pair slot the store makes the pass visit, as ``i * n + j`` keys."""
    n = store.n
    cp = store.params
    sc_of, js, ms = store.flatten()
    keys = []
    for b in range(cp.i_per_super):
        hit = ((ms >> np.uint64(b)) & np.uint64(1)).astype(bool)
        i0 = (sc_of[hit] * cp.i_per_super + b) * cp.ci
        j0 = js[hit] * cp.cj
        for a in range(cp.ci):
            for c in range(cp.cj):
                i = i0 + a
                j = j0 + c
                ok = (i < n) & (j < n)
                keys.append(i[ok] * n + j[ok])
    return np.unique(np.concatenate(keys)) if keys else np.zeros(0, np.int64)


def missing_pairs(store, pairs):
    """Oracle pairs not covered by the store (symmetric stores hold each pair as i < j)."""
    n = store.n
    i, j = pairs[:, 0], pairs[:, 1]
    if store.mode == "symmetric":
        i, j = np.minimum(i, j), np.maximum(i, j)
    want = np.unique(i * n + j)
    return want[~np.isin(want, candidate_keys(store))]


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.max(np.abs(b)) if b.size else 0.0
    if scale == 0:
        return float(np.max(np.abs(a))) if a.size else 0.0
    return float(np.max(np.abs(a - b)) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
