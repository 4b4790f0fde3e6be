import numpy as np
import pytest
from conftest import candidate_keys, missing_pairs, sorted_store, uniform_particles

from sfc_nblist import (BuildError, BuildParams, ClusterParams, NeighborStore, ParticleSet, SimulationBox,
                        brute_force_pairs, build, build_octree, sort_by_sfc)
from sfc_nblist.codec import CodecError


@pytest.mark.parametrize("cluster", ["8x8", "8x4", "1x1"])
@pytest.mark.parametrize("mode", ["gather", "symmetric"])
@pytest.mark.parametrize("periodic", [True, False])
def test_store_covers_all_oracle_pairs(cluster, mode, periodic):
    ps, box = uniform_particles(2000, h=0.1, periodic=periodic, seed=3, h_spread=0.4)
    sps, _, store = sorted_store(ps, box, cluster, mode)
    pairs = brute_force_pairs(sps, box, 1.0, mode)
    assert len(pairs) > 0
    assert missing_pairs(store, pairs).size == 0


@pytest.mark.parametrize("scale", [1.0, 1.25])
def test_store_covers_pairs_at_build_scale(scale):
    ps, box = uniform_particles(1500, h=0.08, seed=5, h_spread=0.3)
    sps, _, store = sorted_store(ps, box, "8x4", "gather", scale=scale)
    assert missing_pairs(store, brute_force_pairs(sps, box, scale, "gather")).size == 0


@pytest.mark.parametrize("mode", ["gather", "symmetric"])
def test_entries_sorted_nonzero_and_sound(mode):
    ps, box = uniform_particles(1000, h=0.1, seed=7, h_spread=0.5)
    sps, _, store = sorted_store(ps, box, "8x4", mode)
    pairs = brute_force_pairs(sps, box, 1.0, mode)
    n = sps.n
    close = set((pairs[:, 0] * n + pairs[:, 1]).tolist()) | {i * n + i for i in range(n)}
    cp = store.params
    for sc in range(store.n_super_clusters):
        entries = store.neighbor_clusters(sc)
        js = [j for j, _ in entries]
        assert js == sorted(set(js))
        for j, mask in entries:
            assert mask != 0
            for b in range(cp.i_per_super):
                if not mask >> b & 1:
                    continue
                irange = range((sc * cp.i_per_super + b) * cp.ci, min((sc * cp.i_per_super + b + 1) * cp.ci, n))
                jrange = range(j * cp.cj, min((j + 1) * cp.cj, n))
                assert any(i * n + jj in close for i in irange for jj in jrange)


def test_symmetric_store_is_half_list():
    ps, box = uniform_particles(1200, h=0.1, seed=11)
    sps, _, store = sorted_store(ps, box, "8x8", "symmetric")
    sc_of, js, ms = store.flatten()
    pairs = set()
    for s, j, m in zip(sc_of.tolist(), js.tolist(), ms.tolist()):
        for b in range(8):
            if m >> b & 1:
                pairs.add((s * 8 + b, j))
    assert all(i <= j for i, j in pairs)
    # every self cluster is present exactly once
    assert all((k, k) in pairs for k in range(1200 // 8))


def test_saturated_ball():
    rng = np.random.default_rng(2)
    pos = 0.5 + 0.01 * rng.uniform(-1, 1, (64, 3))
    ps = ParticleSet(*pos.T, 1.0)
    box = SimulationBox.cube(1.0, False)
    sps, _, store = sorted_store(ps, box, "8x8", "gather")
    assert store.n_super_clusters == 1
    assert store.neighbor_clusters(0) == [(j, 0xFF) for j in range(8)]
    # eight 1-valued differences fit one 32-wide block: 8 mask bytes + 4 bytes
    assert store.blob.size == 8 + 4


def test_two_distant_particles_keep_only_self_entries():
    ps = ParticleSet([0.1, 0.9], [0.1, 0.9], [0.1, 0.9], 0.05)
    box = SimulationBox.cube(1.0, False)
    sps, _, store = sorted_store(ps, box, "1x1", "gather")
    assert store.neighbor_clusters(0) == [(0, 1), (1, 2)]
    sps, _, store = sorted_store(ps, box, "8x4", "gather")
    assert store.neighbor_clusters(0) == [(0, 1)]


@pytest.mark.parametrize("mode", ["gather", "symmetric"])
def test_compressed_and_plain_stores_agree(mode):
    ps, box = uniform_particles(3000, h=0.09, seed=13, h_spread=0.3)
    sps, _, comp = sorted_store(ps, box, "8x4", mode, compress=True)
    _, _, plain = sorted_store(ps, box, "8x4", mode, compress=False)
    assert comp.n_super_clusters == plain.n_super_clusters
    for sc in range(comp.n_super_clusters):
        assert comp.neighbor_clusters(sc) == plain.neighbor_clusters(sc)
    assert comp.blob.size < plain.blob.size


def test_build_is_deterministic():
    ps, box = uniform_particles(3000, h=0.09, seed=17, h_spread=0.3)
    a = sorted_store(ps, box)[2]
    b = sorted_store(ps, box)[2]
    assert a.blob.tobytes() == b.blob.tobytes()
    np.testing.assert_array_equal(a.offsets, b.offsets)
    np.testing.assert_array_equal(a.counts, b.counts)


@pytest.mark.parametrize("compress", [True, False])
def test_dump_load_round_trip(tmp_path, compress):
    ps, box = uniform_particles(700, h=0.1, seed=19)
    store = sorted_store(ps, box, "8x4", "symmetric", compress=compress, scale=1.1)[2]
    path = tmp_path / "store.bin"
    store.dump(path)
    back = NeighborStore.load(path)
    assert (back.n, back.params, back.mode, back.compress, back.build_scale) == \
        (store.n, store.params, store.mode, store.compress, store.build_scale)
    assert back.blob.tobytes() == store.blob.tobytes()
    assert [back.neighbor_clusters(s) for s in range(back.n_super_clusters)] == \
        [store.neighbor_clusters(s) for s in range(store.n_super_clusters)]


def test_load_rejects_bad_files(tmp_path):
    ps, box = uniform_particles(100, h=0.1)
    store = sorted_store(ps, box)[2]
    path = tmp_path / "s.bin"
    store.dump(path)
    raw = path.read_bytes()
    (tmp_path / "magic.bin").write_bytes(b"X" + raw[1:])
    (tmp_path / "short.bin").write_bytes(raw[:-1])
    for name in ("magic.bin", "short.bin"):
        with pytest.raises(CodecError):
            NeighborStore.load(tmp_path / name)


def test_corrupt_blob_detected():
    ps, box = uniform_particles(500, h=0.1, seed=23)
    store = sorted_store(ps, box)[2]
    k = int(store.counts[0])
    cut = NeighborStore(store.n, store.params, store.mode, store.compress, store.build_scale,
                        store.counts, np.r_[0, np.full(store.n_super_clusters, k)], store.blob[:k])
    with pytest.raises(CodecError):
        cut.neighbor_clusters(0)
    with pytest.raises(IndexError):
        store.neighbor_clusters(store.n_super_clusters)


def test_box_too_small_rejected():
    ps, box = uniform_particles(200, length=1.0, h=0.45, periodic=True)
    order = sort_by_sfc(ps, box)
    sps = ps.take(order.perm)
    tree = build_octree(order)
    build(sps, box, tree, BuildParams())
    with pytest.raises(BuildError):
        build(sps, box, tree, BuildParams(build_scale=1.2))
    # open boxes have no such limit
    obox = SimulationBox.cube(1.0, False)
    build(sps, obox, build_octree(sort_by_sfc(sps, obox)), BuildParams(build_scale=3.0))


def test_mismatched_tree_rejected():
    ps, box = uniform_particles(200, h=0.1)
    order = sort_by_sfc(ps, box)
    with pytest.raises(BuildError):
        build(ps.take(order.perm[:100]), box, build_octree(order), BuildParams())


def test_build_params_validation():
    with pytest.raises(ValueError):
        BuildParams(build_scale=0.9)
    with pytest.raises(ValueError):
        BuildParams(mode="half")


def test_memory_footprint_accounting():
    ps, box = uniform_particles(640, h=0.1, seed=29)
    store = sorted_store(ps, box)[2]
    total, per = store.memory_footprint()
    assert total == 4 * 10 + 8 * 11 + store.blob.size
    assert per == total / 640


def test_empty_particle_set():
    ps = ParticleSet(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))
    box = SimulationBox.cube(1.0)
    sps, _, store = sorted_store(ps, box)
    assert store.n_super_clusters == 0
    assert store.memory_footprint() == (8, 0.0)
    assert candidate_keys(store).size == 0


def test_blob_size_equals_masks_plus_encoded_lists():
    from sfc_nblist.codec import encode

    ps, box = uniform_particles(2000, h=0.1, seed=31)
    for cluster in ("8x8", "1x1"):
        _, _, store = sorted_store(ps, box, cluster, "gather")
        _, _, plain = sorted_store(ps, box, cluster, "gather", compress=False)
        mb = store.params.mask_bytes
        expect = 0
        for sc in range(store.n_super_clusters):
            js = [j for j, _ in store.neighbor_clusters(sc)]
            expect += mb * len(js) + encode(js, store.params.w).byte_len
        assert store.blob.size == expect
        assert plain.blob.size == (mb + 4) * int(store.counts.sum())
