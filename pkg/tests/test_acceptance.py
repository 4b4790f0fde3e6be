"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line with the measured
quantity and wall time, then asserts both the numeric threshold and the
time budget.
"""

import time

import numpy as np
import pytest
from conftest import missing_pairs, rel_err, sorted_store

from sfc_nblist import (PassConfig, build_full_list, count_kernel, direct_reduce, lj_kernel, reduce, reduce_full,
                        sph_density_kernel)
from sfc_nblist.baselines import brute_force_counts, brute_force_pairs
from sfc_nblist.bench import BenchConfig, cluster_overhead, generate
from sfc_nblist.codec import MAX_DIFF, decode, encode, encode_block, encoded_size_bits

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def _report(label, ok, detail, elapsed, limit):
        within = elapsed < limit
        status = "PASS" if ok and within else "FAIL"
        with capsys.disabled():
            print(f"\n[{status}] {label}: {detail}; {elapsed:.2f} s (limit {limit:g} s)")
        assert ok, detail
        assert within, f"took {elapsed:.2f} s, limit {limit} s"

    return _report


def test_codec_block_examples(report):
    t0 = time.perf_counter()
    rows = [
        ([1, 1, 1, 1, 1, 1], "000000", (), ()),
        ([1, 2, 9, 7, 1, 1], "011100", (0x8, 0xF, 0xD), ()),
        ([234, 1, 1, 56789, 1, 1], "100100", (0x1, 0x3), (0xE, 0xA, 0xD, 0xD, 0xD, 0x5)),
    ]
    bad = []
    for diffs, mask, info, data in rows:
        blk = encode_block(diffs)
        if (blk.mask_string(), blk.info, blk.data) != (mask, info, data):
            bad.append(diffs)
    report("1 codec block examples", not bad, f"{len(rows) - len(bad)}/{len(rows)} rows exact",
           time.perf_counter() - t0, 1.0)


def size_table(v):
    """Required bits per difference, read off the piecewise size table."""
    if v == 1:
        return 1
    if 2 <= v <= 9:
        return 5
    if 10 <= v < 16:
        return 9
    for n in range(1, 8):
        if 2 ** (4 * n) <= v < 2 ** (4 * n + 4):
            return 9 + 4 * n
    raise AssertionError(v)


def test_codec_size_law(report):
    t0 = time.perf_counter()
    exhaustive = range(1, 2**20 + 1)
    mismatches = sum(encoded_size_bits(v) != size_table(v) for v in exhaustive)
    rng = np.random.default_rng(2)
    # log-uniform samples cover every nibble class up to 2^32 - 1
    sampled = np.unique(np.minimum(np.exp2(rng.uniform(0, 32, 200_000)).astype(np.int64), MAX_DIFF))
    edges = [2 ** (4 * n) + d for n in range(1, 8) for d in (-1, 0)] + [MAX_DIFF]
    values = np.concatenate([sampled, edges]).tolist()
    mismatches += sum(encoded_size_bits(v) != size_table(v) for v in values)
    checked = len(exhaustive) + len(values)
    report("2 codec size law", mismatches == 0, f"{mismatches} mismatches over {checked} values",
           time.perf_counter() - t0, 10.0)


def random_sorted_list(rng):
    length = int(rng.integers(0, 5001))
    if length == 0:
        return np.zeros(0, np.int64)
    # mix gap scales so every size class appears, then clip into 32-bit range
    scale = 2.0 ** rng.uniform(0, 32 - np.log2(length + 1))
    gaps = 1 + np.floor(rng.exponential(scale, length)).astype(np.int64)
    idx = np.cumsum(gaps) - 1 + int(rng.integers(0, 2**16))
    idx = idx[idx < MAX_DIFF]
    if rng.random() < 0.05 and idx.size:
        idx[-1] = MAX_DIFF
    return idx


def test_codec_round_trip(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    failures = 0
    total = 0
    for k in range(10_000):
        idx = random_sorted_list(rng)
        w = 32 if k % 2 else 64
        out = decode(encode(idx, w))
        total += idx.size
        failures += not np.array_equal(out, idx)
    report("3 codec round trip", failures == 0, f"{failures}/10000 lists differ ({total} indices)",
           time.perf_counter() - t0, 30.0)


COMPLETENESS_CASES = [
    # distribution, periodic, variable radius, mode, cluster
    ("uniform", True, False, "gather", "8x8"),
    ("uniform", True, True, "symmetric", "8x4"),
    ("uniform", False, False, "symmetric", "8x8"),
    ("uniform", False, True, "gather", "8x4"),
    ("evrard", True, False, "gather", "8x4"),
    ("evrard", True, True, "symmetric", "8x8"),
    ("evrard", False, False, "symmetric", "8x4"),
    ("evrard", False, True, "gather", "8x8"),
    ("uniform", True, True, "gather", "8x8"),
    ("evrard", False, True, "symmetric", "8x4"),
    ("uniform", False, False, "gather", "8x4"),
    ("evrard", True, False, "symmetric", "8x8"),
]


def case_particles(dist, periodic, variable, seed):
    cfg = BenchConfig(distribution=dist, n=10_000, target_neighbors=50, periodic="xyz" if periodic else "none",
                      h_spread=0.3 if (variable and dist == "uniform") else 0.0,
                      constant_h=not variable, seed=seed)
    return generate(cfg)


def test_neighbor_completeness(report):
    t0 = time.perf_counter()
    failures = []
    for k, (dist, periodic, variable, mode, cluster) in enumerate(COMPLETENESS_CASES):
        ps, box = case_particles(dist, periodic, variable, seed=100 + k)
        sps, _, store = sorted_store(ps, box, cluster, mode, compress=bool(k % 2 == 0))
        missing = missing_pairs(store, brute_force_pairs(sps, box, 1.0, mode)).size
        counts = reduce(sps, box, store, count_kernel())["count"]
        exact = np.array_equal(counts, brute_force_counts(sps, box, 1.0, mode))
        if missing or not exact:
            failures.append(f"{dist}/{periodic}/{variable}/{mode}/{cluster}: missing={missing} exact={exact}")
    report("4 neighbor completeness", not failures,
           f"{len(COMPLETENESS_CASES) - len(failures)}/{len(COMPLETENESS_CASES)} configurations complete and exact"
           + ("; " + "; ".join(failures) if failures else ""), time.perf_counter() - t0, 300.0)


def test_kernel_equivalence(report):
    t0 = time.perf_counter()
    worst = 0.0
    newton = 0.0
    cases = [("uniform", "xyz", "gather"), ("uniform", "xyz", "symmetric"),
             ("evrard", "none", "symmetric"), ("evrard", "none", "gather")]
    for dist, periodic, mode in cases:
        cfg = BenchConfig(distribution=dist, n=10_000, target_neighbors=60, periodic=periodic, seed=7)
        ps, box = generate(cfg)
        spacing = (np.prod(box.lengths) / ps.n) ** (1 / 3)
        kernels = [lj_kernel(1.0, 0.3 * spacing, coulomb=0.5)]
        if mode == "gather":
            # m_j W(d, h_i) is only even under exchange for uniform radii and masses
            kernels.append(sph_density_kernel())
        sps, _, store = sorted_store(ps, box, "8x4", mode)
        flist = build_full_list(sps, box, 1.0, mode)
        for kern in kernels:
            a = reduce(sps, box, store, kern)
            b = reduce_full(flist, sps, box, kern)
            c = direct_reduce(sps, box, kern, mode=mode)
            for name in a.outputs:
                worst = max(worst, rel_err(a[name], c[name]), rel_err(b[name], c[name]))
            if "force" in a.outputs and periodic == "none":
                for res in (a, b, c):
                    f = res["force"]
                    newton = max(newton, float(np.abs(f.sum(axis=0)).max() / np.abs(f).sum()))
    ok = worst <= 1e-12 and newton <= 1e-10
    report("5 kernel equivalence", ok, f"max relative difference {worst:.2e} (<= 1e-12), "
           f"|sum F|/sum|F| {newton:.2e} (<= 1e-10)", time.perf_counter() - t0, 120.0)


def test_memory_footprint(report):
    t0 = time.perf_counter()
    ps, box = generate(BenchConfig(n=100_000, target_neighbors=200))
    sps, _, comp = sorted_store(ps, box, "8x4", "gather", compress=True)
    _, _, plain = sorted_store(ps, box, "8x4", "gather", compress=False)
    full = build_full_list(sps, box)
    bpp = comp.memory_footprint()[1]
    ratio = plain.memory_footprint()[1] / bpp
    full_ratio = full.memory_footprint()[1] / bpp
    mean = np.diff(full.offsets).mean()
    ok = 2.0 <= bpp <= 7.0 and ratio >= 3.0 and full_ratio >= 100.0
    report("6 memory footprint", ok,
           f"8x4 compressed {bpp:.2f} B/particle (in [2, 7], reference 3.6), uncompressed/compressed "
           f"{ratio:.2f} (>= 3), full/compressed {full_ratio:.0f} (>= 100), mean neighbors {mean:.0f}",
           time.perf_counter() - t0, 120.0)


def test_cluster_overhead_sweep(report):
    t0 = time.perf_counter()
    targets = (25, 50, 100, 200, 350, 500)
    table = {c: [] for c in ("8x8", "8x4", "1x1")}
    for t in targets:
        ps, box = generate(BenchConfig(n=20_000, target_neighbors=t, density=100.0, seed=5))
        for cluster in table:
            sps, _, store = sorted_store(ps, box, cluster, "gather")
            table[cluster].append(cluster_overhead(sps, box, store))
    o88, o84, o11 = (np.array(table[c]) for c in ("8x8", "8x4", "1x1"))
    ok = (np.all(o11 == 1.0) and np.all(o84 >= o11) and np.all(o88 >= o84)
          and np.all(np.diff(o88) < 0) and np.all(np.diff(o84) < 0))
    detail = "; ".join(f"{t}: 8x8 {a:.2f} 8x4 {b:.2f} 1x1 {c:.2f}" for t, a, b, c in zip(targets, o88, o84, o11))
    report("7 cluster overhead", ok, detail, time.perf_counter() - t0, 300.0)


def test_skin_invariance(report):
    t0 = time.perf_counter()
    cfg = BenchConfig(n=10_000, target_neighbors=100, h_spread=0.3, seed=9)
    ps, box = generate(cfg)
    spacing = (np.prod(box.lengths) / ps.n) ** (1 / 3)
    kern = lj_kernel(1.0, 0.3 * spacing, coulomb=0.5)
    worst = 0.0
    counts_equal = True
    for mode in ("gather", "symmetric"):
        ref = None
        for scale in (1.0, 1.1, 1.3):
            sps, _, store = sorted_store(ps, box, "8x4", mode, scale=scale)
            res = reduce(sps, box, store, kern, PassConfig(query_scale=1.0))
            if ref is None:
                ref = res
                continue
            counts_equal &= np.array_equal(res.neighbor_count, ref.neighbor_count)
            worst = max(worst, *(rel_err(res[k], ref[k]) for k in res.outputs))
    report("8 skin invariance", worst <= 1e-12 and counts_equal,
           f"max relative difference {worst:.2e} (<= 1e-12), neighbor counts equal: {counts_equal}",
           time.perf_counter() - t0, 60.0)
