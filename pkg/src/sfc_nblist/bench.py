"""Benchmark harness: particle generators, cluster overhead and CSV reporting.

Run ``sfc-nblist-bench --help`` for the flags.  A config file holds
``key = value`` lines using the flag names (``target-neighbors = 200``);
command-line flags override it.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import statistics
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import neighbor_counts
from .clusters import ClusterParams
from .kernels import count_kernel, lj_kernel, sph_density_kernel
from .nblist import GATHER, MODES, BuildParams, NeighborStore, build
from .octree import build_octree
from .reduction import PassConfig, reduce
from .sfc import DEFAULT_BITS, ParticleSet, SimulationBox, sort_by_sfc

log = logging.getLogger(__name__)

CSV_COLUMNS = ("config_id", "n", "mean_neighbors", "build_ms", "pass_ms", "bytes_per_particle",
               "overhead_ratio", "output_hash", "build_ms_median", "pass_ms_median")


@dataclass(frozen=True)
class BenchConfig:
    distribution: str = "uniform"
    n: int = 100_000
    target_neighbors: float = 200.0
    density: float = 100.0
    periodic: str = "xyz"
    cluster: str = "8x4"
    w: int = 32
    compress: bool = True
    mode: str = GATHER
    kernel: str = "lj"
    cutoff_scale: float = 1.0
    h_spread: float = 0.0
    constant_h: bool = False
    precision: str = "double"
    coulomb: float = 0.0
    repeats: int = 3
    seed: int = 12345

    def __post_init__(self):
        if self.distribution not in ("uniform", "evrard"):
            raise ValueError("distribution must be 'uniform' or 'evrard'")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.target_neighbors >= 1:
            raise ValueError("target_neighbors must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.kernel not in ("lj", "density", "count"):
            raise ValueError("kernel must be lj, density or count")
        if self.repeats < 0:
            raise ValueError("repeats must be >= 0")
        if not 0.0 <= self.h_spread < 1.0:
            raise ValueError("h_spread must be in [0, 1)")

    @property
    def cluster_params(self) -> ClusterParams:
        return ClusterParams.parse(self.cluster, w=self.w)

    @property
    def config_id(self) -> str:
        return (f"{self.distribution}-{self.cluster}-{self.mode}-{'c' if self.compress else 'u'}"
                f"-k{self.kernel}-t{self.target_neighbors:g}-s{self.cutoff_scale:g}")


def uniform_radius(density: float, target_neighbors: float) -> float:
    """Radius whose sphere holds ``target_neighbors`` particles at number density ``density``."""
    return (3.0 * target_neighbors / (4.0 * np.pi * density)) ** (1.0 / 3.0)


def _periodic_flags(axes: str) -> str:
    axes = axes.lower()
    return "" if axes in ("", "none", "open") else axes


def _calibrate(ps, box, target, iterations=6):
    """Rescale all radii so the mean gather neighbor count approaches ``target``."""
    h0 = ps.h.copy()
    f = 1.0
    for _ in range(iterations):
        ps.h = h0 * f
        mean = neighbor_counts(ps, box).mean()
        if mean <= 0:
            f *= 2.0
            continue
        if abs(mean / target - 1) < 0.01:
            break
        f *= (target / mean) ** (1.0 / 3.0)
    ps.h = h0 * f
    return ps


def generate(cfg: BenchConfig) -> tuple[ParticleSet, SimulationBox]:
    """Seeded particle set and box for ``cfg``."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    if cfg.distribution == "uniform":
        length = (n / cfg.density) ** (1.0 / 3.0)
        box = SimulationBox.cube(length, _periodic_flags(cfg.periodic))
        pos = rng.uniform(0.0, length, size=(n, 3))
        h = np.full(n, uniform_radius(cfg.density, cfg.target_neighbors))
    else:
        box = SimulationBox((-1.0,) * 3, (1.0,) * 3, tuple(ax in _periodic_flags(cfg.periodic) for ax in "xyz"))
        # mass density ~ 1/r inside the unit sphere: M(<r) ~ r^2
        r = np.sqrt(rng.uniform(0.0, 1.0, n))
        r = np.maximum(r, 1e-6)
        cost = rng.uniform(-1.0, 1.0, n)
        phi = rng.uniform(0.0, 2 * np.pi, n)
        sint = np.sqrt(1.0 - cost**2)
        pos = np.stack([r * sint * np.cos(phi), r * sint * np.sin(phi), r * cost], axis=1)
        if cfg.constant_h:
            h = np.full(n, uniform_radius(n / (4.0 / 3.0 * np.pi), cfg.target_neighbors))
        else:
            local_density = n / (2.0 * np.pi * r)
            h = uniform_radius(local_density, cfg.target_neighbors)
    if cfg.h_spread:
        h = h * rng.uniform(1.0 - cfg.h_spread, 1.0 + cfg.h_spread, n)
    fields = {
        "m": np.full(n, 1.0 / n),
        "q": rng.choice([-1.0, 1.0], n),
    }
    ps = ParticleSet(*box.wrap(*pos.T), h, fields)
    if cfg.distribution == "evrard":
        _calibrate(ps, box, cfg.target_neighbors)
    return ps, box


def cluster_overhead(ps: ParticleSet, box: SimulationBox, store: NeighborStore) -> float:
    """Evaluated pair slots over in-range pairs at the store's build radius.

    Slots are ``|I_b| * |J|`` for every stored (i-cluster, j-cluster) pair
    with its mask bit set; in-range pairs are ``sum_i |{j : d_ij <= s*h_i}|``
    including ``j = i``, which is also a stored slot.
    """
    if store.mode != GATHER:
        raise ValueError("cluster overhead is defined for gather-mode stores")
    cp = store.params
    sc_of, js, ms = store.flatten()
    n = ps.n
    jsize = np.minimum(js * cp.cj + cp.cj, n) - js * cp.cj
    slots = 0
    for b in range(cp.i_per_super):
        hit = ((ms >> np.uint64(b)) & np.uint64(1)).astype(bool)
        i0 = (sc_of[hit] * cp.i_per_super + b) * cp.ci
        isize = np.minimum(i0 + cp.ci, n) - i0
        slots += int(np.sum(isize * jsize[hit]))
    pairs = int(neighbor_counts(ps, box, store.build_scale, GATHER, include_self=True).sum())
    return slots / pairs


def make_kernel(cfg: BenchConfig, box: SimulationBox):
    if cfg.kernel == "count":
        return count_kernel()
    if cfg.kernel == "density":
        return sph_density_kernel()
    spacing = (np.prod(box.lengths) / cfg.n) ** (1.0 / 3.0)
    return lj_kernel(epsilon=1.0, sigma=0.3 * spacing, coulomb=cfg.coulomb or None)


def output_hash(outputs: dict[str, np.ndarray]) -> str:
    digest = hashlib.sha256()
    for name in sorted(outputs):
        digest.update(name.encode())
        digest.update(np.ascontiguousarray(outputs[name], dtype=np.float64).tobytes())
    return digest.hexdigest()[:16]


@dataclass
class BenchRun:
    row: dict
    store: NeighborStore = field(repr=False)
    sorted_ps: ParticleSet = field(repr=False)
    box: SimulationBox = field(repr=False)
    outputs: dict = field(repr=False)


def run_bench(cfg: BenchConfig, overhead: bool = True) -> BenchRun:
    """Build and pass ``cfg.repeats`` times (after one warm-up) and summarise."""
    ps, box = generate(cfg)
    bp = BuildParams(cfg.cluster_params, cfg.mode, cfg.compress, cfg.cutoff_scale)
    pcfg = PassConfig(query_scale=1.0, precision=cfg.precision)
    kernel = make_kernel(cfg, box)

    build_t, pass_t = [], []
    for rep in range(cfg.repeats + 1):
        t0 = time.perf_counter()
        order = sort_by_sfc(ps, box, DEFAULT_BITS)
        sps = ps.take(order.perm)
        tree = build_octree(order, 64)
        store = build(sps, box, tree, bp)
        t1 = time.perf_counter()
        res = reduce(sps, box, store, kernel, pcfg)
        t2 = time.perf_counter()
        # with repeats=0 the single (cold) run is what gets reported
        if rep or cfg.repeats == 0:
            build_t.append(1e3 * (t1 - t0))
            pass_t.append(1e3 * (t2 - t1))

    inv = np.empty_like(order.perm)
    inv[order.perm] = np.arange(ps.n)
    outputs = {k: v[inv] for k, v in res.outputs.items()}
    _, bpp = store.memory_footprint()
    ratio = cluster_overhead(sps, box, store) if (overhead and cfg.mode == GATHER) else float("nan")
    row = {
        "config_id": cfg.config_id,
        "n": ps.n,
        "mean_neighbors": float(res.neighbor_count.mean()),
        "build_ms": min(build_t),
        "pass_ms": min(pass_t),
        "bytes_per_particle": bpp,
        "overhead_ratio": ratio,
        "output_hash": output_hash(outputs),
        "build_ms_median": statistics.median(build_t),
        "pass_ms_median": statistics.median(pass_t),
    }
    log.info("%s", row)
    return BenchRun(row, store, sps, box, outputs)


def write_csv(rows, fh):
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})


# --- command line --------------------------------------------------------------

def _onoff(v: str) -> bool:
    v = str(v).lower()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {v!r}")


def read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfc-nblist-bench", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key=value file; flags override its entries")
    p.add_argument("--distribution", choices=("uniform", "evrard"), default="uniform")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--target-neighbors", default="200",
                   help="mean neighbor count; a comma-separated list runs a sweep")
    p.add_argument("--density", type=float, default=100.0, help="number density of the uniform box")
    p.add_argument("--cutoff-scale", type=float, default=1.0, help="build radius / query radius (Verlet skin)")
    p.add_argument("--cluster", default="8x4", help="comma-separated list of 8x8, 8x4, 1x1, ...")
    p.add_argument("--compress", type=_onoff, default=True)
    p.add_argument("--mode", choices=MODES, default=GATHER)
    p.add_argument("--kernel", choices=("lj", "density", "count"), default="lj")
    p.add_argument("--periodic", default="xyz", help="periodic axes, e.g. xyz, xy or none")
    p.add_argument("--h-spread", type=float, default=0.0, help="relative random spread of radii")
    p.add_argument("--precision", choices=("double", "single"), default="double")
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--csv", help="output path (stdout if omitted)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    pre, _ = parser.parse_known_args(argv)
    if pre.config:
        values = read_config_file(pre.config)
        known = {a.dest for a in parser._actions}
        unknown = set(values) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        defaults = {}
        for action in parser._actions:
            if action.dest in values:
                raw = values[action.dest]
                defaults[action.dest] = action.type(raw) if action.type else raw
        parser.set_defaults(**defaults)
    return parser.parse_args(argv)


def configs_from_args(args) -> list[BenchConfig]:
    base = BenchConfig(
        distribution=args.distribution, n=args.n, density=args.density, periodic=args.periodic,
        compress=args.compress, mode=args.mode, kernel=args.kernel, cutoff_scale=args.cutoff_scale,
        h_spread=args.h_spread, precision=args.precision, repeats=args.repeats, seed=args.seed,
    )
    out = []
    for cluster in str(args.cluster).split(","):
        for target in str(args.target_neighbors).split(","):
            out.append(replace(base, cluster=cluster.strip(), target_neighbors=float(target)))
    return out


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    rows = [run_bench(cfg).row for cfg in configs_from_args(args)]
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
