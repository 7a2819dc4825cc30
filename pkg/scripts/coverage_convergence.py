"""How fast the traced frontier covers achievable rates as the budget grid is refined.

For random networks, two sets of achievable points are compared with the traced
frontier at each grid size: random full-power beamformers, and the frontier of a
much finer reference trace. The additive distance by which they stick out beyond
the coarse frontier should shrink as the grid is refined.

Usage: python scripts/coverage_convergence.py [--networks 5] [--grids 4 8 16]
"""

import argparse
import time

import numpy as np

from sudregion.oracle import random_beamformer_rates, random_network
from sudregion.region import RegionGrid, frontier_violation, trace_region


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--networks", type=int, default=5)
    ap.add_argument("--users", type=int, default=2)
    ap.add_argument("--antennas", type=int, default=3)
    ap.add_argument("--grids", type=int, nargs="+", default=[4, 8, 16])
    ap.add_argument("--probes", type=int, default=20_000)
    ap.add_argument("--reference", type=int, default=48, help="grid size of the reference trace")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    random_gap = np.zeros((args.networks, len(args.grids)))
    ref_gap = np.zeros_like(random_gap)
    for n in range(args.networks):
        net = random_network(rng, args.users, args.antennas)
        probes = random_beamformer_rates(net, args.probes, seed=args.seed + n)
        ref = trace_region(net, RegionGrid(G=args.reference), workers=args.workers).rates
        for g, G in enumerate(args.grids):
            t0 = time.perf_counter()
            ps = trace_region(net, RegionGrid(G=G), workers=args.workers)
            random_gap[n, g] = frontier_violation(ps.rates, probes)
            ref_gap[n, g] = frontier_violation(ps.rates, ref)
            print(f"network {n}  G={G:3d}  points={len(ps):6d}  random={random_gap[n, g]:.3e}"
                  f"  reference={ref_gap[n, g]:.3e}  ({time.perf_counter() - t0:.1f}s)")

    print(f"\n{'G':<6s} {'random max':>12s} {'reference max':>14s} {'reference mean':>15s}")
    for g, G in enumerate(args.grids):
        print(f"{G:<6d} {random_gap[:, g].max():12.3e} {ref_gap[:, g].max():14.3e} {ref_gap[:, g].mean():15.3e}")


if __name__ == "__main__":
    main()
