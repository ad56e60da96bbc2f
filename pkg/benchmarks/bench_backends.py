"""Throughput comparison: compiled core against the pure-Python walks.

Runs the same seeded workload on both backends and reports walks per
second.  The two backends produce bit-identical estimates, so the only
thing this measures is speed; the script asserts the equality as a
sanity check while it is at it.

Usage: python3 benchmarks/bench_backends.py [--spp N] [--problem NAME]
"""

import argparse
import time

from spherewalk import backend
from spherewalk.catalog import PROBES_2D, PROBES_3D, catalog
from spherewalk.estimators import WalkConfig, solve


def _run(entry, estimator, spp, force_pure):
    probes = PROBES_2D if entry.scene.dim == 2 else PROBES_3D
    pts = list(probes)
    cfg = WalkConfig(rng_seed=1)
    backend.force_pure = force_pure
    try:
        t0 = time.perf_counter()
        res = solve(entry.scene, entry.problem, pts, spp=spp,
                    estimator=estimator, cfg=cfg)
        elapsed = time.perf_counter() - t0
    finally:
        backend.force_pure = False
    walks = len(pts) * spp
    return walks / elapsed, res


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spp", type=int, default=200,
                    help="walks per point for the pure backend; the compiled "
                         "backend runs 10x as many (default 200)")
    ap.add_argument("--problem", default="bump2d", choices=sorted(catalog()),
                    help="catalog problem to benchmark (default bump2d)")
    args = ap.parse_args()
    entry = catalog()[args.problem]

    print(f"problem: {args.problem}  (dim {entry.scene.dim})")
    if backend.active_backend() != "compiled":
        print("compiled backend unavailable; nothing to compare")
        return
    print(f"{'estimator':<10}{'pure walks/s':>14}{'compiled walks/s':>18}{'speedup':>9}")
    for estimator in ("dt", "nf"):
        pure_rate, pure_res = _run(entry, estimator, args.spp, force_pure=True)
        fast_rate, _ = _run(entry, estimator, 10 * args.spp, force_pure=False)
        equal_rate, fast_res = _run(entry, estimator, args.spp, force_pure=False)
        assert fast_res == pure_res, "backends disagree; run the parity tests"
        del equal_rate
        print(f"{estimator:<10}{pure_rate:>14,.0f}{fast_rate:>18,.0f}"
              f"{fast_rate / pure_rate:>8.1f}x")


if __name__ == "__main__":
    main()
