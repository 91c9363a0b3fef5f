"""Time the compiled and pure-numpy paths of each hot kernel.

    python3 benchmarks/bench_kernels.py [--repeat 3]

The numba path is warmed up once before timing so compile time is excluded.
"""
import argparse
import math
import time

from martstab._accel import HAVE_NUMBA
from martstab.bellman import Family, majorization_sweep
from martstab.chain import ChainSpec, chain_lp_summary
from martstab.kernels.wedge_mc import simulate_exits


def _time(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


CASES = {
    "majorization (1e6 pts, p=3, orth)":
        lambda b: majorization_sweep(3.0, Family.ORTH, n=1_000_000, backend=b),
    "chain_sweep (N=2^20, p=1.5, eta=0.05)":
        lambda b: chain_lp_summary(ChainSpec(1.5, 4.0, 1 << 20, 0.05), backend=b),
    "wedge_mc (2000 paths)":
        lambda b: simulate_exits(math.pi / 2 - 0.36, (1.0, 0.0), 2000, 1e-5, 0, 2, backend=b),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    print(f"{'kernel':42s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, fn in CASES.items():
        fn("numba")
        t_jit = _time(lambda: fn("numba"), args.repeat)
        t_np = _time(lambda: fn("numpy"), 1 if "wedge" in name else args.repeat)
        print(f"{name:42s} {t_jit:10.4f} {t_np:10.4f} {t_np / t_jit:8.1f}")


if __name__ == "__main__":
    main()
