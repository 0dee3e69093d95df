"""Time the numba kernels against the pure-numpy fallbacks.

The backend is fixed at import time, so each path runs in its own child
process (``FAIRFOLIO_DISABLE_JIT=1`` for numpy).  Numba compile time is paid
in a warm-up call and excluded.  Both children also hash their DP tables so
the parent can confirm the two paths agree bit for bit.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--n 300] [--p 5]
"""
import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    fn()  # warm-up (jit compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def child(args):
    from fairfolio import kernels
    from fairfolio._accel import backend
    from fairfolio.fair_exante import run_dynamics
    from fairfolio.market_io import synthetic_universe
    from fairfolio.regret import Grouping, Population

    rng = np.random.default_rng(1)
    r = np.sort(rng.uniform(0, 1, args.n))
    w = rng.uniform(0, 1, args.n)
    w /= w.sum()
    uni = synthetic_universe(50, seed=3)
    a0 = np.full(uni.size, 1.0 / uni.size)
    lmax = float(np.linalg.eigvalsh(uni.sigma).max())
    pop = Population(r, r)
    grouping = Grouping(rng.integers(0, 3, args.n), 3)

    T, Z = kernels.dp_table(r, w, args.p)
    digest = hashlib.sha256(T.tobytes() + Z.tobytes()).hexdigest()
    out = {
        "backend": backend(),
        "dp_table": _best(lambda: kernels.dp_table(r, w, args.p), args.repeat),
        "ascent_simplex": _best(
            lambda: kernels.ascent_simplex(uni.mu, uni.sigma, 5.0, a0, 1.0 / (10.0 * lmax), 5000, 0.0),
            args.repeat,
        ),
        "run_dynamics_T50": _best(lambda: run_dynamics(pop, grouping, args.p, 50), max(1, args.repeat // 2)),
        "dp_digest": digest,
    }
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--p", type=int, default=5)
    ap.add_argument("--child", action="store_true")
    args = ap.parse_args()
    if args.child:
        child(args)
        return

    results = {}
    for name, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, FAIRFOLIO_DISABLE_JIT=flag)
        cmd = [sys.executable, __file__, "--child", "--repeat", str(args.repeat), "--n", str(args.n), "--p", str(args.p)]
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        results[name] = json.loads(proc.stdout.strip().splitlines()[-1])

    print(f"n={args.n} p={args.p} repeat={args.repeat} (best of, seconds)")
    print(f"{'kernel':<20}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for k in ("dp_table", "ascent_simplex", "run_dynamics_T50"):
        a, b = results["numba"][k], results["numpy"][k]
        print(f"{k:<20}{a:>12.5f}{b:>12.5f}{b / a:>9.1f}x")
    same = results["numba"]["dp_digest"] == results["numpy"]["dp_digest"]
    print(f"dp tables identical across backends: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
