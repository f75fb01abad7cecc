"""Timing harness for the batch kernels: numba backend vs numpy fallback.

Builds one guarded-protocol matrix, samples a block of fade draws and
times matrix evaluation, mutual information and outage counting under
both backends.  The selection mechanism is the same ASAF_BACKEND
environment variable the library uses, so what is timed here is exactly
what outage_prob runs.

Usage::

    python3 benchmarks/bench_kernels.py [--relays 3] [--slots 6]
        [--slot-len 8] [--theta 2] [--block 4096] [--repeat 5]

The first numba call pays the JIT compilation cost; it is excluded by a
warm-up pass (compiled functions are cached on disk after that).
"""

import argparse
import os
import time

import numpy as np

from asaf import AsyncModel, DelayProfile, NetworkConfig, build_guard, sample_fade_block
from asaf.kernels import HAVE_NUMBA, compile_matrix, eval_batch, mi_batch, outage_count


def time_backend(backend, cm, fades, rho, thr, repeat):
    os.environ["ASAF_BACKEND"] = backend
    # warm-up: JIT compile (numba) and touch the caches
    eval_batch(cm, fades[:64])
    mi_batch(cm, fades[:64], rho)
    outage_count(cm, fades[:64], rho, thr)

    out = {}
    for name, fn in [
        ("eval", lambda: eval_batch(cm, fades)),
        ("mi", lambda: mi_batch(cm, fades, rho)),
        ("outage", lambda: outage_count(cm, fades, rho, thr)),
    ]:
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out[name] = best
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--relays", type=int, default=3)
    ap.add_argument("--slots", type=int, default=6)
    ap.add_argument("--slot-len", type=int, default=8)
    ap.add_argument("--theta", type=int, default=2)
    ap.add_argument("--block", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    cfg = NetworkConfig(args.relays, args.slots, args.slot_len,
                        guard_len=args.theta,
                        model=AsyncModel.PROPAGATION_DELAY)
    nu = tuple(args.theta if i == 0 else 0 for i in range(args.relays))
    dp = DelayProfile.propagation(nu, (0,) * args.relays)
    m = build_guard(cfg, dp)
    cm = compile_matrix(m, cfg.n_relays)
    fades = sample_fade_block(cfg, 0, 0, args.block)
    rho = 10.0 ** 2.5
    thr = 0.3 * m.rows * np.log2(1.0 + rho)   # mid-curve threshold

    print(f"matrix {m.rows}x{m.cols}, block {args.block} draws, "
          f"best of {args.repeat}")

    results = {"numpy": time_backend("numpy", cm, fades, rho, thr, args.repeat)}
    if HAVE_NUMBA:
        results["numba"] = time_backend("numba", cm, fades, rho, thr, args.repeat)
    else:
        print("numba not importable; timing the numpy fallback only")

    for name in ("eval", "mi", "outage"):
        line = f"{name:>7}:"
        for backend in results:
            sec = results[backend][name]
            line += f"  {backend} {sec * 1e3:8.2f} ms ({args.block / sec:,.0f}/s)"
        if "numba" in results:
            line += f"  speedup x{results['numpy'][name] / results['numba'][name]:.1f}"
        print(line)


if __name__ == "__main__":
    main()
