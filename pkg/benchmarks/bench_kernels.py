"""Time the compiled and numpy disk kernels on lattices of increasing size.

    python3 benchmarks/bench_kernels.py [--sizes 128,256,512] [--repeat 5]

Prints one line per (kernel, size, backend) with the best wall time, plus the
speed-up of the compiled path and the max difference between the two outputs.
"""

import argparse
import time

import numpy as np

from twoscale import kernels


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(sizes, repeat, level_gap=3):
    rng = np.random.default_rng(0)
    radius2 = (2.0 ** (level_gap / 2)) ** 2 * (1 + 1e-12)
    backends = kernels.available_backends()
    rows = []
    for size in sizes:
        v = rng.random((size, size))
        valid = np.ones_like(v, dtype=bool)
        valid[:, :3] = False
        gbar = rng.random((size, size))
        lse = kernels.disk_lse(v, valid, radius2, 0.001)
        cases = {
            "disk_max": lambda: kernels.disk_max(v, valid, radius2),
            "disk_lr_sum(r=1)": lambda: kernels.disk_lr_sum(v, valid, radius2, 1.0),
            "disk_lse(eps=.01)": lambda: kernels.disk_lse(v, valid, radius2, 0.01),
            "disk_lse(eps=.001)": lambda: kernels.disk_lse(v, valid, radius2, 0.001),
            "lse_adjoint(.001)": lambda: kernels.disk_lse_adjoint(v, valid, radius2, 0.001, lse, gbar),
        }
        for name, fn in cases.items():
            res = {}
            for b in backends:
                kernels.set_backend(b)
                res[b] = _best(fn, repeat)
            line = {"kernel": name, "size": size, **{b: res[b][0] for b in backends}}
            if len(backends) == 2:
                a, c = res["python"][1], res["cython"][1]
                line["speedup"] = res["python"][0] / res["cython"][0]
                line["maxdiff"] = float(np.max(np.abs(np.where(np.isfinite(a), a - c, 0.0))))
            rows.append(line)
    kernels.set_backend(backends[-1])
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="128,256,512")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rows = run([int(s) for s in args.sizes.split(",")], args.repeat)
    for r in rows:
        extra = f"  speedup {r['speedup']:.1f}x  maxdiff {r['maxdiff']:.1e}" if "speedup" in r else ""
        timings = "  ".join(f"{b} {r[b] * 1e3:8.2f} ms" for b in kernels.available_backends())
        print(f"{r['kernel']:<18} n={r['size']:<5} {timings}{extra}")


if __name__ == "__main__":
    main()
