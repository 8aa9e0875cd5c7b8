"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from solvlin import _kernels_py

try:
    from solvlin import _kernels as _kernels_cy
except ImportError:
    _kernels_cy = None

CONE = (5, 0.0, -1.0, 1.0, 1.0)


def workloads(impl, rng):
    n, k = 2000, 8
    x0 = rng.uniform(0.5, 2.0, n)
    y0 = rng.uniform(-1.0, 1.0, n)
    dts = rng.uniform(0.05, 0.6, (n, k))
    us = rng.uniform(-1.0, 1.0, (n, k))
    seg_dts = rng.uniform(0.1, 0.5, 20)
    seg_us = rng.uniform(-1.0, 1.0, 20)
    return {
        "nf_flow x 20000": lambda: [impl.nf_flow(*CONE, 1.2, 0.3, 0.4, 0.7) for _ in range(20000)],
        "flow_batch 2000x8": lambda: impl.flow_batch(*CONE, x0, y0, dts, us, 1.0),
        "rk4_piecewise h=1e-3": lambda: impl.rk4_piecewise(
            1.0, -1.0, 1.0, 1.0, 1.2, 0.3, seg_dts, seg_us, 1e-3
        ),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = {"python": _kernels_py}
    if _kernels_cy is not None:
        impls["cython"] = _kernels_cy
    else:
        print("compiled extension not built; timing the fallback only")
    rng = np.random.default_rng(0)
    results = {}
    for name, impl in impls.items():
        for label, fn in workloads(impl, rng).items():
            results.setdefault(label, {})[name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    print("%-24s %12s %12s %9s" % ("kernel", "python [s]", "cython [s]", "speedup"))
    for label, row in results.items():
        cy = row.get("cython")
        speed = "%8.1fx" % (row["python"] / cy) if cy else "      n/a"
        print("%-24s %12.4f %12s %s" % (label, row["python"], "%.4f" % cy if cy else "n/a", speed))


if __name__ == "__main__":
    main()
