"""Time hierarchical label propagation on the compiled and pure-Python kernels.

    python benchmarks/bench_backends.py [--runs 20] [--sizes 40,200,1000]

Both backends must return identical labels and objectives; the script checks
that before reporting timings.
"""

import argparse
import time

import numpy as np

from estranet.dual import derive_seed
from estranet.lpa import get_backend, prepare
from estranet.quality import compute_history
from estranet.synthetic import HiddenGroupSpec, generate


def workload(n: int, seed: int = 0):
    spec = HiddenGroupSpec(
        n_nodes=n,
        m_background=2 * n,
        m_extra=n // 2,
        phases=[(range(0, 2), tuple(range(n // 4)))],
        n_snapshots=2,
        seed=seed,
    )
    g0, g1 = generate(spec)
    p0 = np.arange(g0.n) % max(1, n // 8)
    return g1, compute_history(g0, p0, g1)


def time_backend(name, g, z, lam, runs):
    problem = prepare(g, z, backend=name)
    out = []
    start = time.perf_counter()
    for r in range(runs):
        out.append(problem.hlpa(lam, derive_seed(0, lam, r), 1000, 1e-10, None))
    return time.perf_counter() - start, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--sizes", default="40,200,1000")
    ap.add_argument("--lam", type=float, default=0.5)
    args = ap.parse_args()
    try:
        get_backend("cython")
    except ImportError:
        raise SystemExit("compiled kernel not built; run pip install -e . first")

    print(f"{'nodes':>6} {'edges':>6} {'cython ms/run':>14} {'python ms/run':>14} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        g, z = workload(n)
        py_runs = max(1, args.runs // (1 + n // 200))
        t_c, out_c = time_backend("cython", g, z, args.lam, args.runs)
        t_p, out_p = time_backend("python", g, z, args.lam, py_runs)
        for (lc, oc, vc, _), (lp, op, vp, _) in zip(out_c, out_p):
            if not (np.array_equal(lc, lp) and oc == op and vc == vp):
                raise SystemExit(f"backends disagree on n={n}")
        ms_c = 1e3 * t_c / args.runs
        ms_p = 1e3 * t_p / py_runs
        print(f"{n:>6} {g.n_edges:>6} {ms_c:>14.3f} {ms_p:>14.3f} {ms_p / ms_c:>7.1f}x")


if __name__ == "__main__":
    main()
