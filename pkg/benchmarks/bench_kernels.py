"""Time every hot kernel under numba and under the numpy fallback.

Run: python3 benchmarks/bench_kernels.py [--repeat 5]
Both tables are loaded in one process, so SEQLAB_NO_NUMBA is not needed here.
"""
import argparse
import timeit

import numpy as np

from seqlab import _kernels as K
from seqlab.bodies import make_body


def cases(rng):
    lattice = make_body({"kind": "MultiIsotonicLattice", "n": 64, "p": 2})
    lines = np.ascontiguousarray(lattice._lines(), dtype=np.int64)
    return {
        "pava_rows": (rng.normal(size=(2000, 128)),),
        "greedy_pack": (rng.normal(size=(4000, 8)), 0.5, 4000),
        "l1_project": (rng.normal(scale=2, size=(2000, 64)), 1.0),
        "ellipsoid_project": (rng.normal(scale=2, size=(2000, 64)), np.linspace(2.0, 0.5, 64), 1e-13, 200),
        "lp_project": (rng.normal(scale=2, size=(2000, 64)), 1.5, 1.0, 1e-14, 200),
        "lattice_iso": (rng.normal(size=(50, 64)), lines, 1e-9, 100_000),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not K.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}  max|diff|")
    for name, call_args in cases(rng).items():
        fast, slow = K.NUMBA_IMPL[name], K.NUMPY_IMPL[name]
        a, b = fast(*call_args), slow(*call_args)   # first call compiles
        if name == "lattice_iso":
            a, b = a[0], b[0]
        diff = float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float))))
        tf = min(timeit.repeat(lambda: fast(*call_args), number=1, repeat=args.repeat))
        ts = min(timeit.repeat(lambda: slow(*call_args), number=1, repeat=args.repeat))
        print(f"{name:<20}{1e3 * tf:>12.2f}{1e3 * ts:>12.2f}{ts / tf:>10.1f}  {diff:.1e}")


if __name__ == "__main__":
    main()
