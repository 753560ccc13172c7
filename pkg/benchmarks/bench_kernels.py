"""Compare the compiled kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--batch 2000] [--dim 4] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from tetradfield.kernels import get_backend


def inputs(batch, n, seed=0):
    rng = np.random.default_rng(seed)
    E = np.ascontiguousarray(np.eye(n) + 0.3 * rng.normal(size=(batch, n, n)))
    de = np.ascontiguousarray(rng.normal(size=(batch, n, n, n)))
    S = de - de.swapaxes(-1, -2)
    G = np.ascontiguousarray(rng.normal(size=(batch, n, n)))
    return {"torsion_from_jet": (E, de), "connection_from_jet": (E, de), "killing": (S,),
            "trace_vector": (S,), "killing_pullback": (G, S)}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        cy = get_backend("cython")
    except ImportError:
        print("compiled kernels not built; nothing to compare")
        return 1
    py = get_backend("numpy")
    print(f"batch={args.batch} dim={args.dim}")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>10}{'max |diff|':>12}")
    for name, a in inputs(args.batch, args.dim).items():
        f_py, f_cy = getattr(py, name), getattr(cy, name)
        t_py = min(timeit.repeat(lambda: f_py(*a), number=3, repeat=args.repeat)) / 3
        t_cy = min(timeit.repeat(lambda: f_cy(*a), number=3, repeat=args.repeat)) / 3
        diff = float(np.max(np.abs(f_py(*a) - f_cy(*a))))
        print(f"{name:<22}{1e3 * t_py:>12.3f}{1e3 * t_cy:>13.3f}{t_py / t_cy:>9.1f}x{diff:>12.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
