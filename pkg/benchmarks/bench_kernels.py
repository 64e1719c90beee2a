"""Compare the compiled and pure-Python plan evaluation kernels.

    python benchmarks/bench_kernels.py [--n 16] [--masks 20000] [--repeat 3]

Both backends are checked for identical results before timing.
"""
from __future__ import annotations

import argparse
import pathlib
import sys
import time

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "tests"))

from instances import MODES, random_instance  # noqa: E402
from raas import kernels  # noqa: E402
from raas.optimizer import build_instance  # noqa: E402


def _instance(n: int):
    for seed in range(10_000):
        cands, vols, td, params = random_instance(seed, max_n=n)
        if len(cands) == n:
            return build_instance(cands, vols, td, params, MODES)
    raise RuntimeError(f"no random instance with {n} candidates")


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=16, help="candidates per instance")
    ap.add_argument("--masks", type=int, default=20_000, help="selections scored per run")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    inst = _instance(args.n)
    kargs = inst.kernel_args()
    masks = np.random.default_rng(0).integers(0, 2, (args.masks, inst.n)).astype(np.int8)
    be = kernels.backends()
    ref = None
    print(f"n={inst.n} candidates, {args.masks} selections, exhaustive 2^{inst.n} subsets")
    print(f"{'backend':<8} {'evaluate/s':>14} {'enumerate (s)':>14}")
    rows = {}
    for name, mod in be.items():
        out = [mod.evaluate(m, *kargs) for m in masks[:200]]
        full = mod.enumerate_best(*kargs, inst.rank, False)
        if ref is None:
            ref = (out, full)
        elif (out, full) != ref:
            print(f"{name}: results differ from the reference backend", file=sys.stderr)
            return 1
        t_eval = _best(lambda: [mod.evaluate(m, *kargs) for m in masks], args.repeat)
        t_enum = _best(lambda: mod.enumerate_best(*kargs, inst.rank, False), args.repeat)
        rows[name] = (t_eval, t_enum)
        print(f"{name:<8} {args.masks / t_eval:>14,.0f} {t_enum:>14.4f}")
    if len(rows) == 2:
        (pe, pn), (ce, cn) = rows["python"], rows["cython"]
        print(f"speed-up: evaluate x{pe / ce:.1f}, enumerate x{pn / cn:.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
