"""Time the compiled stencil kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 32 64] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from reactive_blobs import _backend
from reactive_blobs.grid import GridSpec
from reactive_blobs.multigrid import MultigridHierarchy

OPS = ("rbgs", "rbgs_reverse", "apply_operator", "residual", "neighbor_sum")


def use(impl):
    """Route the multigrid stencil calls through ``impl``."""
    for name in OPS:
        setattr(_backend, name, getattr(impl, name))


def bench(n, repeat):
    spec = GridSpec.cube(n)
    rng = np.random.default_rng(n)
    g = rng.standard_normal(spec.shape)
    g -= g.mean()
    rows = {}
    for name, impl in _backend.implementations().items():
        use(impl)
        hier = MultigridHierarchy(spec, beta=1.0)
        lv = hier.levels[0]
        x = rng.standard_normal(spec.shape)
        cases = {
            "smoother (2 sweeps)": lambda: impl.rbgs(x, g, lv.diag, lv.coef, True, 2),
            "residual": lambda: impl.residual(x, g, lv.diag, lv.coef, True),
            "V-cycle": lambda: hier.v_cycle_array(g),
        }
        for label, fn in cases.items():
            fn()
            rows.setdefault(label, {})[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[32, 64])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    saved = {name: getattr(_backend, name) for name in OPS}
    names = list(_backend.implementations())
    print(f"{'n':>4} {'operation':<20}" + "".join(f"{k + ' [ms]':>16}" for k in names) + f"{'speedup':>10}")
    try:
        for n in args.sizes:
            for label, t in bench(n, args.repeat).items():
                cols = "".join(f"{1e3 * t[k]:16.3f}" for k in names)
                speed = f"{t['numpy'] / t['compiled']:10.1f}" if "compiled" in t else f"{'n/a':>10}"
                print(f"{n:>4} {label:<20}{cols}{speed}")
    finally:
        for name, fn in saved.items():
            setattr(_backend, name, fn)


if __name__ == "__main__":
    main()
