"""Compare the compiled and numpy assembly kernels.

Times one stiffness assembly and one load assembly per backend on grids of
increasing size, checks that both backends agree, and prints a table::

    python benchmarks/bench_assembly.py [--sizes 40 100 200] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from randrb import _assembly_py
from randrb.fem import DofMap, StructuredGrid

try:
    from randrb import _assembly as _assembly_cy
except ImportError:
    _assembly_cy = None


def _problem(n):
    grid = StructuredGrid(0, 1, 0, 1, n, n)
    dm = DofMap.interior(grid)
    _, _, scatter = dm.pattern
    rng = np.random.default_rng(0)
    shape = (grid.n_cells, 4)
    coeffs = [np.exp(rng.standard_normal(shape)), rng.standard_normal(shape),
              rng.standard_normal(shape), np.abs(rng.standard_normal(shape))]
    return grid, dm, scatter, coeffs


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[40, 100, 200])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = [("python", _assembly_py)]
    if _assembly_cy is not None:
        backends.append(("cython", _assembly_cy))
    else:
        print("compiled kernel not built; timing the numpy backend only")

    print(f"{'cells':>8} {'kernel':>9} " + " ".join(f"{b:>12}" for b, _ in backends)
          + ("    speedup" if len(backends) == 2 else ""))
    for n in args.sizes:
        grid, dm, scatter, coeffs = _problem(n)
        N, Dx, Dy, W = grid.shape_tables
        cell_dofs = np.ascontiguousarray(dm.cell_dofs)
        nnz = dm.pattern[1].shape[0]
        rows = {"stiffness": [], "load": []}
        ref = {}
        for name, mod in backends:
            def stiff(mod=mod):
                data = np.zeros(nnz)
                mod.assemble_cells(data, scatter, *coeffs, N, Dx, Dy, W)
                return data

            def load(mod=mod):
                out = np.zeros(dm.n_dofs)
                mod.assemble_load(out, cell_dofs, coeffs[0], N, W)
                return out

            for kernel, fn in (("stiffness", stiff), ("load", load)):
                result = fn()
                if kernel in ref:
                    err = np.max(np.abs(result - ref[kernel])) / np.max(np.abs(ref[kernel]))
                    if err > 1e-12:
                        raise SystemExit(f"{kernel} backends disagree: rel err {err:.2e}")
                else:
                    ref[kernel] = result
                rows[kernel].append(_time(fn, args.repeat))
        for kernel, ts in rows.items():
            line = f"{grid.n_cells:>8} {kernel:>9} " + " ".join(f"{t * 1e3:>10.2f}ms" for t in ts)
            if len(ts) == 2:
                line += f"  {ts[0] / ts[1]:>8.1f}x"
            print(line)


if __name__ == "__main__":
    main()
