"""Compare the Cython and numpy DTW kernels.

Times the cumulative-cost pass, the backtrack, and a full CTW alignment on
random inputs for every available backend, and checks the backends agree.

    python benchmarks/bench_kernels.py [--sizes 100 300 1000] [--repeat 5] [--json out.json]
"""
import argparse
import json
import timeit

import numpy as np

from svcorrect import align, kernels


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def _use(backend):
    kernels.accumulate, kernels.backtrack = kernels.backends()[backend]


def run(sizes, repeat, dims=24, seed=0):
    rng = np.random.default_rng(seed)
    names = list(kernels.backends())
    rows = []
    for n in sizes:
        m = int(n * 1.3)
        cost = np.ascontiguousarray(rng.random((n, m)))
        x = rng.normal(size=(n, dims))
        y = rng.normal(size=(m, dims))
        row = {"n": n, "m": m}
        results = {}
        for name in names:
            acc_fn, back_fn = kernels.backends()[name]
            acc = acc_fn(cost)
            row[f"{name}_accumulate"] = _best(lambda: acc_fn(cost), repeat)
            row[f"{name}_backtrack"] = _best(lambda: back_fn(acc), repeat)
            _use(name)
            row[f"{name}_ctw"] = _best(lambda: align.ctw(x, y), max(1, repeat // 2))
            results[name] = (acc, back_fn(acc))
        ref_acc, ref_path = results[names[0]]
        row["identical"] = all(np.array_equal(a, ref_acc) and np.array_equal(p, ref_path)
                               for a, p in results.values())
        rows.append(row)
    _use(kernels.BACKEND)
    return names, rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 1000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the raw timings here")
    args = ap.parse_args(argv)
    names, rows = run(args.sizes, args.repeat)
    print(f"default backend: {kernels.BACKEND}; available: {', '.join(names)}")
    header = f"{'N x M':>12}" + "".join(f"{n + ' ' + k:>22}" for n in names for k in ("accum", "back", "ctw"))
    if len(names) > 1:
        header += f"{'speedup ctw':>14}"
    print(header + f"{'identical':>11}")
    for r in rows:
        line = f"{r['n']:>5} x {r['m']:<5}"
        for n in names:
            for k in ("accumulate", "backtrack", "ctw"):
                line += f"{r[f'{n}_{k}'] * 1e3:>19.2f} ms"
        if len(names) > 1:
            line += f"{r['python_ctw'] / r['cython_ctw']:>13.1f}x"
        print(line + f"{str(r['identical']):>11}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
