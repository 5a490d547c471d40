"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--sizes 50 200 800] [--repeat 5] [--json out.json]

Every kernel runs on identical inputs for each backend; the script also
checks that the two backends agree before reporting times.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from slasso._backend import available_backends


def _problem(p: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    n = max(p // 2, 10)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[: max(p // 10, 1)] = 1.0
    y = X @ beta + 0.5 * rng.standard_normal(n)
    K = np.ascontiguousarray(X.T @ X / n)
    c = X.T @ y / n
    L = 2.0 * float(np.linalg.eigvalsh(K)[-1])
    return K, c, float(y @ y / n), L, rng


def _cases(p: int):
    K, c, yy, L, rng = _problem(p)
    lam = 0.1 * 2.0 * float(np.max(np.abs(c)))
    v = np.cumsum(rng.standard_normal(p))
    spd = K + np.eye(p)
    small = np.ascontiguousarray(spd[: min(p, 120), : min(p, 120)])
    zero = np.zeros(p)
    return {
        "soft_threshold": lambda k: k.soft_threshold(v, 0.5),
        "tv_prox": lambda k: k.tv_prox(v, 0.8),
        "cholesky": lambda k: k.cholesky_lower(spd)[0],
        "jacobi_eig": lambda k: np.sort(k.jacobi_eigvals(small, 1e-12, 100)[0]),
        "fista_lasso": lambda k: k.fista_gram(K, c, yy, lam, 0.0, zero, L, 2000, 1e-8, True)[0],
        "fista_fused": lambda k: k.fista_gram(K, c, yy, lam, lam, zero, L, 2000, 1e-8, True)[0],
    }


def run(sizes, repeat: int):
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the fallback will be timed", file=sys.stderr)
    rows = []
    for p in sizes:
        for name, call in _cases(p).items():
            outs = {b: np.asarray(call(k)) for b, k in backends.items()}
            if len(outs) == 2:
                diff = float(np.max(np.abs(outs["cython"] - outs["python"])))
                scale = max(float(np.max(np.abs(outs["python"]))), 1.0)
                if diff > 1e-6 * scale:
                    raise SystemExit(f"backends disagree on {name} (p={p}): {diff:.3g}")
            row = {"kernel": name, "p": p}
            for b, k in backends.items():
                number = 1
                while timeit.timeit(lambda: call(k), number=number) < 0.05 and number < 10000:
                    number *= 4
                best = min(timeit.repeat(lambda: call(k), number=number, repeat=repeat)) / number
                row[b] = best
            if len(backends) == 2:
                row["speedup"] = row["python"] / row["cython"]
            rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 800])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None, help="also write the rows as JSON")
    args = ap.parse_args(argv)
    rows = run(args.sizes, args.repeat)
    header = f"{'kernel':<15}{'p':>6}{'python (s)':>14}{'cython (s)':>14}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for r in rows:
        cy = f"{r['cython']:>14.3e}" if "cython" in r else f"{'-':>14}"
        sp = f"{r['speedup']:>10.1f}" if "speedup" in r else f"{'-':>10}"
        print(f"{r['kernel']:<15}{r['p']:>6}{r['python']:>14.3e}{cy}{sp}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
