"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints the best-of-N wall time of each kernel for a few problem sizes and the
speed-up of the compiled backend. Both backends are checked for agreement first.
"""
import argparse
import timeit

import numpy as np

from hbgfdi.kernels import _tanks_py

try:
    from hbgfdi.kernels import _tanks_cy
except ImportError:
    _tanks_cy = None


def integrator_case(n, seed=0):
    rng = np.random.default_rng(seed)
    params = np.ones((n, 3, 7))
    params[n // 3:, :, 4] = 5.0
    inputs = np.repeat(rng.uniform(0, 1.5, (max(1, n // 200), 2)), 200, axis=0)[:n]
    inputs = np.vstack([inputs, np.zeros((n - len(inputs), 2))])
    return (np.zeros(3), params, inputs, 0.01, (0.5, 0.7))


def persistence_case(n, seed=0):
    rng = np.random.default_rng(seed)
    return ((rng.random((n, 3)) < 0.7).astype(np.uint8), 3)


def best(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _tanks_cy is None:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
    rows = []
    for n in (1_000, 10_000, 100_000):
        case = integrator_case(n)
        a, b = _tanks_py.integrate_tanks(*case), _tanks_cy.integrate_tanks(*case)
        assert np.allclose(a[0], b[0], atol=1e-12) and np.array_equal(a[1], b[1])
        rows.append(("integrate_tanks", n, best(_tanks_py.integrate_tanks, case, args.repeat),
                     best(_tanks_cy.integrate_tanks, case, args.repeat)))
    for n in (10_000, 1_000_000):
        case = persistence_case(n)
        assert np.array_equal(_tanks_py.persistence_mask(*case), _tanks_cy.persistence_mask(*case))
        rows.append(("persistence_mask", n, best(_tanks_py.persistence_mask, case, args.repeat),
                     best(_tanks_cy.persistence_mask, case, args.repeat)))
    print(f"{'kernel':<18}{'steps':>10}{'python [ms]':>14}{'cython [ms]':>14}{'speed-up':>10}")
    for name, n, tp, tc in rows:
        print(f"{name:<18}{n:>10}{tp * 1e3:>14.2f}{tc * 1e3:>14.3f}{tp / tc:>9.0f}x")


if __name__ == "__main__":
    main()
