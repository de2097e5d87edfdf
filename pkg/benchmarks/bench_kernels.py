"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run on a simulated cohort of a few sizes; the table reports
the best-of-``repeat`` wall time per call and the speedup of the compiled
backend.  Both backends are also checked to agree on every input.
"""

import argparse
import timeit

import numpy as np

from cwotce import _kernels
from cwotce.capacity import default_measure
from cwotce.encoding import EncodingConfig, encode_cohort
from cwotce.simulator import get_scenario, simulate_trial


def cases(n_per_arm):
    cohort = simulate_trial(get_scenario("UNI-L", n_per_arm=n_per_arm))
    profiles = encode_cohort(cohort, EncodingConfig())
    table = default_measure().capacity_table
    pair_args = (cohort.followup, cohort.death.astype(np.uint8), cohort.event_offsets, cohort.event_times)
    return {
        "choquet_batch": (profiles, table),
        "doubled_midranks": (np.round(profiles[:, 2], 2).copy(),),
        "pair_matrix": pair_args,
    }


def best(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="100,500,2000", help="patients per arm")
    args = ap.parse_args()
    if _kernels.compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    print(f"{'kernel':<18}{'n/arm':>7}{'python ms':>12}{'compiled ms':>13}{'speedup':>9}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, fargs in cases(n).items():
            py_fn, c_fn = getattr(_kernels.fallback, name), getattr(_kernels.compiled, name)
            np.testing.assert_array_equal(py_fn(*fargs), c_fn(*fargs))
            t_py, t_c = best(py_fn, fargs, args.repeat), best(c_fn, fargs, args.repeat)
            print(f"{name:<18}{n:>7}{1e3 * t_py:>12.3f}{1e3 * t_c:>13.3f}{t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
