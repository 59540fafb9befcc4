"""Compare the numba and numpy kernel backends.

Each backend runs in its own interpreter because the choice is made at import
time from ``SEA_DISABLE_NUMBA``. Reported times exclude one warm-up run
(numba compilation or cache load).

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from sea_dynamics import _kernels, run_scenario
from sea_dynamics.evolution import diagonal_log_state

repeat = int(sys.argv[1])
out = {"backend": _kernels.BACKEND}
for name in ("fig1", "fig3"):
    run_scenario(name)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        run_scenario(name)
        times.append(time.perf_counter() - t0)
    out[name] = times

# raw right-hand-side throughput, no reports
e = np.array([0, 1 / 3, 2 / 3, 1.0])
q, active = diagonal_log_state(np.array([0.5, 0.2, 0.1, 0.2]))
_kernels._deriv(q, active, e, _kernels.TAU_CONSTANT, 1.0)
n = 20000
t0 = time.perf_counter()
for _ in range(n):
    _kernels._deriv(q, active, e, _kernels.TAU_CONSTANT, 1.0)
out["deriv_us"] = 1e6 * (time.perf_counter() - t0) / n
print(json.dumps(out))
"""


def run_backend(disable_numba, repeat):
    env = dict(os.environ, SEA_DISABLE_NUMBA="1" if disable_numba else "0")
    proc = subprocess.run(
        [sys.executable, "-c", CHILD, str(repeat)], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    rows = [run_backend(False, args.repeat), run_backend(True, args.repeat)]
    print(f"{'backend':8s} {'fig1 best [s]':>14s} {'fig3 best [s]':>14s} {'rhs call [us]':>14s}")
    for r in rows:
        print(f"{r['backend']:8s} {min(r['fig1']):14.3f} {min(r['fig3']):14.3f} {r['deriv_us']:14.2f}")


if __name__ == "__main__":
    main()
