"""Benchmark the lower-level solver kernel: compiled extension vs the
pure-Python fallback.

Runs the same two workloads under both backends and prints a comparison:

* cold: one solve of the single-bottleneck 3-user instance from the far
  interior at a low-alpha corner, which forces a long crawl along the
  barrier face (the worst case the solver sees in practice);
* warm: a 200-round parameter sweep re-solving from the previous solution,
  which is the steady-state cost of the bilevel loop.

The backend is fixed at import time, so each measurement runs in a child
process; invoke with --worker to run one backend in-process.
"""

import argparse
import json
import os
import subprocess
import sys
import time

HERE = os.path.dirname(os.path.abspath(__file__))

COLD_ALPHA = (0.5, 0.6667, 0.6667)
COLD_CAP = 20000          # iteration budget; python would crawl for minutes
WARM_ROUNDS = 200


def _setup():
    from binum.config import preset
    from binum.topofile import parse_topology

    text, cfg = preset("paper-3user")
    spec = parse_topology(text)
    fs = spec.function_set(cfg.epsilon, cfg.tau)
    return spec.network, fs


def _bench_cold(net, fs):
    import numpy as np
    from binum.lower import LowerConfig, solve_lower

    cfg = LowerConfig(stepsize=1.0, max_iters=COLD_CAP, delta_phi=1e-2)
    alpha = np.array(COLD_ALPHA)
    t0 = time.perf_counter()
    _, cert = solve_lower(net, fs, alpha, cfg)
    dt = time.perf_counter() - t0
    return dt, cert.iterations


def _bench_warm(net, fs):
    import numpy as np
    from binum.lower import LowerConfig, solve_lower

    cfg = LowerConfig(stepsize=1.0, max_iters=200000, delta_phi=1e-2)
    alpha = np.array([2.0, 2.0, 2.0])
    x, cert = solve_lower(net, fs, alpha, cfg)
    t0 = time.perf_counter()
    iters = 0
    for k in range(WARM_ROUNDS):
        # drift alpha the way the upper level would
        alpha = alpha - 0.002
        x, cert = solve_lower(net, fs, alpha, cfg, x0=x, s0=cert.last_step)
        iters += cert.iterations
    dt = time.perf_counter() - t0
    return dt, iters


def run_worker():
    import binum

    net, fs = _setup()
    cold_s, cold_it = _bench_cold(net, fs)
    warm_s, warm_it = _bench_warm(net, fs)
    print(json.dumps({
        "backend": binum.BACKEND,
        "cold_s": cold_s, "cold_iters": cold_it,
        "warm_s": warm_s, "warm_iters": warm_it,
    }))


def run_backend(force_py):
    env = dict(os.environ)
    if force_py:
        env["BINUM_FORCE_PY"] = "1"
    else:
        env.pop("BINUM_FORCE_PY", None)
    out = subprocess.run([sys.executable, os.path.abspath(__file__),
                          "--worker"],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--worker", action="store_true",
                    help="run one backend in-process and print JSON")
    args = ap.parse_args()
    if args.worker:
        run_worker()
        return

    results = [run_backend(force_py=False), run_backend(force_py=True)]
    print(f"{'backend':<10} {'cold':>12} {'cold it/s':>12} "
          f"{'warm':>12} {'warm it/s':>12}")
    for r in results:
        print(f"{r['backend']:<10} {r['cold_s']:>10.3f} s "
              f"{r['cold_iters'] / r['cold_s']:>12.0f} "
              f"{r['warm_s']:>10.3f} s "
              f"{r['warm_iters'] / max(r['warm_s'], 1e-9):>12.0f}")
    if results[0]["backend"] != results[1]["backend"]:
        speed = results[1]["cold_s"] / results[0]["cold_s"]
        print(f"\ncompiled kernel is {speed:.0f}x faster on the cold solve")


if __name__ == "__main__":
    main()
