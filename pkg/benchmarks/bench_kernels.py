"""Benchmark the numba-jitted kernels against the pure-numpy fallbacks.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--sizes 50,500,5000] [--repeats 200]

Both implementations live in carmsim.kernels regardless of the active
backend, so a single process can time them side by side. Set
CARMSIM_NO_NUMBA=1 to check what the package would use without numba.
"""

import argparse
import time

import numpy as np

from carmsim import kernels
from carmsim.geometry import RigConfig, build_default_rig


def _time(fn, args, repeats):
    fn(*args)  # warm-up (numba compiles on first call)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def make_inputs(n, rng):
    rig = build_default_rig(RigConfig())
    K = rig.ap.intrinsics.matrix()
    R = rig.ap.pose.rotation
    t = rig.ap.pose.translation
    P = K @ np.hstack([R, t[:, None]])
    pts = rng.uniform(-75.0, 75.0, (n, 3))
    obs = rng.uniform(0.0, 1024.0, (n, 2))
    Pa = np.hstack([rig.ap.pose.rotation, rig.ap.pose.translation[:, None]])
    Pb = np.hstack([rig.lat.pose.rotation, rig.lat.pose.translation[:, None]])
    xa = rng.uniform(-0.1, 0.1, (n, 2))
    xb = rng.uniform(-0.1, 0.1, (n, 2))
    return {
        "project_batch": (P, pts),
        "reproj_system": (R, t, 4500.0, 4500.0, 512.0, 512.0, 0.0, pts, obs),
        "triangulate_batch": (Pa, Pb, xa, xb),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="50,500,5000",
                    help="comma-separated batch sizes")
    ap.add_argument("--repeats", type=int, default=200)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if not kernels.NUMBA_ENABLED:
        print("active backend: numpy (numba unavailable or disabled); "
              "timing the numpy path against itself is meaningless, "
              "unset CARMSIM_NO_NUMBA to compare")
    print("active backend: %s" % kernels.backend_name())

    pairs = {
        "project_batch": (kernels._project_batch_np, kernels.project_batch),
        "reproj_system": (kernels._reproj_system_np, kernels.reproj_system),
        "triangulate_batch": (kernels._triangulate_batch_np,
                              kernels.triangulate_batch),
    }

    rng = np.random.default_rng(0)
    print("%-18s %8s %12s %12s %8s" % ("kernel", "n", "numpy", "active",
                                       "speedup"))
    for n in sizes:
        inputs = make_inputs(n, rng)
        for name, (np_fn, active_fn) in pairs.items():
            t_np = _time(np_fn, inputs[name], args.repeats)
            t_ac = _time(active_fn, inputs[name], args.repeats)
            print("%-18s %8d %10.1f us %10.1f us %7.2fx"
                  % (name, n, t_np * 1e6, t_ac * 1e6, t_np / t_ac))


if __name__ == "__main__":
    main()
