#!/usr/bin/env python3
"""Compare the compiled and pure-NumPy engine paths on the embedded presets.

Each configuration runs in a fresh subprocess (the acceleration choice is
made at import time), once with numba enabled and once with
``SWITCHTRACK_NUMBA=0``. The report shows wall time per simulated step and
the worst numeric deviation between the two paths.

Usage: python benchmarks/bench_engine.py [--quick] [--preset NAME]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
from pathlib import Path

WORKER = r"""
import json, sys, time
import numpy as np
import switchtrack as st
from switchtrack import engine

preset, duration, out_npz, out_json = sys.argv[1], float(sys.argv[2]), sys.argv[3], sys.argv[4]
sc = st.load_scenario(preset=preset)
sc.duration = duration
engine.run(sc, seed=0)  # warm-up: JIT compile / cache load
t0 = time.perf_counter()
log = engine.run(sc, seed=0)
elapsed = time.perf_counter() - t0
np.savez_compressed(out_npz, t=log.t, x=log.x, v_sigma=log.v_sigma)
json.dump(
    {
        "elapsed": elapsed,
        "steps": int(log.t.shape[0] - 1),
        "using_numba": st.USING_NUMBA,
        "violations": len(log.monitor.violations),
    },
    open(out_json, "w"),
)
"""


def run_worker(preset: str, duration: float, numba_on: bool, workdir: Path) -> dict:
    tag = "numba" if numba_on else "numpy"
    out_npz = workdir / f"{preset}-{tag}.npz"
    out_json = workdir / f"{preset}-{tag}.json"
    env = dict(os.environ)
    env["SWITCHTRACK_NUMBA"] = "1" if numba_on else "0"
    subprocess.run(
        [sys.executable, "-c", WORKER, preset, str(duration), str(out_npz), str(out_json)],
        check=True,
        env=env,
    )
    result = json.loads(out_json.read_text())
    result["npz"] = out_npz
    return result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="short runs (5 s simulated)")
    parser.add_argument("--preset", choices=["sim-circle", "quad-integrator"], default=None)
    args = parser.parse_args(argv)

    import numpy as np

    presets = {
        "sim-circle": 5.0 if args.quick else 30.0,
        "quad-integrator": 5.0 if args.quick else 185.0,
    }
    if args.preset:
        presets = {args.preset: presets[args.preset]}

    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        print(f"{'preset':<16} {'steps':>7} {'numba':>9} {'numpy':>9} {'speedup':>8} "
              f"{'max |dx|':>10} {'max |dV|':>10}")
        for preset, duration in presets.items():
            fast = run_worker(preset, duration, True, workdir)
            slow = run_worker(preset, duration, False, workdir)
            if not fast["using_numba"]:
                print(f"{preset:<16} numba unavailable; both runs used the NumPy path")
            a = np.load(fast["npz"])
            b = np.load(slow["npz"])
            dx = float(np.max(np.abs(a["x"] - b["x"])))
            dv = float(np.max(np.abs(a["v_sigma"] - b["v_sigma"])))
            speedup = slow["elapsed"] / fast["elapsed"]
            print(
                f"{preset:<16} {fast['steps']:>7} {fast['elapsed']:>8.2f}s "
                f"{slow['elapsed']:>8.2f}s {speedup:>7.1f}x {dx:>10.2e} {dv:>10.2e}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
