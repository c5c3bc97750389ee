"""Benchmark the R-peak detector with and without the numba kernels.

Runs the detection twice in child processes -- one with numba enabled,
one with FWAVE_DISABLE_NUMBA=1 -- on the same long synthetic record, and
prints the timing comparison. Usage:

    python benchmarks/bench_detector.py [--minutes 30] [--repeats 5]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile

import numpy as np

CHILD = """
import json, sys, time
import numpy as np
from fwave import _kernels
from fwave.beats import detect_r_peaks_energy

x = np.load(sys.argv[1])
repeats = int(sys.argv[2])
detect_r_peaks_energy(x[:20000], 200.0)  # warm up (JIT compile)
best = float("inf")
for _ in range(repeats):
    t0 = time.perf_counter()
    det = detect_r_peaks_energy(x, 200.0)
    best = min(best, time.perf_counter() - t0)
print(json.dumps({"using_numba": _kernels.USING_NUMBA,
                  "best_s": best, "n_peaks": len(det)}))
"""


def run_child(npy_path, repeats, disable_numba):
    env = dict(os.environ, FWAVE_DISABLE_NUMBA="1" if disable_numba else "0")
    out = subprocess.run(
        [sys.executable, "-c", CHILD, npy_path, str(repeats)],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--minutes", type=float, default=30.0,
                    help="record length in minutes (default 30)")
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing repetitions, best-of (default 5)")
    args = ap.parse_args()

    from fwave.preprocess import prefilter
    from fwave.synth import SynthConfig, generate

    print(f"generating {args.minutes:g} min synthetic record at 200 Hz ...")
    truth = generate(SynthConfig(
        rhythm="sinus", duration_s=args.minutes * 60.0, rng_seed=1,
    ))
    x = prefilter(truth.ecg, truth.fs)

    with tempfile.NamedTemporaryFile(suffix=".npy", delete=False) as fh:
        np.save(fh, x)
        npy_path = fh.name
    try:
        with_numba = run_child(npy_path, args.repeats, disable_numba=False)
        without = run_child(npy_path, args.repeats, disable_numba=True)
    finally:
        os.unlink(npy_path)

    assert with_numba["using_numba"] and not without["using_numba"]
    assert with_numba["n_peaks"] == without["n_peaks"], "paths disagree!"
    t_jit = with_numba["best_s"]
    t_py = without["best_s"]
    print(f"samples:            {len(x):,} ({args.minutes:g} min @ 200 Hz)")
    print(f"detected beats:     {with_numba['n_peaks']:,} (identical on both paths)")
    print(f"numba kernels:      {t_jit * 1e3:8.1f} ms")
    print(f"pure-python/numpy:  {t_py * 1e3:8.1f} ms")
    print(f"speedup:            {t_py / t_jit:8.1f}x")


if __name__ == "__main__":
    main()
