#!/usr/bin/env python3
"""Compare the numba and pure-numpy builds of the hot kernels.

Usage:
    python3 benchmarks/bench_kernels.py [--samples N] [--repeats K]

The active path for the package itself is chosen at import time from the
WATTMARK_NUMBA env flag; this script always times both builds directly.
"""

import argparse
import time

import numpy as np

from wattmark import _kernels


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - started)
    return best, result


def bench_window_energy(n, repeats):
    rate = 0.1
    ts = np.arange(n, dtype=np.float64) * rate
    power = 100.0 + 50.0 * np.sin(ts * 0.05)
    start, end = ts[n // 10], ts[9 * n // 10]

    variants = {"numpy": _kernels._window_energy_numpy}
    if _kernels.HAVE_NUMBA:
        _kernels._window_energy_numba(ts[:16], power[:16], 0.0, 1.0, rate)  # compile
        variants["numba"] = _kernels._window_energy_numba

    print(f"window_energy_j over {n:,} samples:")
    results = {}
    for name, fn in variants.items():
        elapsed, value = timeit(lambda: fn(ts, power, start, end, rate), repeats)
        results[name] = value
        print(f"  {name:6s} {elapsed * 1e3:9.2f} ms   -> {value:.3f} J")
    if len(results) == 2:
        rel = abs(results["numba"] - results["numpy"]) / abs(results["numpy"])
        print(f"  relative difference: {rel:.2e}")


def bench_waveform_series(n, repeats):
    ts = np.linspace(0.0, 1000.0, n)
    args = (_kernels.WAVE_SQUARE, 50.0, 150.0, 20.0, 0.5)

    variants = {"numpy": _kernels._waveform_series_numpy}
    if _kernels.HAVE_NUMBA:
        _kernels._waveform_series_numba(*args, ts[:16])  # compile
        variants["numba"] = _kernels._waveform_series_numba

    print(f"waveform_series over {n:,} timestamps:")
    outputs = {}
    for name, fn in variants.items():
        elapsed, value = timeit(lambda: fn(*args, ts), repeats)
        outputs[name] = value
        print(f"  {name:6s} {elapsed * 1e3:9.2f} ms")
    if len(outputs) == 2:
        match = np.array_equal(outputs["numba"], outputs["numpy"])
        print(f"  outputs bit-identical: {match}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=5_000_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"numba available: {_kernels.HAVE_NUMBA}; "
          f"package uses: {'numba' if _kernels.NUMBA_ENABLED else 'numpy'}")
    bench_window_energy(args.samples, args.repeats)
    bench_waveform_series(args.samples, args.repeats)


if __name__ == "__main__":
    main()
