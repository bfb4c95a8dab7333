"""Hot numeric kernels: windowed energy integration and waveform synthesis.

Both kernels exist twice: a numba @njit build and a pure-numpy build. The
active path is chosen at import time; set WATTMARK_NUMBA=0 to force the
numpy fallback (benchmarks/bench_kernels.py compares the two directly).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_env = os.environ.get("WATTMARK_NUMBA", "1").strip().lower()
NUMBA_ENABLED = HAVE_NUMBA and _env not in ("0", "false", "off", "no")

# Waveform codes shared with telemetry.SourceSpec
WAVE_CONSTANT = 0
WAVE_SQUARE = 1
WAVE_RAMP = 2


# --- windowed left-rectangle integration ----------------------------------
#
# Single device, timestamps sorted ascending. A sample at t in [start, end)
# covers up to the next in-window timestamp; the last in-window sample
# covers one nominal interval. Returns joules (power assumed in watts).

def _window_energy_numpy(ts, power, start, end, nominal_rate):
    mask = (ts >= start) & (ts < end)
    if not mask.any():
        return 0.0
    w_ts = ts[mask]
    w_p = power[mask]
    dt = np.empty_like(w_ts)
    dt[:-1] = np.diff(w_ts)
    dt[-1] = nominal_rate
    return float(np.dot(w_p, dt))


def _window_energy_loop(ts, power, start, end, nominal_rate):
    n = ts.shape[0]
    energy = 0.0
    prev = -1
    for i in range(n):
        t = ts[i]
        if t < start:
            continue
        if t >= end:
            break
        if prev >= 0:
            energy += power[prev] * (ts[prev + 1] - ts[prev])
        prev = i
    if prev >= 0:
        energy += power[prev] * nominal_rate
    return energy


# --- waveform evaluation ---------------------------------------------------
#
# p0..p2 meaning per code:
#   constant: p0 = power_w
#   square:   p0 = low_w, p1 = high_w, p2 = period_s, p3 = duty
#   ramp:     p0 = start_w, p1 = end_w, p2 = duration_s
# The scalar formulas here must stay in sync with telemetry.synth_sample.

def _waveform_series_numpy(code, p0, p1, p2, p3, ts):
    if code == WAVE_CONSTANT:
        return np.full_like(ts, p0)
    if code == WAVE_SQUARE:
        frac = (ts % p2) / p2
        return np.where(frac < p3, p1, p0)
    out = p0 + (p1 - p0) * (ts / p2)
    np.copyto(out, p1, where=ts >= p2)
    return out


def _waveform_series_loop(code, p0, p1, p2, p3, ts):
    n = ts.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        t = ts[i]
        if code == WAVE_CONSTANT:
            out[i] = p0
        elif code == WAVE_SQUARE:
            out[i] = p1 if (t % p2) / p2 < p3 else p0
        else:
            out[i] = p1 if t >= p2 else p0 + (p1 - p0) * (t / p2)
    return out


if HAVE_NUMBA:
    _window_energy_numba = njit(cache=True)(_window_energy_loop)
    _waveform_series_numba = njit(cache=True)(_waveform_series_loop)
else:  # pragma: no cover
    _window_energy_numba = None
    _waveform_series_numba = None

if NUMBA_ENABLED:
    window_energy_j = _window_energy_numba
    waveform_series = _waveform_series_numba
else:
    window_energy_j = _window_energy_numpy
    waveform_series = _waveform_series_numpy
