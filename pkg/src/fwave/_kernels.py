"""Hot inner-loop kernels for beat detection.

Each kernel has two implementations: a numba ``@njit`` version used by
default, and a pure-numpy fallback selected by setting the environment
variable ``FWAVE_DISABLE_NUMBA=1`` (or automatically when numba is not
installed). Long Holter-style records make the sample-level scans the
dominant cost, hence the JIT path; the fallback keeps the package usable
everywhere. ``benchmarks/bench_detector.py`` compares the two paths.
"""

import os

import numpy as np

_DISABLE = os.environ.get("FWAVE_DISABLE_NUMBA", "").strip() in ("1", "true", "yes")

if not _DISABLE:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _DISABLE = True

USING_NUMBA = not _DISABLE


def _moving_average_loop(x, w):
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    half = w // 2
    acc = 0.0
    # prime the window centered on sample 0
    hi = min(half + 1, n)
    for j in range(hi):
        acc += x[j]
    cnt = hi
    for i in range(n):
        out[i] = acc / cnt
        new = i + half + 1
        if new < n:
            acc += x[new]
            cnt += 1
        old = i - half
        if old >= 0:
            acc -= x[old]
            cnt -= 1
    return out


def _moving_average_numpy(x, w):
    kernel = np.ones(w, dtype=np.float64)
    sums = np.convolve(x, kernel, mode="same")
    counts = np.convolve(np.ones(len(x)), kernel, mode="same")
    return sums / counts


def _adaptive_scan_loop(feat, min_dist, init_len, searchback):
    """Adaptive-threshold scan for local maxima of a detection feature.

    Running signal/noise peak estimates in the style of classic QRS
    detectors; everything is relative to the feature amplitude so the
    scan is invariant to positive rescaling of the input signal. The
    signal-peak estimate is seeded from the strongest value in the
    initialization window so that small bumps before the first strong
    peak never fire the detector.

    If no peak is accepted for ``searchback`` samples, the strongest
    sub-threshold local maximum since the last accepted peak is taken
    at half threshold; this recovers low-amplitude beats without
    lowering the threshold for the whole record.
    """
    n = feat.shape[0]
    out = np.empty(n, dtype=np.int64)
    m = 0
    lim = min(init_len, n)
    fmax = 0.0
    fsum = 0.0
    for j in range(lim):
        v = feat[j]
        fsum += v
        if v > fmax:
            fmax = v
    if fmax <= 0.0:
        # flat or empty feature: nothing can ever cross a positive threshold
        return out[:m]
    spk = fmax
    npk = 0.5 * fsum / lim
    thr = npk + 0.25 * (spk - npk)
    last = 0
    best_v = 0.0
    best_i = -1
    for i in range(1, n - 1):
        if feat[i] >= feat[i - 1] and feat[i] > feat[i + 1]:
            v = feat[i]
            if v > thr:
                # peaks inside the refractory window belong to the same
                # beat: neither signal nor noise, so they leave the
                # running estimates untouched
                if m == 0 or i - last >= min_dist:
                    spk = 0.125 * v + 0.875 * spk
                    out[m] = i
                    m += 1
                    last = i
                    best_v = 0.0
                    best_i = -1
            else:
                npk = 0.125 * v + 0.875 * npk
                if v > best_v and i - last >= min_dist:
                    best_v = v
                    best_i = i
            thr = npk + 0.25 * (spk - npk)
        if i - last > searchback and best_i > 0 and best_v > 0.5 * thr:
            spk = 0.25 * best_v + 0.75 * spk
            out[m] = best_i
            m += 1
            last = best_i
            best_v = 0.0
            best_i = -1
            thr = npk + 0.25 * (spk - npk)
    return out[:m]


if USING_NUMBA:
    moving_average = njit(cache=True)(_moving_average_loop)
    adaptive_scan = njit(cache=True)(_adaptive_scan_loop)
else:
    moving_average = _moving_average_numpy
    adaptive_scan = _adaptive_scan_loop
