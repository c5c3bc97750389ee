"""R-peak detection and per-beat fiducial windows.

Two detectors of different principles are provided so that their
agreement (bSQI) reflects signal quality rather than detector identity:
an energy detector (derivative - square - moving integration with an
adaptive threshold) and a matched-filter detector correlating against a
self-estimated QRS kernel.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._kernels import adaptive_scan, moving_average

REFRACTORY_S = 0.2  # 300 bpm ceiling
INTEG_WINDOW_S = 0.150
KERNEL_HALF_S = 0.060
SEARCHBACK_S = 1.2  # gap without a beat that triggers half-threshold searchback


@dataclass
class BeatMap:
    fs: float
    r_peaks: np.ndarray  # sorted sample indices
    rr_intervals: np.ndarray  # seconds, len = len(r_peaks) - 1
    fiducials: np.ndarray  # (n_beats, 4): p_on, qrs_on, qrs_off, t_off

    def to_json_dict(self) -> dict:
        return {
            "fs": self.fs,
            "r_peaks": self.r_peaks.tolist(),
            "rr_intervals": self.rr_intervals.tolist(),
            "fiducials": self.fiducials.tolist(),
        }


class MatchedResult(NamedTuple):
    indices: np.ndarray
    degraded: bool


def _odd(w: int) -> int:
    return max(1, w | 1)


def detect_r_peaks_energy(x, fs: float) -> np.ndarray:
    """Energy-based detector with adaptive threshold, 200 ms refractory."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 5 * fs:
        raise ValueError(f"need at least 5 s of signal, got {len(x) / fs:.1f} s")
    d = np.diff(x, prepend=x[0])
    feat = moving_average(d * d, _odd(int(round(INTEG_WINDOW_S * fs))))
    min_dist = int(round(REFRACTORY_S * fs))
    raw = adaptive_scan(np.ascontiguousarray(feat), min_dist, int(round(2.0 * fs)),
                        int(round(SEARCHBACK_S * fs)))
    return _refine(x, raw, fs, min_dist)


def _refine(x, raw, fs, min_dist) -> np.ndarray:
    """Snap each candidate to the strongest squared sample nearby."""
    half = int(round(0.100 * fs))
    sq = x * x
    refined = []
    for p in raw:
        lo = max(0, p - half)
        hi = min(len(x), p + half + 1)
        refined.append(lo + int(np.argmax(sq[lo:hi])))
    refined = np.array(sorted(set(refined)), dtype=np.int64)
    if len(refined) < 2:
        return refined
    keep = [0]
    for i in range(1, len(refined)):
        if refined[i] - refined[keep[-1]] >= min_dist:
            keep.append(i)
        elif sq[refined[i]] > sq[refined[keep[-1]]]:
            keep[-1] = i
    return refined[keep]


def detect_r_peaks_matched(x, fs: float) -> MatchedResult:
    """Correlation against a QRS kernel averaged from first-pass detections.

    Falls back to the energy detections (degraded=True) when fewer than
    three first-pass beats are available to estimate a kernel.
    """
    x = np.asarray(x, dtype=np.float64)
    first = detect_r_peaks_energy(x, fs)
    half = int(round(KERNEL_HALF_S * fs))
    usable = first[(first >= half) & (first < len(x) - half)]
    if len(usable) < 3:
        return MatchedResult(first, True)
    kernel = np.mean([x[p - half : p + half + 1] for p in usable], axis=0)
    kernel = kernel - kernel.mean()
    norm = np.linalg.norm(kernel)
    if norm == 0:
        return MatchedResult(first, True)
    corr = np.correlate(x, kernel / norm, mode="same")
    feat = np.clip(corr, 0.0, None) ** 2
    min_dist = int(round(REFRACTORY_S * fs))
    raw = adaptive_scan(np.ascontiguousarray(feat), min_dist, int(round(2.0 * fs)),
                        int(round(SEARCHBACK_S * fs)))
    # refine on the correlation itself so this detector stays independent
    refined = []
    for p in raw:
        lo = max(0, p - half)
        hi = min(len(x), p + half + 1)
        refined.append(lo + int(np.argmax(corr[lo:hi])))
    refined = np.array(sorted(set(refined)), dtype=np.int64)
    if len(refined) >= 2:
        keep = [0]
        for i in range(1, len(refined)):
            if refined[i] - refined[keep[-1]] >= min_dist:
                keep.append(i)
            elif corr[refined[i]] > corr[refined[keep[-1]]]:
                keep[-1] = i
        refined = refined[keep]
    return MatchedResult(refined, False)


def match_detections(det_a, det_b, fs: float, tol_ms: float = 150.0) -> int:
    """Number of detections in det_a matched within tol_ms in det_b (greedy)."""
    tol = tol_ms / 1000.0 * fs
    m = 0
    j = 0
    for p in det_a:
        while j < len(det_b) and det_b[j] < p - tol:
            j += 1
        if j < len(det_b) and abs(det_b[j] - p) <= tol:
            m += 1
            j += 1
    return m


def segment_fiducials(x, fs: float, r_peaks) -> BeatMap:
    """Fixed-offset fiducials per beat, clipped to bounds and neighbors.

    p_on = R - 300 ms, qrs_on = R - 50 ms, qrs_off = R + 100 ms,
    t_off = R + min(450 ms, 0.7 * RR_next). The last beat uses the median
    RR for the t_off rule.
    """
    x = np.asarray(x, dtype=np.float64)
    r_peaks = np.asarray(r_peaks, dtype=np.int64)
    if len(r_peaks) < 2:
        raise ValueError("need at least 2 R-peaks for fiducials")
    n = len(x)
    rr = np.diff(r_peaks) / fs
    med_rr = float(np.median(rr))
    p_off = int(round(0.300 * fs))
    qon_off = int(round(0.050 * fs))
    qoff_off = int(round(0.100 * fs))
    fid = np.zeros((len(r_peaks), 4), dtype=np.int64)
    for i, r in enumerate(r_peaks):
        rr_next = rr[i] if i < len(rr) else med_rr
        t_len = int(round(min(0.450, 0.7 * rr_next) * fs))
        p_on = max(0, r - p_off)
        qrs_on = max(p_on, r - qon_off)
        qrs_off = min(n - 1, r + qoff_off)
        t_off = min(n - 1, r + t_len)
        if i + 1 < len(r_peaks):
            # never extend into the next QRS (0.7*RR < RR - 50 ms for any
            # RR above the refractory period, so this rarely binds)
            t_off = min(t_off, r_peaks[i + 1] - qon_off)
        t_off = max(t_off, qrs_off)
        fid[i] = (p_on, qrs_on, qrs_off, t_off)
    return BeatMap(fs=fs, r_peaks=r_peaks, rr_intervals=rr, fiducials=fid)
