"""Numeric hot loops shared by the analyzer and the channel model.

Every kernel exists twice: a ``*_numpy`` vectorized version and a numba
``@njit`` version compiled on first use.  The module-level names
(``jitter_pairs``, ``ar1_series``, ``window_sums``) point at whichever
backend is active.  Selection happens once at import time:

* ``VOLTESIM_NUMBA=0`` (or ``off``/``false``) forces the numpy path,
* ``VOLTESIM_NUMBA=1`` requires numba and raises if it is missing,
* unset / ``auto`` uses numba when importable, numpy otherwise.

Both backends implement the same pairing and accumulation semantics; the
test suite asserts their outputs agree.
"""

from __future__ import annotations

import math
import os

import numpy as np

_env = os.environ.get("VOLTESIM_NUMBA", "auto").strip().lower()
if _env in ("0", "off", "false", "no"):
    _want_numba = False
    _require_numba = False
elif _env in ("1", "on", "true", "yes"):
    _want_numba = True
    _require_numba = True
else:
    _want_numba = True
    _require_numba = False

try:
    import numba

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    if _require_numba:
        raise ImportError("VOLTESIM_NUMBA=1 but numba is not installed")

NUMBA_ENABLED = _want_numba and HAVE_NUMBA


# --- relative jitter pairing ---
#
# Input arrays describe received packets in arrival order.  A packet is a
# valid jitter reference for its successor when the successor's sequence
# number is exactly one higher and the successor does not open a new
# talkspurt.  Late or duplicate packets (sequence number not above the
# running maximum) never become references and never emit samples.


def jitter_pairs_numpy(seq, s_ms, r_ms, spurt, normalized=False):
    n = seq.size
    if n < 2:
        return np.empty(0, dtype=np.float64), np.empty(0, dtype=np.float64)
    runmax = np.maximum.accumulate(seq)
    prev_max = runmax[:-1]
    is_newmax = np.empty(n, dtype=bool)
    is_newmax[0] = True
    is_newmax[1:] = seq[1:] > prev_max
    # index of the packet holding the running maximum so far
    ref_idx = np.maximum.accumulate(np.where(is_newmax, np.arange(n), -1))
    emit = (seq[1:] == prev_max + 1) & ~spurt[1:].astype(bool)
    i = np.nonzero(emit)[0] + 1
    ref = ref_idx[i - 1]
    ds = s_ms[i] - s_ms[ref]
    dr = r_ms[i] - r_ms[ref]
    j = np.abs(ds - dr)
    if normalized:
        with np.errstate(divide="ignore", invalid="ignore"):
            j = np.where(dr != 0.0, j / dr, 0.0)
    return j, r_ms[i].astype(np.float64)


def _jitter_pairs_loop(seq, s_ms, r_ms, spurt, normalized):
    n = seq.size
    out_j = np.empty(n, dtype=np.float64)
    out_t = np.empty(n, dtype=np.float64)
    k = 0
    ref = 0
    for i in range(1, n):
        if seq[i] <= seq[ref]:
            continue
        if seq[i] == seq[ref] + 1 and not spurt[i]:
            ds = s_ms[i] - s_ms[ref]
            dr = r_ms[i] - r_ms[ref]
            j = abs(ds - dr)
            if normalized:
                j = j / dr if dr != 0.0 else 0.0
            out_j[k] = j
            out_t[k] = r_ms[i]
            k += 1
        ref = i
    return out_j[:k], out_t[:k]


# --- AR(1) series (lognormal shadowing in dB) ---


def ar1_series_numpy(z, rho):
    n = z.size
    x = np.empty(n, dtype=np.float64)
    if n == 0:
        return x
    scale = math.sqrt(max(0.0, 1.0 - rho * rho))
    x[0] = z[0]
    for i in range(1, n):
        x[i] = rho * x[i - 1] + scale * z[i]
    return x


# --- windowed accumulation ---


def window_sums_numpy(t_ms, values, t0_ms, window_ms, n_windows):
    idx = np.floor((t_ms - t0_ms) / window_ms).astype(np.int64)
    idx = np.clip(idx, 0, n_windows - 1)
    sums = np.bincount(idx, weights=values, minlength=n_windows)
    counts = np.bincount(idx, minlength=n_windows).astype(np.int64)
    return sums, counts


if HAVE_NUMBA:
    _jitter_pairs_numba = numba.njit(cache=True)(_jitter_pairs_loop)

    @numba.njit(cache=True)
    def ar1_series_numba(z, rho):
        n = z.size
        x = np.empty(n, dtype=np.float64)
        if n == 0:
            return x
        scale = math.sqrt(max(0.0, 1.0 - rho * rho))
        x[0] = z[0]
        for i in range(1, n):
            x[i] = rho * x[i - 1] + scale * z[i]
        return x

    @numba.njit(cache=True)
    def window_sums_numba(t_ms, values, t0_ms, window_ms, n_windows):
        sums = np.zeros(n_windows, dtype=np.float64)
        counts = np.zeros(n_windows, dtype=np.int64)
        for i in range(t_ms.size):
            k = int((t_ms[i] - t0_ms) // window_ms)
            if k < 0:
                k = 0
            elif k >= n_windows:
                k = n_windows - 1
            sums[k] += values[i]
            counts[k] += 1
        return sums, counts

    def jitter_pairs_numba(seq, s_ms, r_ms, spurt, normalized=False):
        return _jitter_pairs_numba(
            np.ascontiguousarray(seq, dtype=np.int64),
            np.ascontiguousarray(s_ms, dtype=np.float64),
            np.ascontiguousarray(r_ms, dtype=np.float64),
            np.ascontiguousarray(spurt, dtype=np.bool_),
            normalized,
        )

else:
    jitter_pairs_numba = None
    ar1_series_numba = None
    window_sums_numba = None


if NUMBA_ENABLED:
    jitter_pairs = jitter_pairs_numba
    ar1_series = ar1_series_numba
    window_sums = window_sums_numba
else:
    jitter_pairs = jitter_pairs_numpy
    ar1_series = ar1_series_numpy
    window_sums = window_sums_numpy
