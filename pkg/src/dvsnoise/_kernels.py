"""Hot inner loops with two interchangeable backends.

The sequential recursions (AR(1) / two-state path synthesis) and the
reference-reset event scan are the only per-sample loops in the package.
They are compiled with numba when it is available; a vectorized pure-numpy
implementation (scipy.signal.lfilter for the recursions, block scanning for
the event detector) is used otherwise.

Backend selection happens once at import time:

* ``DVSNOISE_BACKEND=numpy``  force the numpy fallback,
* ``DVSNOISE_BACKEND=numba``  require numba (ImportError if missing),
* unset                       numba if importable, else numpy.

Both backends consume pre-drawn standard normals from the caller's
``numpy.random.Generator``, so results do not depend on the backend's own
RNG.  Event scans are bit-identical across backends (same float64 ops in the
same order); the recursions agree to rounding noise, which dedicated tests
bound.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.signal import lfilter, lfiltic

_ENV_VAR = "DVSNOISE_BACKEND"

# Sentinel for "no event yet" in index bookkeeping.  Must be so far in the
# past that (k - NO_EVENT) * dt is huge for any reachable k.
NO_EVENT = -(2**62)

_SCAN_BLOCK = 1 << 16


def _resolve_backend() -> tuple[str, object]:
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(
            f"{_ENV_VAR} must be 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return "numpy", None
    try:
        import numba
    except ImportError:
        if choice == "numba":
            raise
        return "numpy", None
    return "numba", numba


BACKEND, _numba = _resolve_backend()


def active_backend() -> str:
    """Name of the kernel backend selected at import ('numba' or 'numpy')."""
    return BACKEND


# ---------------------------------------------------------------------------
# Pure-numpy implementations
# ---------------------------------------------------------------------------


def ou_chunk_numpy(w, a, b, x):
    """Advance the AR(1) recursion x[k] = a*x[k-1] + b*w[k] over one chunk.

    Returns (samples, x_final).  ``x`` is the value of the sample preceding
    this chunk.
    """
    if len(w) == 0:
        return np.empty(0), x
    out, _ = lfilter([b], [1.0, -a], w, zi=np.array([a * x]))
    return out, float(out[-1])


def linear2_chunk_numpy(w2, phi, lq, x):
    """Advance x[k] = phi @ x[k-1] + lq @ w2[k]; return (x1 samples, x_final).

    The second state component (the photoreceptor output) is returned per
    sample.  Implemented as two scalar ARMA(2) recursions sharing the
    characteristic polynomial of phi (Cayley-Hamilton), which works for any
    2x2 phi including defective ones.
    """
    m = len(w2)
    if m == 0:
        return np.empty(0), x.copy()
    e = w2 @ lq.T
    if m < 3:
        out = np.empty(m)
        xc = x.copy()
        for i in range(m):
            xc = phi @ xc + e[i]
            out[i] = xc[1]
        return out, xc
    tr = phi[0, 0] + phi[1, 1]
    det = phi[0, 0] * phi[1, 1] - phi[0, 1] * phi[1, 0]
    # First two outputs directly, remainder via the scalar recursion
    # y[k] = tr*y[k-1] - det*y[k-2] + c@e[k] + c@(phi - tr*I)@e[k-1].
    x0 = phi @ x + e[0]
    x1 = phi @ x0 + e[1]
    a = np.array([1.0, -tr, det])
    out = np.empty(m)
    xf = np.empty(2)
    for comp in (0, 1):
        row = phi[comp].copy()
        row[comp] -= tr
        s = e[2:, comp] + e[1:-1] @ row
        y0, y1 = x0[comp], x1[comp]
        zi = lfiltic([1.0], a, y=[y1, y0])
        tail, _ = lfilter([1.0], a, s, zi=zi)
        xf[comp] = tail[-1]
        if comp == 1:
            out[0], out[1] = y0, y1
            out[2:] = tail
    return out, xf


def scan_chunk_numpy(s, dt, idx0, theta_on, theta_off, t_refr, cap,
                     ref, last_idx, in_refr):
    """Reference-reset threshold scan over one chunk of composite samples.

    Returns (idx, pol, mult, ref, last_idx, in_refr) where idx are global
    sample indices of emitted events, pol is +1/-1 and mult the number of
    same-timestamp events (multiples of theta crossed, capped).
    """
    n = len(s)
    idx_l: list[int] = []
    pol_l: list[int] = []
    mult_l: list[int] = []
    k = 0
    while k < n:
        if in_refr:
            # First global index j with (j - last_idx)*dt >= t_refr, matched
            # to the scalar loop's float comparison by +/-1 adjustment.
            j = last_idx + int(math.ceil(t_refr / dt))
            while (j - last_idx) * dt < t_refr:
                j += 1
            while j - 1 > last_idx and (j - 1 - last_idx) * dt >= t_refr:
                j -= 1
            if j - idx0 >= n:
                break
            k = max(j - idx0, k)
            ref = s[k]
            in_refr = False
            k += 1
            continue
        hit = -1
        b = k
        blk = 64  # grow geometrically: amortizes dense and sparse event runs
        while b < n:
            stop = min(b + blk, n)
            d = s[b:stop] - ref
            mask = (d >= theta_on) | (d <= -theta_off)
            if mask.any():
                hit = b + int(np.argmax(mask))
                break
            b = stop
            blk = min(blk * 4, _SCAN_BLOCK)
        if hit < 0:
            break
        d = s[hit] - ref
        if d >= theta_on:
            pol = 1
            m_ev = min(int(d / theta_on), cap)
        else:
            pol = -1
            m_ev = min(int(-d / theta_off), cap)
        idx_l.append(idx0 + hit)
        pol_l.append(pol)
        mult_l.append(m_ev)
        ref = s[hit]
        last_idx = idx0 + hit
        if t_refr > 0.0:
            in_refr = True
        k = hit + 1
    return (np.asarray(idx_l, dtype=np.int64),
            np.asarray(pol_l, dtype=np.int8),
            np.asarray(mult_l, dtype=np.int32),
            float(ref), int(last_idx), bool(in_refr))


def ou_events_chunk_numpy(w, a, b, theta, cap, x, ref, started):
    """Fused OU step + symmetric-threshold event count over one chunk.

    Returns (count_on, count_off, x, ref, started).  On the very first
    chunk of a path (started=False) the first normal seeds the stationary
    initial sample, which also initializes the reference.
    """
    if len(w) == 0:
        return 0, 0, x, ref, started
    if not started:
        x = float(w[0])
        ref = x
        started = True
        samples, x = ou_chunk_numpy(w[1:], a, b, x)
    else:
        samples, x = ou_chunk_numpy(w, a, b, x)
    idx, pol, mult, ref, _, _ = scan_chunk_numpy(
        samples, 1.0, 0, theta, theta, 0.0, cap, ref, NO_EVENT, False)
    count_on = int(mult[pol == 1].sum())
    count_off = int(mult[pol == -1].sum())
    return count_on, count_off, x, ref, started


_numpy_impls = {
    "ou_chunk": ou_chunk_numpy,
    "linear2_chunk": linear2_chunk_numpy,
    "scan_chunk": scan_chunk_numpy,
    "ou_events_chunk": ou_events_chunk_numpy,
}


# ---------------------------------------------------------------------------
# Numba implementations
# ---------------------------------------------------------------------------

if _numba is not None:
    njit = _numba.njit

    @njit(cache=True, nogil=True)
    def _ou_chunk_nb(w, a, b, x):
        m = len(w)
        out = np.empty(m)
        for i in range(m):
            x = a * x + b * w[i]
            out[i] = x
        return out, x

    def ou_chunk_numba(w, a, b, x):
        out, xf = _ou_chunk_nb(w, float(a), float(b), float(x))
        return out, float(xf)

    @njit(cache=True, nogil=True)
    def _linear2_chunk_nb(w2, phi, lq, x):
        m = len(w2)
        out = np.empty(m)
        x0 = x[0]
        x1 = x[1]
        p00 = phi[0, 0]
        p01 = phi[0, 1]
        p10 = phi[1, 0]
        p11 = phi[1, 1]
        l00 = lq[0, 0]
        l01 = lq[0, 1]
        l10 = lq[1, 0]
        l11 = lq[1, 1]
        for i in range(m):
            w0 = w2[i, 0]
            w1 = w2[i, 1]
            nx0 = p00 * x0 + p01 * x1 + l00 * w0 + l01 * w1
            nx1 = p10 * x0 + p11 * x1 + l10 * w0 + l11 * w1
            x0 = nx0
            x1 = nx1
            out[i] = x1
        xf = np.empty(2)
        xf[0] = x0
        xf[1] = x1
        return out, xf

    def linear2_chunk_numba(w2, phi, lq, x):
        out, xf = _linear2_chunk_nb(
            np.ascontiguousarray(w2), np.ascontiguousarray(phi),
            np.ascontiguousarray(lq), np.ascontiguousarray(x, dtype=np.float64))
        return out, xf

    @njit(cache=True, nogil=True)
    def _scan_chunk_nb(s, dt, idx0, theta_on, theta_off, t_refr, cap,
                       ref, last_idx, in_refr):
        n = len(s)
        idx = np.empty(n, dtype=np.int64)
        pol = np.empty(n, dtype=np.int8)
        mult = np.empty(n, dtype=np.int32)
        nrows = 0
        for k in range(n):
            gk = idx0 + k
            if in_refr:
                if (gk - last_idx) * dt < t_refr:
                    continue
                ref = s[k]
                in_refr = False
                continue
            d = s[k] - ref
            if d >= theta_on:
                m_ev = int(d / theta_on)
                if m_ev > cap:
                    m_ev = cap
                idx[nrows] = gk
                pol[nrows] = 1
                mult[nrows] = m_ev
                nrows += 1
                ref = s[k]
                last_idx = gk
                if t_refr > 0.0:
                    in_refr = True
            elif d <= -theta_off:
                m_ev = int(-d / theta_off)
                if m_ev > cap:
                    m_ev = cap
                idx[nrows] = gk
                pol[nrows] = -1
                mult[nrows] = m_ev
                nrows += 1
                ref = s[k]
                last_idx = gk
                if t_refr > 0.0:
                    in_refr = True
        return idx[:nrows], pol[:nrows], mult[:nrows], ref, last_idx, in_refr

    def scan_chunk_numba(s, dt, idx0, theta_on, theta_off, t_refr, cap,
                         ref, last_idx, in_refr):
        idx, pol, mult, r, li, ir = _scan_chunk_nb(
            np.ascontiguousarray(s), float(dt), int(idx0), float(theta_on),
            float(theta_off), float(t_refr), int(cap), float(ref),
            int(last_idx), bool(in_refr))
        return (idx.copy(), pol.copy(), mult.copy(), float(r), int(li),
                bool(ir))

    @njit(cache=True, nogil=True)
    def _ou_events_chunk_nb(w, a, b, theta, cap, x, ref, started):
        count_on = 0
        count_off = 0
        i0 = 0
        if not started:
            x = w[0]
            ref = x
            started = True
            i0 = 1
        for i in range(i0, len(w)):
            x = a * x + b * w[i]
            d = x - ref
            if d >= theta:
                m_ev = int(d / theta)
                if m_ev > cap:
                    m_ev = cap
                count_on += m_ev
                ref = x
            elif d <= -theta:
                m_ev = int(-d / theta)
                if m_ev > cap:
                    m_ev = cap
                count_off += m_ev
                ref = x
        return count_on, count_off, x, ref, started

    def ou_events_chunk_numba(w, a, b, theta, cap, x, ref, started):
        if len(w) == 0:
            return 0, 0, x, ref, started
        con, coff, xf, rf, st = _ou_events_chunk_nb(
            np.ascontiguousarray(w), float(a), float(b), float(theta),
            int(cap), float(x), float(ref), bool(started))
        return int(con), int(coff), float(xf), float(rf), bool(st)

    _numba_impls = {
        "ou_chunk": ou_chunk_numba,
        "linear2_chunk": linear2_chunk_numba,
        "scan_chunk": scan_chunk_numba,
        "ou_events_chunk": ou_events_chunk_numba,
    }
else:
    ou_chunk_numba = None
    linear2_chunk_numba = None
    scan_chunk_numba = None
    ou_events_chunk_numba = None
    _numba_impls = {}


_active = _numba_impls if BACKEND == "numba" else _numpy_impls

ou_chunk = _active["ou_chunk"]
linear2_chunk = _active["linear2_chunk"]
scan_chunk = _active["scan_chunk"]
ou_events_chunk = _active["ou_events_chunk"]
