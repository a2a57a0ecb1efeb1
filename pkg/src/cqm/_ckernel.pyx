# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""
Compiled per-photon Monte Carlo kernel.

Draw-for-draw twin of ``_kernel_py.py``; keep slot numbering and
floating-point operation order in sync with it.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, floor
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0

cdef enum:
    SLOT_TRIGGER = 0
    SLOT_SURVIVE = 1
    SLOT_DETECT = 2
    SLOT_ANALYZER = 3
    SLOT_JITTER_R = 4
    SLOT_JITTER_PHI = 5
    SLOT_PASS0 = 6


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double uniform(uint64_t key, uint64_t slot) nogil:
    return <double>(mix64(key + (slot + 1) * GOLDEN) >> 11) * INV_2_53


cdef int64_t _run(uint64_t stream_key, int64_t start, int64_t stop,
                  double eta_t, double eta_q,
                  double rho_hh, double rho_vv, double rho_re, double rho_im,
                  double pc, double ps, double vis, double s, double eps,
                  const double[::1] flips,
                  double round_trip, double fiber_delay, double sigma,
                  bint analyzer, double an_cc, double an_ss, double an_2cs,
                  double hist_start, double bin_width, int64_t nbins,
                  int64_t[::1] counts) noexcept nogil:
    cdef int64_t i, k, kmax = flips.shape[0] - 1, exit_k, b, n_trig = 0
    cdef uint64_t key, slot
    cdef double hh, vv, re, im, r1, i1, tmp, surv, prob, t, u1, u2
    cdef bint flip, mis

    for i in range(start, stop):
        key = mix64(stream_key + <uint64_t>i * GOLDEN)
        if not (uniform(key, SLOT_TRIGGER) < eta_t):
            continue
        n_trig += 1
        hh = rho_hh
        vv = rho_vv
        re = rho_re
        im = rho_im
        surv = 1.0
        exit_k = -1

        flip = uniform(key, SLOT_PASS0) < flips[0]
        mis = eps > 0.0 and uniform(key, SLOT_PASS0 + 1) < eps
        if flip:
            tmp = hh
            hh = vv
            vv = tmp
            im = -im
        if flip != mis:
            exit_k = 0
        else:
            for k in range(1, kmax + 1):
                surv = surv * s
                r1 = (re * pc - im * ps) * vis
                i1 = (re * ps + im * pc) * vis
                slot = SLOT_PASS0 + 2 * k
                flip = uniform(key, slot) < flips[k]
                mis = eps > 0.0 and uniform(key, slot + 1) < eps
                re = r1
                if flip:
                    tmp = hh
                    hh = vv
                    vv = tmp
                    im = -i1
                else:
                    im = i1
                if flip == mis:
                    exit_k = k
                    break
        if exit_k < 0:
            continue
        if not (uniform(key, SLOT_SURVIVE) < surv):
            continue
        if not (uniform(key, SLOT_DETECT) < eta_q):
            continue
        if analyzer:
            prob = an_cc * hh + an_ss * vv + an_2cs * re
            if not (uniform(key, SLOT_ANALYZER) < prob):
                continue
        t = fiber_delay + <double>exit_k * round_trip
        if sigma > 0.0:
            u1 = 1.0 - uniform(key, SLOT_JITTER_R)
            u2 = uniform(key, SLOT_JITTER_PHI)
            t = t + sigma * (sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2))
        tmp = floor((t - hist_start) / bin_width)
        if tmp >= 0.0 and tmp < <double>nbins:
            b = <int64_t>tmp
            counts[b] += 1
    return n_trig


def simulate_chunk(stream_key, start, stop, p):
    """Run trials ``start..stop-1``; return (counts, n_triggers)."""
    counts = np.zeros(p.nbins, dtype=np.int64)
    if stop <= start:
        return counts, 0
    cdef int64_t[::1] cv = counts
    cdef const double[::1] fv = np.ascontiguousarray(p.flip_probs, dtype=np.float64)
    cdef uint64_t key = stream_key
    cdef int64_t a = start, z = stop, n
    cdef double eta_t = p.eta_t, eta_q = p.eta_q
    cdef double hh = p.rho_hh, vv = p.rho_vv, re = p.rho_hv_re, im = p.rho_hv_im
    cdef double pc = p.phase_cos, ps = p.phase_sin, vis = p.visibility, s = p.survive, eps = p.misroute
    cdef double rt = p.round_trip, fd = p.fiber_delay, sig = p.jitter_sigma
    cdef bint an = p.analyzer
    cdef double cc = p.an_cc, ss = p.an_ss, cs2 = p.an_2cs
    cdef double h0 = p.hist_start, bw = p.bin_width
    cdef int64_t nb = p.nbins
    with nogil:
        n = _run(key, a, z, eta_t, eta_q, hh, vv, re, im, pc, ps, vis, s, eps, fv,
                 rt, fd, sig, an, cc, ss, cs2, h0, bw, nb, cv)
    return counts, n
