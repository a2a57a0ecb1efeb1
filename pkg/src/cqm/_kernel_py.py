"""
Pure numpy implementation of the per-photon Monte Carlo kernel.

Must stay draw-for-draw identical to ``_ckernel.pyx``: same counter-based
uniforms, same slot numbering, same floating-point operation order.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
TWO_PI = 6.283185307179586
INV_2_53 = 1.0 / 9007199254740992.0

# uniform slots within a trial's stream
SLOT_TRIGGER = 0
SLOT_SURVIVE = 1
SLOT_DETECT = 2
SLOT_ANALYZER = 3
SLOT_JITTER_R = 4
SLOT_JITTER_PHI = 5
SLOT_PASS0 = 6  # pass k uses 6 + 2k (flip) and 7 + 2k (misroute)

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))


def mix64_int(z):
    """splitmix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def trial_keys(stream_key, idx):
    return _mix64(np.uint64(stream_key) + idx.astype(np.uint64) * np.uint64(GOLDEN))


def uniform(keys, slot):
    x = _mix64(keys + np.uint64(((slot + 1) * GOLDEN) & MASK64))
    return (x >> _S11).astype(np.float64) * INV_2_53


def simulate_chunk(stream_key, start, stop, p):
    """Run trials ``start..stop-1``; return (counts, n_triggers)."""
    counts = np.zeros(p.nbins, dtype=np.int64)
    if stop <= start:
        return counts, 0
    with np.errstate(over="ignore"):
        return _simulate(stream_key, start, stop, p, counts)


def _simulate(stream_key, start, stop, p, counts):
    keys = trial_keys(stream_key, np.arange(start, stop, dtype=np.uint64))
    keys = keys[uniform(keys, SLOT_TRIGGER) < p.eta_t]
    n_trig = keys.size
    m = keys.size
    flips = p.flip_probs
    kmax = flips.size - 1
    eps = p.misroute

    hh = np.full(m, p.rho_hh)
    vv = np.full(m, p.rho_vv)
    re = np.full(m, p.rho_hv_re)
    im = np.full(m, p.rho_hv_im)
    surv = np.ones(m)
    exit_k = np.full(m, -1, dtype=np.int64)

    # entry pass: unflipped photons cross into the storage line
    flip = uniform(keys, SLOT_PASS0) < flips[0]
    mis = uniform(keys, SLOT_PASS0 + 1) < eps if eps > 0.0 else np.zeros(m, dtype=bool)
    hh, vv = np.where(flip, vv, hh), np.where(flip, hh, vv)
    im = np.where(flip, -im, im)
    left = flip != mis
    exit_k[left] = 0
    active = np.flatnonzero(~left)

    pc, ps, vis, s = p.phase_cos, p.phase_sin, p.visibility, p.survive
    for k in range(1, kmax + 1):
        if active.size == 0:
            break
        a = active
        surv[a] = surv[a] * s
        r0, i0 = re[a], im[a]
        r1 = (r0 * pc - i0 * ps) * vis
        i1 = (r0 * ps + i0 * pc) * vis
        ka = keys[a]
        fl = uniform(ka, SLOT_PASS0 + 2 * k) < flips[k]
        ms = uniform(ka, SLOT_PASS0 + 2 * k + 1) < eps if eps > 0.0 else np.zeros(a.size, dtype=bool)
        h0, v0 = hh[a], vv[a]
        hh[a] = np.where(fl, v0, h0)
        vv[a] = np.where(fl, h0, v0)
        re[a] = r1
        im[a] = np.where(fl, -i1, i1)
        out = fl == ms
        exit_k[a[out]] = k
        active = a[~out]

    sel = np.flatnonzero(exit_k >= 0)
    ks = keys[sel]
    ok = uniform(ks, SLOT_SURVIVE) < surv[sel]
    ok &= uniform(ks, SLOT_DETECT) < p.eta_q
    if p.analyzer:
        prob = p.an_cc * hh[sel] + p.an_ss * vv[sel] + p.an_2cs * re[sel]
        ok &= uniform(ks, SLOT_ANALYZER) < prob
    sel, ks = sel[ok], ks[ok]

    t = p.fiber_delay + exit_k[sel].astype(np.float64) * p.round_trip
    if p.jitter_sigma > 0.0:
        u1 = 1.0 - uniform(ks, SLOT_JITTER_R)
        u2 = uniform(ks, SLOT_JITTER_PHI)
        t = t + p.jitter_sigma * (np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2))
    b = np.floor((t - p.hist_start) / p.bin_width)
    b = b[(b >= 0) & (b < p.nbins)].astype(np.int64)
    counts += np.bincount(b, minlength=p.nbins)
    return counts, n_trig
