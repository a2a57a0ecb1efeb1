"""
Backend selection for the per-photon Monte Carlo kernel.

The compiled extension is used when it imports; otherwise the numpy
implementation. Set ``CQM_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from cqm import _kernel_py

__all__ = ["KernelParams", "simulate_chunk", "BACKEND", "backends", "stream_key"]


@dataclass(frozen=True)
class KernelParams:
    eta_t: float
    eta_q: float
    rho_hh: float
    rho_vv: float
    rho_hv_re: float
    rho_hv_im: float
    phase_cos: float     # e^{-i phi} acting on rho_HV
    phase_sin: float
    visibility: float
    survive: float       # 1 - loss per cycle
    misroute: float      # wrong-port probability per Sagnac pass
    flip_probs: np.ndarray  # sin^2(delta_k / 2) for passes k = 0..kmax
    round_trip: float
    fiber_delay: float
    jitter_sigma: float
    analyzer: bool
    an_cc: float
    an_ss: float
    an_2cs: float
    hist_start: float
    bin_width: float
    nbins: int


def stream_key(seed: int, *path: int) -> int:
    """64-bit key for the random stream identified by ``seed`` and ``path``."""
    key = _kernel_py.mix64_int(seed & _kernel_py.MASK64)
    for p in path:
        key = _kernel_py.mix64_int(key ^ _kernel_py.mix64_int((p + 1) * _kernel_py.GOLDEN))
    return key


def _load():
    found = {"python": _kernel_py.simulate_chunk}
    try:
        from cqm import _ckernel
    except ImportError:
        pass
    else:
        found["cython"] = _ckernel.simulate_chunk
    return found


_BACKENDS = _load()

if os.environ.get("CQM_PURE_PYTHON", "") not in ("", "0") or "cython" not in _BACKENDS:
    BACKEND = "python"
else:
    BACKEND = "cython"

simulate_chunk = _BACKENDS[BACKEND]


def backends() -> dict:
    """Available kernel implementations keyed by name."""
    return dict(_BACKENDS)
