"""
The cyclical memory as a quantum channel on the polarization qubit.

One cycle is a pass along the storage line followed by a pass through the
polarizing Sagnac switch. With the Pockels cell on, the switch swaps H and V
and routes the photon back into the storage line; with it off, the photon
leaves through the output port.

Two independent routes compute the same output:

* ``propagate`` composes each cycle into a single 2x2 matrix plus a
  dephasing factor.
* ``brute_force_oracle`` walks an ensemble of Jones vectors through every
  element (PBS ports, both directions around the Sagnac, Pockels cell,
  storage mirrors), without ever forming a per-cycle matrix.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from cqm.errors import InvalidArgumentError, OutOfRangeError
from cqm.polarization import (
    SIGMA_X,
    ElementOperator,
    PolarizationState,
    PureState,
    attenuator,
    fidelity,
    identity,
    phase_retarder,
    pockels_operator,
    projector,
)

ROUND_TRIP_NS = 13.3
ORACLE_MAX_CYCLES = 20

__all__ = [
    "ROUND_TRIP_NS",
    "CycleModel",
    "CycleOutcome",
    "CycleChannel",
    "ideal_output",
    "cycle_channel",
    "entry_channel",
    "propagate",
    "brute_force_oracle",
    "phase_error_report",
]


@dataclass(frozen=True)
class CycleModel:
    """Per-cycle error parameters.

    Attributes
    ----------
    loss_per_cycle : float
        Probability the photon is lost during one round trip.
    storage_phase : float
        Relative H/V phase (radians) picked up on one storage-line pass.
    visibility : float
        Factor applied to the H/V coherences once per cycle (phase damping
        from misaligned, partially overlapping H and V spatial modes).
    pbs_extinction : float
        Probability that a Sagnac pass sends the photon out of the wrong
        PBS port. Removed from the principal output; the Monte Carlo engine
        follows it as a misrouted branch.
    """

    loss_per_cycle: float = 0.19
    storage_phase: float = 0.0
    visibility: float = 1.0
    pbs_extinction: float = 0.0

    def __post_init__(self):
        for name in ("loss_per_cycle", "visibility", "pbs_extinction"):
            val = getattr(self, name)
            if not (math.isfinite(val) and 0.0 <= val <= 1.0):
                raise InvalidArgumentError(f"{name}={val!r} outside [0, 1]")
        if not math.isfinite(self.storage_phase):
            raise InvalidArgumentError("storage_phase must be finite")

    @classmethod
    def ideal(cls, **overrides) -> CycleModel:
        params = dict(loss_per_cycle=0.0, storage_phase=0.0, visibility=1.0, pbs_extinction=0.0)
        params.update(overrides)
        return cls(**params)


@dataclass(frozen=True)
class CycleOutcome:
    state: PolarizationState
    cycles: int
    exit_time: float


@dataclass(frozen=True)
class CycleChannel:
    """Ordered element list for one cycle, plus the coherence factor.

    The dephasing by ``visibility`` commutes with every element used here
    (diagonal operators and sigma_x), so it is applied once after the list.
    """

    elements: tuple
    visibility: float

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(2, dtype=complex)
        for op in self.elements:
            m = op.m @ m
        return m

    @property
    def trace_scaling(self) -> float:
        """Survival factor of this cycle (elements are scalar times unitary)."""
        return float(abs(np.linalg.det(self.matrix)))

    @property
    def unitary_part(self) -> np.ndarray:
        s = self.trace_scaling
        if s == 0.0:
            raise InvalidArgumentError("channel annihilates the state; no unitary part")
        return self.matrix / math.sqrt(s)

    def __call__(self, state: PolarizationState) -> PolarizationState:
        m = self.matrix
        rho = m @ state.rho @ m.conj().T
        rho[0, 1] *= self.visibility
        rho[1, 0] *= self.visibility
        return PolarizationState(rho)


def _check_cycles(cycles):
    if isinstance(cycles, bool) or not isinstance(cycles, (int, np.integer)) or cycles < 1:
        raise InvalidArgumentError(f"cycles must be an integer >= 1, got {cycles!r}")


def ideal_output(input: PureState, cycles: int) -> PureState:
    """Noise-free output after ``cycles`` round trips.

    Odd counts return the input; even counts return it bit-flipped.
    """
    _check_cycles(cycles)
    if cycles % 2 == 0:
        return PureState(input.amp_v, input.amp_h)
    return PureState(input.amp_h, input.amp_v)


def cycle_channel(model: CycleModel, trapped: bool) -> CycleChannel:
    elements = [
        phase_retarder(model.storage_phase, "storage_phase"),
        attenuator(model.loss_per_cycle, "loss"),
    ]
    if model.pbs_extinction > 0.0:
        elements.append(attenuator(model.pbs_extinction, "pbs_routing"))
    elements.append(SIGMA_X if trapped else identity("release"))
    return CycleChannel(tuple(elements), model.visibility)


def entry_channel(model: CycleModel) -> CycleChannel:
    """First pass through the switch (Pockels cell off) into the storage line."""
    if model.pbs_extinction > 0.0:
        return CycleChannel((attenuator(model.pbs_extinction, "pbs_routing"),), 1.0)
    return CycleChannel((identity("entry"),), 1.0)


def propagate(input: PureState, cycles: int, model: CycleModel = CycleModel(),
              round_trip: float = ROUND_TRIP_NS) -> CycleOutcome:
    """Store ``input`` for ``cycles`` round trips and release it.

    The returned state is unnormalized; its trace is the survival
    probability ``(1 - loss_per_cycle) ** cycles`` (times the PBS routing
    factor when ``pbs_extinction`` is nonzero).
    """
    _check_cycles(cycles)
    v = model.visibility
    m_trap = cycle_channel(model, trapped=True).matrix
    m_exit = cycle_channel(model, trapped=False).matrix
    m_in = entry_channel(model).matrix

    psi = m_in @ input.vector
    rho = np.outer(psi, psi.conj())
    for k in range(1, cycles + 1):
        m = m_trap if k < cycles else m_exit
        rho = m @ rho @ m.conj().T
        rho[0, 1] *= v
        rho[1, 0] *= v
    return CycleOutcome(PolarizationState(rho), cycles, cycles * round_trip)


# -- element-by-element oracle -------------------------------------------------

def _mirror(label):
    # Direction-following frame: an ideal mirror acts as the identity.
    return identity(label)


def _storage_line(model):
    """Out along the storage line, off the end mirror, and back."""
    return [
        _mirror("m4"),
        phase_retarder(model.storage_phase, "storage_birefringence"),
        attenuator(model.loss_per_cycle, "lens_and_optics_loss"),
        _mirror("m5"),
    ]


def _misalignment_kraus(visibility):
    """Phase-damping Kraus pair scaling coherences by ``visibility``."""
    k0 = ElementOperator(math.sqrt((1.0 + visibility) / 2.0) * np.eye(2), "overlap")
    k1 = ElementOperator(math.sqrt((1.0 - visibility) / 2.0) * np.diag([1.0, -1.0]), "offset")
    return k0, k1


def _sagnac_pass(psi, retardation, extinction, reflect_back):
    """Send ``psi`` through the polarizing Sagnac switch.

    H is transmitted into the counter-clockwise arm and V reflected into the
    clockwise arm. On return, whatever still matches the entry polarization
    of its arm leaves through the opposite ("cross") port; the swapped part
    leaves back through the entry ("bar") port. ``reflect_back`` selects
    which port is the principal output followed here.
    """
    pc = pockels_operator(retardation)
    keep = math.sqrt(1.0 - extinction)

    arm_ccw = projector("H").m @ psi
    for op in (_mirror("m3"), pc, _mirror("m2"), _mirror("m1")):
        arm_ccw = op.m @ arm_ccw

    arm_cw = projector("V").m @ psi
    for op in (_mirror("m1"), _mirror("m2"), pc, _mirror("m3")):
        arm_cw = op.m @ arm_cw

    if reflect_back:
        out = projector("V", keep).m @ arm_ccw + projector("H", keep).m @ arm_cw
    else:
        out = projector("H", keep).m @ arm_ccw + projector("V", keep).m @ arm_cw
    return out


def _ensemble_rho(branches):
    rho = np.zeros((2, 2), dtype=complex)
    for psi in branches:
        rho += np.outer(psi, psi.conj())
    return rho


def _purify(rho):
    w, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return [math.sqrt(wi) * vecs[:, i] for i, wi in enumerate(w) if wi > 0.0]


def brute_force_oracle(input: PureState, cycles: int, model: CycleModel = CycleModel(),
                       round_trip: float = ROUND_TRIP_NS) -> CycleOutcome:
    """Reference path for ``propagate``; for desk-scale checks only (cycles <= 20)."""
    _check_cycles(cycles)
    if cycles > ORACLE_MAX_CYCLES:
        raise OutOfRangeError(f"oracle limited to {ORACLE_MAX_CYCLES} cycles, got {cycles}")

    k0, k1 = _misalignment_kraus(model.visibility)
    kraus = [k for k in (k0, k1) if np.any(k.m != 0.0)]
    eps = model.pbs_extinction

    # Entry: Pockels cell off, photon crosses into the storage line.
    branches = [_sagnac_pass(input.vector, 0.0, eps, reflect_back=False)]
    for k in range(1, cycles + 1):
        for op in _storage_line(model):
            branches = [op.m @ psi for psi in branches]
        branches = [kop.m @ psi for psi in branches for kop in kraus]
        trapped = k < cycles
        retardation = math.pi if trapped else 0.0
        branches = [_sagnac_pass(psi, retardation, eps, reflect_back=trapped) for psi in branches]
        if k < cycles:
            branches = _purify(_ensemble_rho(branches))
    return CycleOutcome(PolarizationState(_ensemble_rho(branches)), cycles, cycles * round_trip)


def phase_error_report(input: PureState, cycles: int, phi: float) -> tuple[float, float]:
    """Effect of a storage-line birefringent phase ``phi`` on the released qubit.

    Returns ``(fidelity_vs_ideal, residual_phase)``. The residual is the
    relative V-vs-H phase of the output against the ideal output, wrapped
    to (-pi, pi]; it is 0 when either ideal amplitude vanishes.
    """
    model = CycleModel.ideal(storage_phase=phi)
    out = propagate(input, cycles, model).state.normalized()
    ideal = ideal_output(input, cycles)
    f = fidelity(out, ideal)
    ideal_vh = ideal.amp_v * ideal.amp_h.conjugate()
    out_vh = out.rho[1, 0]
    if abs(ideal_vh) < 1e-12 or abs(out_vh) < 1e-12:
        return f, 0.0
    residual = cmath.phase(out_vh * ideal_vh.conjugate())
    return f, residual
