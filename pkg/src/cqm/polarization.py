"""
Polarization states and Jones operators over the {|H>, |V>} basis.

States are carried as 2x2 density matrices whose trace is the photon's
survival probability, so loss (sub-unitary operators) and dephasing act on
the same object. Angles are degrees at the API surface; retardations are
radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from cqm.errors import DegenerateStateError, InvalidArgumentError

__all__ = [
    "PureState",
    "PolarizationState",
    "ElementOperator",
    "make_linear",
    "pure",
    "pockels_operator",
    "hwp_operator",
    "phase_retarder",
    "attenuator",
    "projector",
    "identity",
    "SIGMA_X",
    "apply",
    "analyzer_probability",
    "fidelity",
    "equal_up_to_phase",
]

_TOL = 1e-12


def _finite(x, name):
    if not math.isfinite(x):
        raise InvalidArgumentError(f"{name} must be finite, got {x!r}")


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PureState:
    """Normalized Jones vector ``amp_h |H> + amp_v |V>``.

    Amplitudes are normalized at construction.
    """

    amp_h: complex
    amp_v: complex

    def __post_init__(self):
        h, v = complex(self.amp_h), complex(self.amp_v)
        if not all(math.isfinite(x) for x in (h.real, h.imag, v.real, v.imag)):
            raise InvalidArgumentError("amplitudes must be finite")
        norm = math.sqrt(abs(h) ** 2 + abs(v) ** 2)
        if norm == 0.0:
            raise DegenerateStateError("cannot normalize a zero Jones vector")
        object.__setattr__(self, "amp_h", h / norm)
        object.__setattr__(self, "amp_v", v / norm)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_h, self.amp_v], dtype=complex)

    def density(self) -> PolarizationState:
        return PolarizationState.from_vector(self.vector)


@dataclass(frozen=True, eq=False)
class PolarizationState:
    """Unnormalized density matrix; ``trace`` is the survival probability."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (2, 2):
            raise InvalidArgumentError(f"rho must be 2x2, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise InvalidArgumentError("rho has non-finite entries")
        if np.max(np.abs(rho - rho.conj().T)) > _TOL:
            raise InvalidArgumentError("rho is not Hermitian")
        rho = 0.5 * (rho + rho.conj().T)
        w = np.linalg.eigvalsh(rho)
        if w[0] < -1e-10:
            raise InvalidArgumentError(f"rho has negative eigenvalue {w[0]:.3e}")
        tr = float(np.real(np.trace(rho)))
        if tr > 1.0 + _TOL:
            raise InvalidArgumentError(f"trace {tr} exceeds 1")
        object.__setattr__(self, "rho", _frozen(rho))

    @classmethod
    def from_vector(cls, vec) -> PolarizationState:
        vec = np.asarray(vec, dtype=complex)
        return cls(np.outer(vec, vec.conj()))

    @property
    def trace(self) -> float:
        return float(np.real(self.rho[0, 0] + self.rho[1, 1]))

    def normalized(self) -> PolarizationState:
        tr = self.trace
        if tr <= 0.0:
            raise DegenerateStateError("zero-trace state cannot be normalized")
        return PolarizationState(self.rho / tr)

    def dephased(self, visibility: float) -> PolarizationState:
        """Scale the H/V coherences by ``visibility`` (phase damping)."""
        rho = np.array(self.rho)
        rho[0, 1] *= visibility
        rho[1, 0] *= visibility
        return PolarizationState(rho)

    def __repr__(self):
        r = self.rho
        return (f"PolarizationState(trace={self.trace:.6g}, "
                f"rho_hh={r[0, 0].real:.6g}, rho_vv={r[1, 1].real:.6g}, rho_hv={r[0, 1]:.6g})")


@dataclass(frozen=True, eq=False)
class ElementOperator:
    """2x2 Jones operator for a single optical element."""

    m: np.ndarray
    label: str = ""
    lossless: bool = field(default=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=complex)
        if m.shape != (2, 2):
            raise InvalidArgumentError(f"operator must be 2x2, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidArgumentError(f"operator '{self.label}' has non-finite entries")
        if self.lossless and np.max(np.abs(m @ m.conj().T - np.eye(2))) > _TOL:
            raise InvalidArgumentError(f"operator '{self.label}' is declared lossless but is not unitary")
        object.__setattr__(self, "m", _frozen(m))

    def __matmul__(self, other: ElementOperator) -> ElementOperator:
        return ElementOperator(self.m @ other.m, f"{self.label}*{other.label}",
                               lossless=self.lossless and other.lossless)

    def is_unitary(self, atol=_TOL) -> bool:
        return bool(np.max(np.abs(self.m @ self.m.conj().T - np.eye(2))) <= atol)


def _rot(theta_rad):
    c, s = math.cos(theta_rad), math.sin(theta_rad)
    return np.array([[c, -s], [s, c]])


def make_linear(theta: float) -> PureState:
    """Linear polarization at ``theta`` degrees from horizontal.

    >>> s = make_linear(30.0)
    >>> round(s.amp_h.real, 5), round(s.amp_v.real, 5)
    (0.86603, 0.5)
    """
    _finite(theta, "theta")
    t = math.radians(theta)
    return PureState(math.cos(t), math.sin(t))


def pure(state: PureState) -> PolarizationState:
    return state.density()


def identity(label="I") -> ElementOperator:
    return ElementOperator(np.eye(2), label, lossless=True)


SIGMA_X = ElementOperator(np.array([[0, 1], [1, 0]]), "sigma_x", lossless=True)


def pockels_operator(retardation: float) -> ElementOperator:
    """Pockels cell with fast axis at 45 degrees and the given retardation.

    Half-wave retardation (pi) swaps H and V; zero retardation does nothing.
    Clamping to [0, pi] is left to the caller.
    """
    _finite(retardation, "retardation")
    if retardation < 0.0 or retardation > math.pi:
        raise InvalidArgumentError(f"retardation {retardation} outside [0, pi]")
    r = _rot(math.pi / 4)
    m = r @ np.diag([1.0, np.exp(1j * retardation)]) @ r.T
    return ElementOperator(m, f"PC(delta={retardation:.6g})", lossless=True)


def hwp_operator(axis_angle: float) -> ElementOperator:
    """Half-wave plate with fast axis at ``axis_angle`` degrees.

    Maps linear polarization at theta to 2*axis_angle - theta.
    """
    _finite(axis_angle, "axis_angle")
    t = 2.0 * math.radians(axis_angle)
    m = np.array([[math.cos(t), math.sin(t)], [math.sin(t), -math.cos(t)]])
    return ElementOperator(m, f"HWP({axis_angle:g})", lossless=True)


def phase_retarder(phase: float, label="retarder") -> ElementOperator:
    """diag(1, exp(i*phase)): relative phase on the V component."""
    _finite(phase, "phase")
    return ElementOperator(np.diag([1.0, np.exp(1j * phase)]), label, lossless=True)


def attenuator(loss: float, label="loss") -> ElementOperator:
    """Polarization-independent amplitude scaling sqrt(1 - loss)."""
    if not 0.0 <= loss <= 1.0:
        raise InvalidArgumentError(f"loss {loss} outside [0, 1]")
    return ElementOperator(math.sqrt(1.0 - loss) * np.eye(2), label)


def projector(pol: str, scale: float = 1.0) -> ElementOperator:
    """Projector onto 'H' or 'V', optionally scaled (a leaky PBS port)."""
    if pol not in ("H", "V"):
        raise InvalidArgumentError(f"pol must be 'H' or 'V', got {pol!r}")
    m = np.zeros((2, 2))
    i = 0 if pol == "H" else 1
    m[i, i] = scale
    return ElementOperator(m, f"P_{pol}")


def apply(op: ElementOperator, state: PolarizationState) -> PolarizationState:
    """Return ``M rho M^dagger``."""
    m = op.m
    rho = m @ state.rho @ m.conj().T
    return PolarizationState(0.5 * (rho + rho.conj().T))


def analyzer_probability(state: PolarizationState, theta_q: float) -> float:
    """Probability of passing a linear analyzer set to ``theta_q`` degrees.

    Unnormalized: lies in [0, trace(state)].
    """
    _finite(theta_q, "theta_q")
    t = math.radians(theta_q)
    c, s = math.cos(t), math.sin(t)
    r = state.rho
    p = c * c * r[0, 0].real + s * s * r[1, 1].real + 2.0 * c * s * r[0, 1].real
    return min(max(float(p), 0.0), state.trace)


def fidelity(state: PolarizationState, target: PureState) -> float:
    """<psi|rho|psi> / tr(rho). Global phase of the target does not matter."""
    tr = state.trace
    if tr <= 0.0:
        raise DegenerateStateError("fidelity of a zero-trace state is undefined")
    v = target.vector
    f = float(np.real(v.conj() @ state.rho @ v)) / tr
    return min(max(f, 0.0), 1.0)


def equal_up_to_phase(a, b, atol: float = _TOL) -> bool:
    """True if ``a == exp(i*phi) * b`` for some phi, elementwise within ``atol``.

    Works for Jones vectors, operator matrices, or ElementOperators.
    """
    a = np.asarray(a.m if isinstance(a, ElementOperator) else a, dtype=complex)
    b = np.asarray(b.m if isinstance(b, ElementOperator) else b, dtype=complex)
    overlap = np.vdot(b, a)
    if abs(overlap) == 0.0:
        return bool(np.max(np.abs(a)) <= atol and np.max(np.abs(b)) <= atol)
    phase = overlap / abs(overlap)
    return bool(np.max(np.abs(a - phase * b)) <= atol)
