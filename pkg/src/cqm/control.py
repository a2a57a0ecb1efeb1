"""
Pockels cell drive timing.

Two delay generators each emit a TTL pulse of fixed width; the pulses are
OR'd into the Pockels driver. The cell starts ramping on at the leading
edge of the first pulse and ramps off after the trailing edge of the
second, so the on-window can be shorter or longer than a single pulse.

Time origin t = 0 is the photon's first entry into the Sagnac switch; the
k-th return to the switch happens at t_k = k * round_trip. The second
pulse may be armed before t = 0 (negative ``gd2_delay``), which is how
on-windows shorter than the pulse width are obtained.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace

from cqm.errors import (
    InfeasibleScheduleError,
    InvalidArgumentError,
    InvalidScheduleError,
    OutOfRangeError,
)

PI = math.pi

__all__ = [
    "DriveConfig",
    "Segment",
    "DriveWaveform",
    "build_waveform",
    "retardation_at",
    "schedule_for_cycles",
    "traversal_retardations",
    "check_schedule",
]


@dataclass(frozen=True)
class DriveConfig:
    """Delay-generator and driver settings, all in ns.

    ``gd1_delay``/``gd2_delay`` left as None mean "synthesize from the cycle
    count" (see :func:`schedule_for_cycles`). ``armed=False`` keeps the cell
    off for the whole run.
    """

    gd1_delay: float | None = None
    gd2_delay: float | None = None
    pulse_width: float = 100.0
    rise_time: float = 10.0
    fall_time: float = 10.0
    round_trip: float = 13.3
    armed: bool = True

    def __post_init__(self):
        for name in ("pulse_width", "rise_time", "fall_time", "round_trip"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise InvalidArgumentError(f"{name} must be positive and finite, got {val!r}")
        if self.pulse_width <= self.round_trip:
            raise InvalidArgumentError(
                f"pulse_width {self.pulse_width} must exceed round_trip {self.round_trip}")
        if self.gd1_delay is not None and not (math.isfinite(self.gd1_delay) and self.gd1_delay >= 0.0):
            raise InvalidArgumentError(f"gd1_delay must be finite and >= 0, got {self.gd1_delay!r}")
        if self.gd2_delay is not None and not math.isfinite(self.gd2_delay):
            raise InvalidArgumentError(f"gd2_delay must be finite, got {self.gd2_delay!r}")

    @property
    def scheduled(self) -> bool:
        return not self.armed or (self.gd1_delay is not None and self.gd2_delay is not None)


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    delta_start: float
    delta_end: float


@dataclass(frozen=True)
class DriveWaveform:
    """Piecewise-linear retardation vs time (ns -> radians)."""

    segments: tuple

    def __post_init__(self):
        segs = self.segments
        if not segs:
            raise InvalidScheduleError("waveform needs at least one segment")
        for s in segs:
            if not s.t_end > s.t_start:
                raise InvalidScheduleError(f"empty or reversed segment {s}")
            for d in (s.delta_start, s.delta_end):
                if not 0.0 <= d <= PI:
                    raise InvalidScheduleError(f"retardation {d} outside [0, pi]")
        for a, b in zip(segs, segs[1:]):
            if a.t_end != b.t_start or a.delta_end != b.delta_start:
                raise InvalidScheduleError(f"segments {a} and {b} are not contiguous")
        object.__setattr__(self, "_starts", [s.t_start for s in segs])

    @property
    def t_min(self) -> float:
        return self.segments[0].t_start

    @property
    def t_max(self) -> float:
        return self.segments[-1].t_end

    @property
    def last_edge(self) -> float:
        """Time after which the retardation stays at its final value."""
        for s in reversed(self.segments):
            if s.delta_start != s.delta_end:
                return s.t_end
        return self.t_min


def build_waveform(cfg: DriveConfig, horizon: float | None = None) -> DriveWaveform:
    """Retardation seen by the photon for the given pulse timing.

    Ramps 0 -> pi over ``rise_time`` from ``gd1_delay``, holds at pi,
    ramps pi -> 0 over ``fall_time`` from ``gd2_delay + pulse_width``. The
    domain runs from t = 0 to at least one round trip past the last edge,
    extended to ``horizon`` if given.

    Raises
    ------
    InvalidScheduleError
        If the OR of the two pulses drops low in between
        (``gd2_delay > gd1_delay + pulse_width``), or the turn-off edge
        comes before the turn-on ramp has finished.
    """
    end = cfg.round_trip
    if horizon is not None:
        end = max(end, horizon)
    if not cfg.armed:
        return DriveWaveform((Segment(0.0, end, 0.0, 0.0),))
    if cfg.gd1_delay is None or cfg.gd2_delay is None:
        raise InvalidArgumentError("gd1_delay and gd2_delay must be set to build an armed waveform")

    t_on, rise, fall = cfg.gd1_delay, cfg.rise_time, cfg.fall_time
    t_off = cfg.gd2_delay + cfg.pulse_width
    if cfg.gd2_delay > t_on + cfg.pulse_width:
        raise InvalidScheduleError(
            f"pulse OR drops low between {t_on + cfg.pulse_width:g} ns and {cfg.gd2_delay:g} ns")
    if t_off < t_on + rise:
        raise InvalidScheduleError(
            f"turn-off edge at {t_off:g} ns precedes end of turn-on ramp at {t_on + rise:g} ns")

    t_zero = t_off + fall
    end = max(end, t_zero + cfg.round_trip)
    segs = []
    if t_on > 0.0:
        segs.append(Segment(0.0, t_on, 0.0, 0.0))
    segs.append(Segment(t_on, t_on + rise, 0.0, PI))
    if t_off > t_on + rise:
        segs.append(Segment(t_on + rise, t_off, PI, PI))
    segs.append(Segment(t_off, t_zero, PI, 0.0))
    segs.append(Segment(t_zero, end, 0.0, 0.0))
    return DriveWaveform(tuple(segs))


def retardation_at(wf: DriveWaveform, t: float) -> float:
    if not (wf.t_min <= t <= wf.t_max):
        raise OutOfRangeError(f"t={t} ns outside waveform domain [{wf.t_min}, {wf.t_max}]")
    i = max(bisect.bisect_right(wf._starts, t) - 1, 0)
    s = wf.segments[i]
    if s.delta_start == s.delta_end:
        return s.delta_start
    frac = (t - s.t_start) / (s.t_end - s.t_start)
    d = s.delta_start + (s.delta_end - s.delta_start) * frac
    return min(max(d, 0.0), PI)


def traversal_retardations(wf: DriveWaveform, n: int, round_trip: float, start: int = 1) -> list[float]:
    """Retardation at each return to the switch, t_k = k * round_trip for k = start..n."""
    return [retardation_at(wf, k * round_trip) for k in range(start, n + 1)]


def schedule_for_cycles(n: int, round_trip: float = 13.3, template: DriveConfig | None = None) -> DriveConfig:
    """Pulse delays that hold the photon for ``n`` round trips, then release it.

    Ramps are centred between traversals: the turn-on ramp between entry
    and the first return, the turn-off ramp between returns n-1 and n.
    For ``n == 1`` the cell is never armed.

    Raises
    ------
    InfeasibleScheduleError
        When a ramp cannot fit between two traversals, or the pulses are too
        short to hold the cell on through traversal n-1.
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InvalidArgumentError(f"n must be an integer >= 1, got {n!r}")
    template = template or DriveConfig(round_trip=round_trip)
    cfg = replace(template, round_trip=round_trip)
    if cfg.rise_time >= round_trip:
        raise InfeasibleScheduleError(
            f"rise time {cfg.rise_time:g} ns exceeds round trip {round_trip:g} ns",
            traversal=1, constraint="rise_time")
    if cfg.fall_time >= round_trip:
        raise InfeasibleScheduleError(
            f"fall time {cfg.fall_time:g} ns exceeds round trip {round_trip:g} ns",
            traversal=max(n, 1), constraint="fall_time")
    if n == 1:
        return replace(cfg, armed=False, gd1_delay=None, gd2_delay=None)

    gd1 = 0.5 * (round_trip - cfg.rise_time)
    t_off = (n - 1) * round_trip + 0.5 * (round_trip - cfg.fall_time)
    gd2 = t_off - cfg.pulse_width
    if gd2 > gd1 + cfg.pulse_width:
        gap_start = gd1 + cfg.pulse_width
        k = math.floor(gap_start / round_trip) + 1
        raise InfeasibleScheduleError(
            f"two {cfg.pulse_width:g} ns pulses cannot hold the cell on for {n} cycles; "
            f"OR output drops low before traversal {k}",
            traversal=k, constraint="pulse_width")
    return replace(cfg, armed=True, gd1_delay=gd1, gd2_delay=gd2)


def check_schedule(cfg: DriveConfig, n: int) -> list[float]:
    """Verify an explicit schedule switches cleanly: pi at returns 1..n-1, 0 at return n.

    Returns the traversal retardations; raises InfeasibleScheduleError naming
    the first traversal that sees anything else.
    """
    wf = build_waveform(cfg, horizon=n * cfg.round_trip)
    deltas = traversal_retardations(wf, n, cfg.round_trip, start=0)
    if deltas[0] != 0.0:
        raise InfeasibleScheduleError(
            f"cell not off at entry (retardation {deltas[0]:.4g} rad)", traversal=0, constraint="entry")
    for k, d in enumerate(deltas[1:], start=1):
        want = PI if k < n else 0.0
        if d != want:
            raise InfeasibleScheduleError(
                f"traversal {k} sees retardation {d:.4g} rad, expected {want:.4g}",
                traversal=k, constraint="timing")
    return deltas[1:]
