"""
Seeded Monte Carlo runs of the heralded-photon storage experiment.

Every trial (one emitted photon pair) draws its random numbers from a
counter-based stream keyed by (seed, trial index), so a run can be split
across any number of workers and merged by summing integer histograms
without changing the result.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from cqm import kernel
from cqm.control import DriveConfig, build_waveform, schedule_for_cycles, traversal_retardations
from cqm.device import CycleModel
from cqm.errors import ConfigError, OutOfRangeError
from cqm.polarization import make_linear

__all__ = [
    "ExperimentConfig",
    "ArrivalHistogram",
    "run_histogram",
    "run_analyzer_sweep",
    "peak_areas",
    "selected_peak_counts",
    "UNCALIBRATED",
]

# Passes simulated beyond the last drive edge; only misrouted photons
# (pbs_extinction > 0) can still be in the loop there.
EXTRA_PASSES = 32
CHUNK = 1 << 18

# Parameters with no published absolute value; defaults are order-of-magnitude.
UNCALIBRATED = (
    "pair_rate",
    "detector_efficiency_trigger",
    "detector_efficiency_qubit",
    "timing_jitter_sigma",
    "bin_width",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one simulated run.

    Times are ns except ``duration`` (s); rates are per second; angles are
    degrees. ``analyzer_theta=None`` means the analyzer is removed.
    ``hist_start``/``hist_end`` default to a window around the expected
    storage peaks.
    """

    cycles: int = 1
    pair_rate: float = 2000.0
    duration: float = 600.0
    input_theta: float = 30.0
    cycle_model: CycleModel = field(default_factory=CycleModel)
    drive: DriveConfig = field(default_factory=DriveConfig)
    fiber_delay: float = 600.0
    detector_efficiency_trigger: float = 0.2
    detector_efficiency_qubit: float = 0.15
    dark_rate: float = 0.0
    bin_width: float = 0.5
    timing_jitter_sigma: float = 0.5
    analyzer_theta: float | None = None
    seed: int = 0
    hist_start: float | None = None
    hist_end: float | None = None

    def __post_init__(self):
        if isinstance(self.cycles, bool) or not isinstance(self.cycles, int) or self.cycles < 1:
            raise ConfigError("must be an integer >= 1", field="cycles")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("must be an integer in [0, 2**64)", field="seed")
        nonneg = ("pair_rate", "duration", "fiber_delay", "dark_rate", "timing_jitter_sigma")
        for name in nonneg:
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0.0):
                raise ConfigError(f"must be finite and >= 0, got {val!r}", field=name)
        for name in ("detector_efficiency_trigger", "detector_efficiency_qubit"):
            val = getattr(self, name)
            if not (math.isfinite(val) and 0.0 <= val <= 1.0):
                raise ConfigError(f"must be a probability, got {val!r}", field=name)
        if not (math.isfinite(self.bin_width) and self.bin_width > 0.0):
            raise ConfigError(f"must be > 0, got {self.bin_width!r}", field="bin_width")
        for name in ("input_theta", "analyzer_theta", "hist_start", "hist_end"):
            val = getattr(self, name)
            if val is not None and not math.isfinite(val):
                raise ConfigError("must be finite", field=name)
        lo, hi = self.histogram_range()
        if not hi > lo:
            raise ConfigError(f"histogram window [{lo}, {hi}) is empty", field="hist_end")

    @property
    def round_trip(self) -> float:
        return self.drive.round_trip

    def resolved_drive(self) -> DriveConfig:
        """The drive actually used: explicit delays, or a synthesized schedule."""
        if self.drive.scheduled:
            return self.drive
        return schedule_for_cycles(self.cycles, self.drive.round_trip, self.drive)

    def peak_time(self, k: int) -> float:
        """Expected arrival (relative to trigger) after k round trips."""
        return self.fiber_delay + k * self.round_trip

    def histogram_range(self) -> tuple[float, float]:
        t = self.round_trip
        lo = self.hist_start if self.hist_start is not None else max(0.0, self.fiber_delay - t)
        hi = self.hist_end if self.hist_end is not None else self.fiber_delay + (self.cycles + 4) * t
        return lo, hi

    def bin_edges(self) -> np.ndarray:
        lo, hi = self.histogram_range()
        n = math.ceil((hi - lo) / self.bin_width - 1e-9)
        return lo + self.bin_width * np.arange(n + 1)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class ArrivalHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def nbins(self) -> int:
        return int(self.counts.size)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _kernel_params(cfg: ExperimentConfig, nbins: int, hist_start: float) -> kernel.KernelParams:
    drive = cfg.resolved_drive()
    t = cfg.round_trip
    wf = build_waveform(drive, horizon=cfg.cycles * t)
    kmax = math.ceil(wf.last_edge / t) + EXTRA_PASSES
    wf = build_waveform(drive, horizon=kmax * t)
    deltas = np.array(traversal_retardations(wf, kmax, t, start=0))
    flips = np.sin(0.5 * deltas) ** 2

    psi = make_linear(cfg.input_theta)
    h, v = psi.amp_h, psi.amp_v
    hv = h * v.conjugate()
    m = cfg.cycle_model
    analyzer = cfg.analyzer_theta is not None
    a = math.radians(cfg.analyzer_theta) if analyzer else 0.0
    c, s = math.cos(a), math.sin(a)
    return kernel.KernelParams(
        eta_t=cfg.detector_efficiency_trigger,
        eta_q=cfg.detector_efficiency_qubit,
        rho_hh=abs(h) ** 2,
        rho_vv=abs(v) ** 2,
        rho_hv_re=hv.real,
        rho_hv_im=hv.imag,
        phase_cos=math.cos(m.storage_phase),
        phase_sin=-math.sin(m.storage_phase),
        visibility=m.visibility,
        survive=1.0 - m.loss_per_cycle,
        misroute=m.pbs_extinction,
        flip_probs=flips,
        round_trip=t,
        fiber_delay=cfg.fiber_delay,
        jitter_sigma=cfg.timing_jitter_sigma,
        analyzer=analyzer,
        an_cc=c * c,
        an_ss=s * s,
        an_2cs=2.0 * c * s,
        hist_start=hist_start,
        bin_width=cfg.bin_width,
        nbins=nbins,
    )


def _partition(n, parts):
    """Split range(n) into ``parts`` contiguous ranges, each cut into CHUNK pieces."""
    bounds = np.linspace(0, n, parts + 1).astype(np.int64)
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        out.extend((int(x), int(min(x + CHUNK, b))) for x in range(int(a), int(b), CHUNK))
    return out


def _run(cfg: ExperimentConfig, path: tuple, threads: int, simulate=None) -> ArrivalHistogram:
    simulate = simulate or kernel.simulate_chunk
    meta = {"seed": cfg.seed, "stream": list(path), "uncalibrated": list(UNCALIBRATED)}
    if cfg.duration == 0.0:
        meta.update(n_pairs=0, n_triggers=0, n_dark=0)
        return ArrivalHistogram(np.zeros(0), np.zeros(0, dtype=np.int64), meta)

    edges = cfg.bin_edges()
    nbins = edges.size - 1
    params = _kernel_params(cfg, nbins, float(edges[0]))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=path)))
    n_pairs = int(rng.poisson(cfg.pair_rate * cfg.duration))
    key = kernel.stream_key(cfg.seed, *path)

    jobs = _partition(n_pairs, max(1, threads))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: simulate(key, j[0], j[1], params), jobs))
    else:
        results = [simulate(key, a, b, params) for a, b in jobs]

    counts = np.zeros(nbins, dtype=np.int64)
    n_trig = 0
    for c, n in results:
        counts += c
        n_trig += n

    # accidental coincidences: detector dark counts inside the window after each trigger
    window_s = (edges[-1] - edges[0]) * 1e-9
    n_dark = int(rng.poisson(cfg.dark_rate * window_s * n_trig)) if cfg.dark_rate > 0 else 0
    if n_dark:
        idx = rng.integers(0, nbins, size=n_dark)
        counts += np.bincount(idx, minlength=nbins)

    meta.update(n_pairs=n_pairs, n_triggers=n_trig, n_dark=n_dark)
    return ArrivalHistogram(edges, counts, meta)


def run_histogram(cfg: ExperimentConfig, threads: int = 1) -> ArrivalHistogram:
    """Coincidence histogram of qubit arrival times relative to the trigger.

    Deterministic for a fixed ``cfg.seed`` and independent of ``threads``.
    """
    return _run(cfg, (), threads)


def selected_peak_counts(hist: ArrivalHistogram, cfg: ExperimentConfig) -> int:
    """Counts in the window of the peak the schedule is set to release."""
    if hist.nbins == 0:
        return 0
    return int(peak_areas(hist, cfg.round_trip, cfg.fiber_delay, cfg.cycles)[-1][1])


def run_analyzer_sweep(cfg: ExperimentConfig, thetas, threads: int = 1) -> list[tuple[float, int]]:
    """Selected-peak counts at each analyzer angle.

    Each angle gets its own random stream, derived from the seed and the
    angle's position in ``thetas``.
    """
    thetas = [float(t) for t in thetas]
    if not thetas:
        raise ConfigError("analyzer sweep needs at least one angle", field="thetas")
    out = []
    for i, theta in enumerate(thetas):
        point = replace(cfg, analyzer_theta=theta)
        hist = _run(point, (i + 1,), threads)
        out.append((theta, selected_peak_counts(hist, point)))
    return out


def peak_areas(hist: ArrivalHistogram, round_trip: float, fiber_delay: float,
               n_max: int) -> list[tuple[int, float, float]]:
    """Integrate counts within +/- half a round trip of each expected peak.

    A bin belongs to peak k if its centre lies in
    [fiber_delay + k*round_trip - round_trip/2, ... + round_trip/2).
    Returns ``(k, area, sqrt(area))`` for k = 1..n_max.
    """
    if hist.nbins == 0:
        return [(k, 0.0, 0.0) for k in range(1, n_max + 1)]
    lo_edge, hi_edge = float(hist.bin_edges[0]), float(hist.bin_edges[-1])
    centers = hist.centers
    out = []
    for k in range(1, n_max + 1):
        c = fiber_delay + k * round_trip
        lo, hi = c - 0.5 * round_trip, c + 0.5 * round_trip
        if lo < lo_edge or hi > hi_edge:
            raise OutOfRangeError(
                f"peak {k} window [{lo:.6g}, {hi:.6g}) ns outside histogram [{lo_edge:.6g}, {hi_edge:.6g})")
        area = float(hist.counts[(centers >= lo) & (centers < hi)].sum())
        out.append((k, area, math.sqrt(area)))
    return out
