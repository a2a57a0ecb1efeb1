"""End-to-end acceptance checks, each with its runtime budget."""

import math
import time

import numpy as np
import pytest

from cqm.cli import EXIT_INFEASIBLE, EXIT_OK, main
from cqm.device import CycleModel, brute_force_oracle, ideal_output, phase_error_report, propagate
from cqm.fitting import fit_cos2
from cqm.montecarlo import ExperimentConfig, _run, run_analyzer_sweep, run_histogram, selected_peak_counts
from cqm.polarization import PureState, equal_up_to_phase, fidelity, make_linear


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, *_):
        self.elapsed = time.perf_counter() - self.t0
        if exc_type is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f} s, budget {self.seconds} s"


def test_criterion_1_parity():
    with Budget(1.0):
        psi = make_linear(30.0)
        for n in range(1, 7):
            out = propagate(psi, n, CycleModel.ideal()).state
            target = make_linear(30.0 if n % 2 else 60.0)
            assert fidelity(out, target) >= 1 - 1e-12


def test_criterion_2_loss_ratios():
    with Budget(60.0):
        areas = []
        for n in range(1, 7):
            cfg = ExperimentConfig(cycles=n, seed=20 + n)
            hist = run_histogram(cfg)
            assert hist.metadata["n_pairs"] >= 1_000_000
            areas.append(selected_peak_counts(hist, cfg))
        for n in range(1, 6):
            a, b = areas[n - 1], areas[n]
            r = b / a
            sigma = r * math.sqrt(1 / a + 1 / b)
            assert abs(r - 0.81) <= 3 * sigma, (n, r, sigma)


def _sweep(cfg):
    pts = run_analyzer_sweep(cfg, np.arange(0.0, 181.0, 10.0))
    return fit_cos2(*zip(*pts))


def test_criterion_3_cos2_sweeps():
    with Budget(120.0):
        for n in range(1, 6):
            fit = _sweep(ExperimentConfig(cycles=n, cycle_model=CycleModel.ideal(), seed=30 + n))
            want = 30.0 if n % 2 else 60.0
            assert abs(fit.theta0 - want) <= 2.0, (n, fit.theta0)
            assert fit.contrast >= 0.99, (n, fit.contrast)

        v = 0.9
        for n in range(1, 6):
            # equal H/V weights make the fringe contrast exactly the surviving coherence
            cfg = ExperimentConfig(cycles=n, input_theta=45.0, cycle_model=CycleModel.ideal(visibility=v),
                                   seed=40 + n)
            fit = _sweep(cfg)
            assert abs(fit.contrast - v**n) <= 3 * fit.contrast_sigma, (n, fit.contrast, fit.contrast_sigma)

            # a 30 deg input keeps its population imbalance, so the contrast floor is cos(60 deg)
            fit30 = _sweep(ExperimentConfig(cycles=n, cycle_model=CycleModel.ideal(visibility=v), seed=50 + n))
            a2, b2 = 0.75, 0.25
            expected = math.sqrt((a2 - b2) ** 2 + 4 * a2 * b2 * v ** (2 * n))
            assert abs(fit30.contrast - expected) <= 3 * fit30.contrast_sigma


def test_criterion_4_phase_self_correction():
    with Budget(1.0):
        psi = make_linear(30.0)
        phis = [k * math.pi / 6 for k in range(13)]
        for phi in phis:
            for n in (2, 4, 6, 8, 10):
                f, _ = phase_error_report(psi, n, phi)
                assert abs(f - 1.0) <= 1e-12
            for n in (1, 3, 5, 7, 9):
                out = propagate(psi, n, CycleModel.ideal(storage_phase=phi)).state
                w, vecs = np.linalg.eigh(out.rho)
                got = vecs[:, 1] * math.sqrt(w[1])
                expected = np.diag([1, np.exp(1j * phi)]) @ ideal_output(psi, n).vector
                assert equal_up_to_phase(got, expected, atol=1e-12)


def test_criterion_5_oracle_equivalence():
    rng = np.random.default_rng(5)
    with Budget(5.0):
        worst = 0.0
        for _ in range(150):
            z = rng.normal(size=2) + 1j * rng.normal(size=2)
            psi = PureState(z[0], z[1])
            model = CycleModel(loss_per_cycle=rng.uniform(0, 0.9), storage_phase=rng.uniform(-2 * np.pi, 2 * np.pi),
                               visibility=rng.uniform(0, 1), pbs_extinction=rng.uniform(0, 0.2))
            n = int(rng.integers(1, 11))
            a = propagate(psi, n, model).state.rho
            b = brute_force_oracle(psi, n, model).state.rho
            worst = max(worst, float(np.max(np.abs(a - b))))
        assert worst <= 1e-12


def test_criterion_6_timing_gate(tmp_path, capsys):
    ok = tmp_path / "ok.cfg"
    ok.write_text("cycles = 3\ndrive.round_trip = 13.3\ndrive.rise_time = 10\n")
    bad = tmp_path / "bad.cfg"
    bad.write_text("cycles = 3\ndrive.round_trip = 8\ndrive.rise_time = 10\n")
    with Budget(1.0):
        assert main(["validate", "--config", str(ok)]) == EXIT_OK
        assert main(["validate", "--config", str(bad)]) == EXIT_INFEASIBLE
    assert "rise time exceeds round trip" in capsys.readouterr().out


def test_criterion_7_determinism_and_merge(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("cycles = 4\nduration = 120\nseed = 12345\ncycle_model.visibility = 0.95\n")
    outs = []
    for name, threads in (("a", 1), ("b", 1), ("c", 8)):
        out = tmp_path / f"{name}.csv"
        assert main(["histogram", "--config", str(cfg_path), "--out", str(out), "--threads", str(threads)]) == 0
        outs.append((out.read_bytes(), (tmp_path / f"{name}.meta").read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0] == outs[2]

    cfg = ExperimentConfig(cycles=3, seed=7)
    one = _run(cfg, (), 1)
    eight = _run(cfg, (), 8)
    assert np.array_equal(one.counts, eight.counts)
    assert one.metadata == eight.metadata
