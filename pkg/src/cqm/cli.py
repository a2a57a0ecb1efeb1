"""
Command-line front end: ``cqm validate | histogram | sweep``.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, replace

from cqm import __version__
from cqm.config import config_digest, format_config, load_config, with_seed
from cqm.control import build_waveform, check_schedule, schedule_for_cycles
from cqm.errors import CQMError, ConfigError, InfeasibleScheduleError, InvalidScheduleError
from cqm.fitting import fit_cos2
from cqm.montecarlo import UNCALIBRATED, run_analyzer_sweep, run_histogram

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_INFEASIBLE = 4
EXIT_IO = 5

EPILOG = f"""\
exit status:
  {EXIT_OK}  success
  {EXIT_USAGE}  bad command-line usage
  {EXIT_CONFIG}  config file could not be parsed or holds invalid values
  {EXIT_INFEASIBLE}  drive schedule violates a timing constraint
  {EXIT_IO}  output could not be written (no partial files are left)
"""


@dataclass(frozen=True)
class RunManifest:
    config_digest: str
    seed: int
    tool_version: str
    outputs: tuple

    def render(self) -> str:
        lines = [f"config_digest = {self.config_digest}", f"seed = {self.seed}",
                 f"tool_version = {self.tool_version}"]
        lines += [f"output = {p}" for p in self.outputs]
        return "\n".join(lines)


def _g(x) -> str:
    return f"{x:.9g}"


def sidecar_path(out_path: str) -> str:
    root, _ = os.path.splitext(out_path)
    return root + ".meta"


def write_atomic(files: dict[str, str]) -> None:
    """Write every ``path -> text`` pair or none of them."""
    temps = {}
    committed = []  # (path, backup of the file it replaced or None)
    try:
        for path, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=os.path.dirname(os.path.abspath(path)))
            temps[path] = tmp
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        for path, tmp in temps.items():
            backup = None
            if os.path.isfile(path):
                fd, backup = tempfile.mkstemp(prefix=".bak-", dir=os.path.dirname(os.path.abspath(path)))
                os.close(fd)
                os.replace(path, backup)
            committed.append((path, backup))
            os.replace(tmp, path)
    except BaseException:
        for path, backup in reversed(committed):
            if backup is not None:
                os.replace(backup, path)
            elif os.path.isfile(path):
                os.unlink(path)
        for tmp in temps.values():
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise
    for _, backup in committed:
        if backup is not None:
            os.unlink(backup)


def _sidecar(cfg, extra) -> str:
    head = [("digest", config_digest(cfg)), ("tool_version", __version__),
            ("uncalibrated", ",".join(UNCALIBRATED))]
    return "# cqm run metadata; loadable as a config\n" + format_config(cfg, head + extra)


def _timing_checks(cfg):
    """Yield (name, ok, detail) for each drive timing constraint."""
    d = cfg.drive
    rt = d.round_trip
    yield ("rise_time < round_trip", d.rise_time < rt,
           f"{d.rise_time:g} ns vs {rt:g} ns" if d.rise_time < rt else "rise time exceeds round trip")
    yield ("fall_time < round_trip", d.fall_time < rt,
           f"{d.fall_time:g} ns vs {rt:g} ns" if d.fall_time < rt else "fall time exceeds round trip")
    yield ("pulse_width > round_trip", d.pulse_width > rt, f"{d.pulse_width:g} ns vs {rt:g} ns")
    name = f"schedule releases after {cfg.cycles} cycles"
    try:
        drive = d if d.scheduled else schedule_for_cycles(cfg.cycles, rt, d)
        check_schedule(drive, cfg.cycles)
    except (InfeasibleScheduleError, InvalidScheduleError) as exc:
        yield (name, False, str(exc))
    else:
        yield (name, True, "pi at returns 1..n-1, 0 at return n")


def _resolve(args):
    cfg = with_seed(load_config(args.config), args.seed)
    drive = cfg.resolved_drive()
    build_waveform(drive, horizon=cfg.cycles * cfg.round_trip)
    return cfg


def cmd_validate(args) -> int:
    cfg = with_seed(load_config(args.config), args.seed)
    if args.print_resolved:
        sys.stdout.write(format_config(cfg))
        try:
            drive = cfg.resolved_drive()
        except CQMError:
            drive = None
        if drive is not None and drive.armed and not cfg.drive.scheduled:
            print(f"# synthesized drive.gd1_delay = {drive.gd1_delay!r}")
            print(f"# synthesized drive.gd2_delay = {drive.gd2_delay!r}")
    ok = True
    for name, passed, detail in _timing_checks(cfg):
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_histogram(args) -> RunManifest:
    cfg = _resolve(args)
    hist = run_histogram(cfg, threads=args.threads)
    rows = ["bin_start_ns,bin_end_ns,counts"]
    edges = hist.bin_edges
    rows += [f"{_g(edges[i])},{_g(edges[i + 1])},{int(c)}" for i, c in enumerate(hist.counts)]
    m = hist.metadata
    extra = [("run.n_pairs", str(m["n_pairs"])), ("run.n_triggers", str(m["n_triggers"])),
             ("run.n_dark", str(m["n_dark"]))]
    side = sidecar_path(args.out)
    write_atomic({args.out: "\n".join(rows) + "\n", side: _sidecar(cfg, extra)})
    return RunManifest(config_digest(cfg), cfg.seed, __version__, (args.out, side))


def sweep_angles(start, end, step):
    if not step > 0:
        raise ConfigError("theta step must be > 0", field="theta_step")
    n = int(math.floor((end - start) / step + 1e-9)) + 1
    if n < 1:
        raise ConfigError("theta_end is before theta_start", field="theta_end")
    return [start + i * step for i in range(n)]


def cmd_sweep(args) -> RunManifest:
    cfg = replace(_resolve(args), analyzer_theta=None)
    thetas = sweep_angles(args.theta_start, args.theta_end, args.theta_step)
    points = run_analyzer_sweep(cfg, thetas, threads=args.threads)
    rows = ["theta_deg,counts,poisson_sigma"]
    rows += [f"{_g(t)},{c},{_g(math.sqrt(c))}" for t, c in points]
    extra = [("sweep.theta_start", repr(float(args.theta_start))),
             ("sweep.theta_end", repr(float(args.theta_end))),
             ("sweep.theta_step", repr(float(args.theta_step)))]
    fit = fit_cos2([t for t, _ in points], [c for _, c in points]) if len(points) > 1 else None
    if fit is not None:
        extra += [("fit.theta0_deg", _g(fit.theta0)), ("fit.theta0_sigma_deg", _g(fit.theta0_sigma)),
                  ("fit.amplitude", _g(fit.amplitude)), ("fit.offset", _g(fit.offset)),
                  ("fit.contrast", _g(fit.contrast)), ("fit.contrast_sigma", _g(fit.contrast_sigma))]
    side = sidecar_path(args.out)
    write_atomic({args.out: "\n".join(rows) + "\n", side: _sidecar(cfg, extra)})
    return RunManifest(config_digest(cfg), cfg.seed, __version__, (args.out, side))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="key-value experiment config file")
    common.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="override the config seed (u64)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for the Monte Carlo")
    common.add_argument("--print-resolved", action="store_true", help="print the fully resolved config")

    p = argparse.ArgumentParser(prog="cqm", description="Cyclical quantum memory simulator",
                                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"cqm {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check config and drive timing constraints",
                   epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    h = sub.add_parser("histogram", parents=[common], help="arrival-time coincidence histogram",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    h.add_argument("--out", required=True, help="CSV output path; metadata goes to <stem>.meta")
    s = sub.add_parser("sweep", parents=[common], help="analyzer-angle sweep of the selected peak",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--out", required=True, help="CSV output path; metadata goes to <stem>.meta")
    s.add_argument("--theta-start", type=float, default=0.0)
    s.add_argument("--theta-end", type=float, default=180.0)
    s.add_argument("--theta-step", type=float, default=10.0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "validate":
            return cmd_validate(args)
        if args.print_resolved:
            sys.stdout.write(format_config(with_seed(load_config(args.config), args.seed)))
        manifest = cmd_histogram(args) if args.command == "histogram" else cmd_sweep(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleScheduleError, InvalidScheduleError) as exc:
        print(f"infeasible schedule: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CQMError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(manifest.render())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
