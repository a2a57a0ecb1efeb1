"""
Flat key-value experiment config files.

::

    # comment
    cycles = 3
    cycle_model.loss_per_cycle = 0.19
    drive.rise_time = 10
    analyzer_theta = none

Only ``cycles`` is required. Metadata sidecars written by the CLI use the
same format plus ``digest``, ``tool_version`` and ``run.*``/``sweep.*``/
``fit.*`` keys; when a ``digest`` is present it is checked on load.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import fields, replace

from cqm.control import DriveConfig
from cqm.device import CycleModel
from cqm.errors import CQMError, ConfigError
from cqm.montecarlo import ExperimentConfig

__all__ = ["parse_text", "load_config", "loads_config", "format_config", "config_digest", "REQUIRED"]

REQUIRED = ("cycles",)
META_KEYS = ("digest", "tool_version", "uncalibrated")
META_PREFIXES = ("run.", "sweep.", "fit.")

_OPTIONAL_WORDS = {"none", "auto"}


def _int(s):
    return int(s, 0)


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _opt_float(s):
    return None if s.lower() in _OPTIONAL_WORDS else _float(s)


def _bool(s):
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true/false")


_TOP = {
    "cycles": _int,
    "seed": _int,
    "pair_rate": _float,
    "duration": _float,
    "input_theta": _float,
    "fiber_delay": _float,
    "detector_efficiency_trigger": _float,
    "detector_efficiency_qubit": _float,
    "dark_rate": _float,
    "bin_width": _float,
    "timing_jitter_sigma": _float,
    "analyzer_theta": _opt_float,
    "hist_start": _opt_float,
    "hist_end": _opt_float,
}
_MODEL = {f.name: _float for f in fields(CycleModel)}
_DRIVE = {
    "gd1_delay": _opt_float,
    "gd2_delay": _opt_float,
    "pulse_width": _float,
    "rise_time": _float,
    "fall_time": _float,
    "round_trip": _float,
    "armed": _bool,
}
SCHEMA = {**_TOP, **{f"cycle_model.{k}": v for k, v in _MODEL.items()},
          **{f"drive.{k}": v for k, v in _DRIVE.items()}}


def parse_text(text: str) -> dict[str, tuple[str, int]]:
    """Split a config file into ``{key: (raw_value, line_number)}``."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", line=lineno)
        if key in out:
            raise ConfigError(f"duplicate key (first on line {out[key][1]})", field=key, line=lineno)
        out[key] = (value, lineno)
    return out


def _is_meta(key):
    return key in META_KEYS or key.startswith(META_PREFIXES)


def loads_config(text: str) -> ExperimentConfig:
    entries = parse_text(text)
    for key in REQUIRED:
        if key not in entries:
            raise ConfigError("required field is missing", field=key)

    top, model, drive = {}, {}, {}
    for key, (raw, lineno) in entries.items():
        if _is_meta(key):
            continue
        conv = SCHEMA.get(key)
        if conv is None:
            raise ConfigError("unknown field", field=key, line=lineno)
        try:
            value = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value {raw!r} ({exc})", field=key, line=lineno) from None
        if key.startswith("cycle_model."):
            model[key.split(".", 1)[1]] = value
        elif key.startswith("drive."):
            drive[key.split(".", 1)[1]] = value
        else:
            top[key] = value

    try:
        cm = CycleModel(**model)
    except CQMError as exc:
        raise ConfigError(str(exc), field="cycle_model") from None
    try:
        dc = DriveConfig(**drive)
    except CQMError as exc:
        raise ConfigError(str(exc), field="drive") from None
    cfg = ExperimentConfig(cycle_model=cm, drive=dc, **top)

    if "digest" in entries:
        want, lineno = entries["digest"]
        if want != config_digest(cfg):
            raise ConfigError("digest does not match config contents", field="digest", line=lineno)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return loads_config(text)


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def config_items(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Every schema key with its canonical text value, sorted by key."""
    items = []
    for key in SCHEMA:
        if key.startswith("cycle_model."):
            v = getattr(cfg.cycle_model, key.split(".", 1)[1])
        elif key.startswith("drive."):
            v = getattr(cfg.drive, key.split(".", 1)[1])
        else:
            v = getattr(cfg, key)
        items.append((key, _fmt(v)))
    return sorted(items)


def format_config(cfg: ExperimentConfig, extra: list[tuple[str, str]] | None = None) -> str:
    lines = [f"{k} = {v}" for k, v in config_items(cfg)]
    lines += [f"{k} = {v}" for k, v in (extra or [])]
    return "\n".join(lines) + "\n"


def config_digest(cfg: ExperimentConfig) -> str:
    """sha256 over the canonical (sorted, normalized) rendering of the config."""
    return hashlib.sha256(format_config(cfg).encode("utf-8")).hexdigest()


def with_seed(cfg: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    return cfg if seed is None else replace(cfg, seed=seed)
