"""Run configuration: INI files with typed sections and strict keys.

A run file groups the physical parameters and the per-command settings:

    [system]
    kappa_i = 8.28
    kappa_ex = critical
    h = 4.9

    [sweep]
    detunings = 0 10 20 30 40 50 60
    g0m = 35 50 65

Every key has a documented default reproducing the reference parameter set
(kappa = 17.9, h = 4.9, gamma = 2.6, surface coupling 70, probe photon
number 0.3), so an empty or missing file is a valid configuration.  Unknown
sections or keys are rejected rather than ignored; a typo must not silently
fall back to a default.  kappa_ex accepts the string "critical" to track
sqrt(kappa_i^2 + h^2) whatever the other values are.

Command-line overrides arrive as "section.key=value" strings and go through
the same parsing and validation as file values.
"""

import configparser
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from . import transit
from .model import SystemParams

DEFAULT_SEED = 1234567

__all__ = ["ConfigError", "RunConfig", "SpectrumConfig", "EigenConfig",
           "DropConfig", "SweepConfig", "load_config", "DEFAULT_SEED"]


class ConfigError(Exception):
    """A configuration file or override that cannot be used."""


@dataclass(frozen=True)
class SpectrumConfig:
    delta_min: float = -150.0
    delta_max: float = 150.0
    points: int = 601


@dataclass(frozen=True)
class EigenConfig:
    delta_ac_min: float = -60.0
    delta_ac_max: float = 60.0
    points: int = 121
    frame: str = "cavity"


@dataclass(frozen=True)
class DropConfig:
    drops: int = 100
    c0: int = 6
    window_start_ms: float = 35.0
    window_stop_ms: float = 55.0
    histogram_start_ms: float = 40.0
    histogram_stop_ms: float = 50.0
    max_lag_us: float = 30.0
    rho_min: float = 45.0
    shell_depth_lb: float = 5.0


@dataclass(frozen=True)
class SweepConfig:
    detunings: tuple = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0)
    g0m: tuple = (50.0,)
    drops: int = 500
    c0: int = 6
    normalize: bool = True
    theory: bool = True
    averaging: str = "x-rho-t"
    rho_min: float = 45.0
    shell_depth_lb: float = 5.0
    rho_fixed: float | None = None


@dataclass(frozen=True)
class RunConfig:
    system: SystemParams
    geometry: geo.ModeGeometry
    cloud: transit.CloudParams
    chain: transit.DetectionChain
    nbar0: float
    spectrum: SpectrumConfig
    eigen: EigenConfig
    drop: DropConfig
    sweep: SweepConfig
    seed: int = DEFAULT_SEED
    out_dir: str = "."
    jobs: int = 1


def _parse_float(s):
    return float(s)


def _parse_int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"expected an integer, got {s!r}")
    return int(v)


def _parse_bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_complex(s):
    return complex(s.replace(" ", ""))


def _parse_float_list(s):
    vals = tuple(float(tok) for tok in s.replace(",", " ").split())
    if not vals:
        raise ValueError("empty list")
    return vals


def _parse_kappa_ex(s):
    if s.strip().lower() == "critical":
        return None
    return float(s)


def _parse_optional_float(s):
    if s.strip() == "":
        return None
    return float(s)


def _parse_str(s):
    return s.strip()


# section -> key -> (parser, default); defaults live in the dataclasses,
# None here means "leave the dataclass default alone"
_SCHEMA = {
    "system": {
        "kappa_i": _parse_float,
        "kappa_ex": _parse_kappa_ex,
        "h": _parse_float,
        "gamma": _parse_float,
        "delta": _parse_float,
        "delta_a": _parse_float,
        "g_tw": _parse_complex,
    },
    "geometry": {
        "major_diameter": _parse_float,
        "minor_diameter": _parse_float,
        "wavelength": _parse_float,
        "w_z": _parse_float,
        "g0_surface": _parse_float,
    },
    "cloud": {
        "drop_height": _parse_float,
        "cloud_fwhm": _parse_float,
        "temperature": _parse_float,
        "mean_transits_per_drop": _parse_float,
        "atom_count": _parse_float,
    },
    "detection": {
        "xi": _parse_float,
        "qe": _parse_float,
        "dark_rate": _parse_float,
        "dead_time": _parse_float,
        "bin_dt": _parse_float,
        "c_max": _parse_float,
        "background_mean": _parse_float,
        "background_drift": _parse_float,
        "drift_time_ms": _parse_float,
        "nbar0": _parse_float,
    },
    "spectrum": {
        "delta_min": _parse_float,
        "delta_max": _parse_float,
        "points": _parse_int,
    },
    "eigen": {
        "delta_ac_min": _parse_float,
        "delta_ac_max": _parse_float,
        "points": _parse_int,
        "frame": _parse_str,
    },
    "drop": {
        "drops": _parse_int,
        "c0": _parse_int,
        "window_start_ms": _parse_float,
        "window_stop_ms": _parse_float,
        "histogram_start_ms": _parse_float,
        "histogram_stop_ms": _parse_float,
        "max_lag_us": _parse_float,
        "rho_min": _parse_float,
        "shell_depth_lb": _parse_float,
    },
    "sweep": {
        "detunings": _parse_float_list,
        "g0m": _parse_float_list,
        "drops": _parse_int,
        "c0": _parse_int,
        "normalize": _parse_bool,
        "theory": _parse_bool,
        "averaging": _parse_str,
        "rho_min": _parse_float,
        "shell_depth_lb": _parse_float,
        "rho_fixed": _parse_optional_float,
    },
    "run": {
        "seed": _parse_int,
        "out_dir": _parse_str,
        "jobs": _parse_int,
    },
}

# dataclass field names where they differ from the config key
_FIELD_NAMES = {("system", "delta_a"): "delta_A"}


def _read_file(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                       interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    table = {}
    for section in parser.sections():
        table[section.lower()] = {
            k.lower(): v for k, v in parser[section].items()}
    return table


def _apply_overrides(table, overrides):
    for item in overrides or ():
        head, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not section.key=value")
        section, dot, key = head.strip().partition(".")
        if not dot or not key:
            raise ConfigError(f"override {item!r} is not section.key=value")
        table.setdefault(section.strip().lower(), {})[key.strip().lower()] = \
            value.strip()
    return table


def _typed(table):
    values = {}
    for section, entries in table.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]; known: "
                              f"{', '.join(sorted(_SCHEMA))}")
        for key, raw in entries.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key {key!r} in [{section}]; known: "
                    f"{', '.join(sorted(_SCHEMA[section]))}")
            try:
                values[(section, key)] = _SCHEMA[section][key](raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(
                    f"[{section}] {key} = {raw!r}: {exc}") from None
    return values


def _build(cls, values, section, **extra):
    kwargs = dict(extra)
    for (sec, key), val in values.items():
        if sec == section:
            kwargs[_FIELD_NAMES.get((sec, key), key)] = val
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def load_config(path=None, overrides=None) -> RunConfig:
    """Parse a config file plus overrides into a validated RunConfig.

    path=None starts from pure defaults.  Every domain invariant violation
    (negative rates, bad windows, unknown averaging) surfaces as
    ConfigError before any command runs.
    """
    table = _read_file(path) if path is not None else {}
    table = _apply_overrides(table, overrides)
    values = _typed(table)

    nbar0 = values.pop(("detection", "nbar0"), 0.3)
    if nbar0 <= 0:
        raise ConfigError("[detection] nbar0 must be positive")

    system = _build(SystemParams, values, "system")
    geometry = _build(geo.ModeGeometry, values, "geometry")
    cloud = _build(transit.CloudParams, values, "cloud")
    chain = _build(transit.DetectionChain, values, "detection")
    spectrum = _build(SpectrumConfig, values, "spectrum")
    eigen = _build(EigenConfig, values, "eigen")
    drop = _build(DropConfig, values, "drop")
    sweep = _build(SweepConfig, values, "sweep")

    if spectrum.points < 2 or spectrum.delta_max <= spectrum.delta_min:
        raise ConfigError("[spectrum]: need points >= 2 and delta_max > delta_min")
    if eigen.points < 2 or eigen.delta_ac_max <= eigen.delta_ac_min:
        raise ConfigError("[eigen]: need points >= 2 and a proper grid range")
    if eigen.frame not in ("cavity", "probe"):
        raise ConfigError(f"[eigen]: unknown frame {eigen.frame!r}")
    if drop.drops < 1 or drop.c0 < 1:
        raise ConfigError("[drop]: drops and c0 must be at least 1")
    if drop.window_stop_ms <= drop.window_start_ms:
        raise ConfigError("[drop]: empty observation window")
    if not (drop.window_start_ms <= drop.histogram_start_ms
            < drop.histogram_stop_ms <= drop.window_stop_ms):
        raise ConfigError("[drop]: histogram window must lie inside the "
                          "observation window")
    if drop.max_lag_us <= 0:
        raise ConfigError("[drop]: max_lag_us must be positive")
    if sweep.drops < 1 or sweep.c0 < 1:
        raise ConfigError("[sweep]: drops and c0 must be at least 1")
    if np.any(np.abs(sweep.detunings) > 200.0):
        raise ConfigError("[sweep]: detunings beyond +-200 MHz are outside "
                          "the model's regime")
    if any(g < 0 for g in sweep.g0m):
        raise ConfigError("[sweep]: g0m values must be non-negative")
    if sweep.averaging not in ("x-only", "x-rho-t"):
        raise ConfigError(f"[sweep]: unknown averaging {sweep.averaging!r}")

    seed = values.get(("run", "seed"), DEFAULT_SEED)
    out_dir = values.get(("run", "out_dir"), ".")
    jobs = values.get(("run", "jobs"), 1)
    if jobs < 1:
        raise ConfigError("[run]: jobs must be at least 1")

    return RunConfig(system=system, geometry=geometry, cloud=cloud,
                     chain=chain, nbar0=nbar0, spectrum=spectrum, eigen=eigen,
                     drop=drop, sweep=sweep, seed=seed, out_dir=out_dir,
                     jobs=jobs)
