"""INI-style run configuration with strict keys and explicit units.

Frequencies are plain MHz (``*_mhz`` keys, converted to rad/s). Times carry
a unit suffix (``28 ns``, ``0.8 us``) and count rates a rate suffix
(``6.5 kcps``, ``18.1 Mcps``). Every readout window is its own section
named ``[readout.<label>]``.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from importlib import resources

from .counting import DetectorModel
from .liouville import HilbertSpec
from .protocol import PumpModel
from .qed import MHZ, SystemParams

TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9, "ps": 1e-12}
RATE_UNITS = {"cps": 1.0, "kcps": 1e3, "mcps": 1e6, "/s": 1.0, "/ms": 1e3, "/us": 1e6}

_QUANTITY = re.compile(r"^\s*([-+0-9.eE]+)\s*([^\s0-9].*)?$")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""


SCHEMA = {
    "system": {"g_mhz", "cooperativity", "kappa_mhz", "gamma_mhz",
               "delta_a_mhz", "delta_c_mhz", "omega_mhz"},
    "hilbert": {"n_fock"},
    "detector": {"efficiency", "dead_time", "background_rate"},
    "readout": {"duration", "detected_rate", "bright_rate", "calibrate_rc", "omega_mhz",
                "delta_a_mhz", "delta_c_mhz", "depump_rate", "survival"},
    "pump": {"tau", "r"},
    "protocol": {"total_pump_time", "readout_time", "n_segments", "n_max",
                 "initial_state", "n_trials"},
    "decay": {"t_max", "n_points", "window_start"},
    "scan": {"span_mhz", "step_mhz", "mode"},
    "run": {"seed", "workers", "n_trials"},
}


def _number(path, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{path}: expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{path}: value must be finite")
    return value


def _integer(path, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{path}: expected an integer, got {text!r}") from None


def _quantity(path, text, units, what):
    m = _QUANTITY.match(text)
    if not m or not m.group(2):
        raise ConfigError(f"{path}: {what} needs a unit suffix ({', '.join(sorted(units))}), got {text!r}")
    unit = m.group(2).strip()
    factor = units.get(unit, units.get(unit.lower()))
    if factor is None:
        raise ConfigError(f"{path}: unknown unit {unit!r}")
    return _number(path, m.group(1)) * factor


def parse_time(path, text):
    return _quantity(path, text, TIME_UNITS, "time")


def parse_rate(path, text):
    return _quantity(path, text, RATE_UNITS, "rate")


@dataclass
class ReadoutSpec:
    """One ``[readout.<label>]`` section, before composition with the QED model."""

    label: str
    duration: float
    detected_rate: float | None = None
    bright_rate: float | None = None
    calibrate_rc: float | None = None
    omega: float | None = None
    delta_a: float | None = None
    delta_c: float | None = None
    depump_rate: float = 0.0
    survival: float | None = None


@dataclass
class ProtocolSpec:
    total_pump_time: float
    readout_time: float
    n_segments: int | None = None
    n_max: int = 20
    initial_state: tuple = (1.0, 0.0)
    n_trials: int = 100_000


@dataclass
class DecaySpec:
    t_max: float = 15e-9
    n_points: int = 601
    window_start: float | None = None  # None means: start at the flux maximum


@dataclass
class ScanSpec:
    span: float = 200 * MHZ
    step: float = 0.25 * MHZ
    mode: str = "atom"


@dataclass
class RunConfig:
    system: SystemParams
    hilbert: HilbertSpec = field(default_factory=HilbertSpec)
    detector: DetectorModel = field(default_factory=DetectorModel)
    readout: list = field(default_factory=list)
    pump: PumpModel | None = None
    protocol: ProtocolSpec | None = None
    decay: DecaySpec = field(default_factory=DecaySpec)
    scan: ScanSpec = field(default_factory=ScanSpec)
    seed: int = 0
    workers: int = 1
    n_trials: int = 1_000_000

    def pump_model(self) -> PumpModel:
        if self.pump is not None:
            return self.pump
        if self.protocol is None:
            raise ConfigError("pump: no [pump] section and no [protocol] to derive tau from")
        return PumpModel.for_residual(self.protocol.total_pump_time)


def _check_keys(parser):
    for section in parser.sections():
        kind = section.split(".", 1)[0]
        if kind not in SCHEMA or (kind == "readout") != ("." in section):
            raise ConfigError(f"{section}: unknown section")
        for key in parser[section]:
            if key not in SCHEMA[kind]:
                raise ConfigError(f"{section}.{key}: unknown key")


def _wrap(path, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def loads(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"<file>: {exc}") from None
    _check_keys(parser)

    if "system" not in parser:
        raise ConfigError("system: section is required")
    sys_ = parser["system"]
    for key in ("kappa_mhz", "gamma_mhz"):
        if key not in sys_:
            raise ConfigError(f"system.{key}: required")
    num = {k: _number(f"system.{k}", v) for k, v in sys_.items()}
    if ("g_mhz" in num) == ("cooperativity" in num):
        raise ConfigError("system.g_mhz: give exactly one of g_mhz or cooperativity")
    extra = {k: num.get(f"{k}_mhz", 0.0) * MHZ for k in ("delta_a", "delta_c", "omega")}
    kappa, gamma = num["kappa_mhz"] * MHZ, num["gamma_mhz"] * MHZ
    if "g_mhz" in num:
        system = _wrap("system", SystemParams, num["g_mhz"] * MHZ, kappa, gamma,
                       extra["delta_a"], extra["delta_c"], extra["omega"])
    else:
        system = _wrap("system", SystemParams.with_cooperativity, num["cooperativity"],
                       kappa, gamma, **extra)
    cfg = RunConfig(system=system)

    if "hilbert" in parser and "n_fock" in parser["hilbert"]:
        cfg.hilbert = _wrap("hilbert.n_fock", HilbertSpec,
                            _integer("hilbert.n_fock", parser["hilbert"]["n_fock"]))

    if "detector" in parser:
        d = parser["detector"]
        cfg.detector = _wrap(
            "detector", DetectorModel,
            _number("detector.efficiency", d["efficiency"]) if "efficiency" in d else 1.0,
            parse_time("detector.dead_time", d["dead_time"]) if "dead_time" in d else 0.0,
            parse_rate("detector.background_rate", d["background_rate"]) if "background_rate" in d else 0.0,
        )

    for section in parser.sections():
        if not section.startswith("readout."):
            continue
        s = parser[section]
        if "duration" not in s:
            raise ConfigError(f"{section}.duration: required")
        spec = ReadoutSpec(section.split(".", 1)[1], parse_time(f"{section}.duration", s["duration"]))
        for key in ("detected_rate", "bright_rate", "calibrate_rc", "depump_rate"):
            if key in s:
                setattr(spec, key, parse_rate(f"{section}.{key}", s[key]))
        for key in ("omega", "delta_a", "delta_c"):
            if f"{key}_mhz" in s:
                setattr(spec, key, _number(f"{section}.{key}_mhz", s[f"{key}_mhz"]) * MHZ)
        if "survival" in s:
            spec.survival = _number(f"{section}.survival", s["survival"])
            if not 0 <= spec.survival <= 1:
                raise ConfigError(f"{section}.survival: must lie in [0, 1]")
        if spec.duration <= 0:
            raise ConfigError(f"{section}.duration: must be positive")
        if spec.calibrate_rc is not None and spec.omega is not None:
            raise ConfigError(f"{section}.calibrate_rc: conflicts with omega_mhz")
        cfg.readout.append(spec)

    if "protocol" in parser:
        p = parser["protocol"]
        for key in ("total_pump_time", "readout_time"):
            if key not in p:
                raise ConfigError(f"protocol.{key}: required")
        spec = ProtocolSpec(parse_time("protocol.total_pump_time", p["total_pump_time"]),
                            parse_time("protocol.readout_time", p["readout_time"]))
        if "n_segments" in p:
            spec.n_segments = _integer("protocol.n_segments", p["n_segments"])
        if "n_max" in p:
            spec.n_max = _integer("protocol.n_max", p["n_max"])
            if spec.n_max < 1:
                raise ConfigError("protocol.n_max: must be >= 1")
        if "n_trials" in p:
            spec.n_trials = _integer("protocol.n_trials", p["n_trials"])
        if "initial_state" in p:
            parts = [x for x in re.split(r"[,\s]+", p["initial_state"].strip()) if x]
            if len(parts) != 2:
                raise ConfigError("protocol.initial_state: expected two numbers 'p_initial, p_target'")
            spec.initial_state = tuple(_number("protocol.initial_state", x) for x in parts)
        cfg.protocol = spec

    if "pump" in parser:
        p = parser["pump"]
        r = _number("pump.r", p["r"]) if "r" in p else 0.0
        if "tau" in p:
            cfg.pump = _wrap("pump", PumpModel, parse_time("pump.tau", p["tau"]), r)
        elif cfg.protocol is not None:
            cfg.pump = _wrap("pump", PumpModel.for_residual, cfg.protocol.total_pump_time, 1e-3, r)
        else:
            raise ConfigError("pump.tau: required when there is no [protocol] section")

    if "decay" in parser:
        d = parser["decay"]
        if "t_max" in d:
            cfg.decay.t_max = parse_time("decay.t_max", d["t_max"])
        if "n_points" in d:
            cfg.decay.n_points = _integer("decay.n_points", d["n_points"])
        if "window_start" in d and d["window_start"].strip().lower() != "peak":
            cfg.decay.window_start = parse_time("decay.window_start", d["window_start"])

    if "scan" in parser:
        s = parser["scan"]
        if "span_mhz" in s:
            cfg.scan.span = _number("scan.span_mhz", s["span_mhz"]) * MHZ
        if "step_mhz" in s:
            cfg.scan.step = _number("scan.step_mhz", s["step_mhz"]) * MHZ
        if "mode" in s:
            cfg.scan.mode = s["mode"].strip()
            if cfg.scan.mode not in ("atom", "common"):
                raise ConfigError("scan.mode: expected 'atom' or 'common'")
        if cfg.scan.step <= 0 or cfg.scan.span <= 0:
            raise ConfigError("scan.step_mhz: span and step must be positive")

    if "run" in parser:
        r = parser["run"]
        if "seed" in r:
            cfg.seed = _integer("run.seed", r["seed"])
        if "workers" in r:
            cfg.workers = _integer("run.workers", r["workers"])
        if "n_trials" in r:
            cfg.n_trials = _integer("run.n_trials", r["n_trials"])
    return cfg


def load(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def published_config_text() -> str:
    """Bundled configuration with the experiment's published parameters."""
    return resources.files("purcell_readout").joinpath("published.ini").read_text(encoding="utf-8")
