"""Strict TOML experiment files.

A file holds either named scenarios::

    [scenario.moving]
    data_rate = 1e9
    rx_speed = 1.0
    tracking = true

or one sweep::

    [sweep]
    name = "speed"
    rx_speed = [0.5, 1.0, 1.5]
    data_rate = [1e9]
    tracking = [true, false]

plus optional shared ``[control]``, ``[link]``, ``[optics]``, ``[pipeline]``
and ``[output]`` tables. A scenario may also carry its own nested tables of
the same names, and either an ``ascr`` target (calibrated on load) or an
explicit ``[scenario.<name>.wave]`` table. Unknown keys are errors.
"""
from __future__ import annotations

import dataclasses
import itertools
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .control import ControlParams
from .engine import ScenarioConfig
from .geometry import OpticalConstants
from .imaging import PipelineConfig
from .link import LinkConfig
from .waves import FRAME_RATE, WaveParams, ascr_from_offsets, calibrate_wave, simulate_offsets

__all__ = [
    "ConfigError",
    "ScenarioEntry",
    "ExperimentSpec",
    "load_spec",
    "parse_spec",
    "resolve_wave",
    "SEED_POLICIES",
    "MAX_SEED",
]

MAX_SEED = 2 ** 64 - 1
SEED_POLICIES = ("fixed", "per_row")

_TABLES = {
    "control": ControlParams,
    "link": LinkConfig,
    "optics": OpticalConstants,
    "pipeline": PipelineConfig,
}
# scalar ScenarioConfig fields settable from a file
_SCALARS = ("data_rate", "duration", "rx_speed", "tracking", "cycle_period", "substep",
            "seed", "rail_range", "lever", "exposure_mid", "settle", "mirror_limit",
            "camera_spot_sigma", "camera_peak", "camera_scale")
_AXES = ("ascr", "rx_speed", "data_rate", "tracking")


class ConfigError(ValueError):
    """Bad experiment file. ``where`` names the offending key path."""

    def __init__(self, where: str, msg: str):
        self.where = where
        super().__init__(f"{where}: {msg}" if where else msg)


@dataclass(frozen=True)
class ScenarioEntry:
    name: str
    config: ScenarioConfig
    ascr: float           # target (or measured, for explicit waves); 0 without a wave


@dataclass
class ExperimentSpec:
    scenarios: list[ScenarioEntry]
    metrics_path: str | None = None
    trace: bool = False
    frames_dir: str | None = None
    seed_policy: str = "fixed"
    workers: int = 1
    axes: dict = field(default_factory=dict)


def _kind(default):
    if isinstance(default, bool):
        return bool
    if isinstance(default, int):
        return int
    if isinstance(default, float) or default is None:
        return float
    if isinstance(default, str):
        return str
    return None


def _coerce(where: str, value, kind, optional=False):
    if value is None and optional:
        return None
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(where, f"expected true/false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(where, f"expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(where, f"expected a number, got {value!r}")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(where, f"expected a string, got {value!r}")
        return value
    raise ConfigError(where, "unsupported value")


def _defaults(cls):
    out = {}
    for f in dataclasses.fields(cls):
        if f.default is not dataclasses.MISSING:
            out[f.name] = f.default
        elif f.default_factory is not dataclasses.MISSING:
            out[f.name] = f.default_factory()
    return out


def _build(cls, table, where: str, base=None):
    if not isinstance(table, dict):
        raise ConfigError(where, "expected a table")
    defaults = _defaults(cls)
    kwargs = {}
    for key, value in table.items():
        if key not in defaults:
            raise ConfigError(f"{where}.{key}", "unknown key")
        kind = _kind(defaults[key])
        kwargs[key] = _coerce(f"{where}.{key}", value, kind, optional=defaults[key] is None)
    try:
        if base is not None:
            return dataclasses.replace(base, **kwargs)
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(where, str(exc)) from None


@lru_cache(maxsize=32)
def resolve_wave(target: float, optics: OpticalConstants = OpticalConstants()) -> WaveParams | None:
    """Calibrated wave for an ASCR target; None for a still surface."""
    if target == 0:
        return None
    return calibrate_wave(target, optics=optics)


def _measured_ascr(wave: WaveParams, optics: OpticalConstants) -> float:
    _, d_x, d_y = simulate_offsets(wave, optics)
    return ascr_from_offsets(d_x, d_y, 1.0 / FRAME_RATE, optics).ascr


def _shared(doc: dict) -> dict:
    out = {}
    for key, cls in _TABLES.items():
        if key in doc:
            out[key] = _build(cls, doc[key], key)
    return out


def _scenario(name: str, table: dict, shared: dict, where: str) -> ScenarioEntry:
    if not isinstance(table, dict):
        raise ConfigError(where, "expected a table")
    allowed = set(_SCALARS) | set(_TABLES) | {"ascr", "wave"}
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}", "unknown key")
    if "data_rate" not in table:
        raise ConfigError(f"{where}.data_rate", "missing required field")
    defaults = _defaults(ScenarioConfig)
    kwargs = {}
    for key in _SCALARS:
        if key in table:
            kind = _kind(defaults[key]) if key in defaults else float
            kwargs[key] = _coerce(f"{where}.{key}", table[key], kind)
    if "seed" in kwargs and not 0 <= kwargs["seed"] <= MAX_SEED:
        raise ConfigError(f"{where}.seed", "must lie in [0, 2**64 - 1]")
    for key, cls in _TABLES.items():
        base = shared.get(key)
        if key in table:
            kwargs[key] = _build(cls, table[key], f"{where}.{key}", base)
        elif base is not None:
            kwargs[key] = base
    if "ascr" in table and "wave" in table:
        raise ConfigError(f"{where}.ascr", "give either ascr or a wave table, not both")
    optics = kwargs.get("optics", OpticalConstants())
    ascr = 0.0
    if "ascr" in table:
        ascr = _coerce(f"{where}.ascr", table["ascr"], float)
        if ascr < 0:
            raise ConfigError(f"{where}.ascr", "must be non-negative")
        try:
            kwargs["wave"] = resolve_wave(ascr, optics)
        except ValueError as exc:
            raise ConfigError(f"{where}.ascr", str(exc)) from None
    elif "wave" in table:
        wave = _build(WaveParams, table["wave"], f"{where}.wave")
        kwargs["wave"] = wave
        ascr = _measured_ascr(wave, optics) if wave.peak_slope > 0 else 0.0
    try:
        cfg = ScenarioConfig(name=name, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(where, str(exc)) from None
    return ScenarioEntry(name, cfg, ascr)


def _axis(where: str, values, kind):
    if not isinstance(values, list):
        values = [values]
    if not values:
        raise ConfigError(where, "sweep axis must not be empty")
    return [_coerce(f"{where}[{i}]", v, kind) for i, v in enumerate(values)]


def _sweep(table: dict, shared: dict) -> tuple[list[ScenarioEntry], dict]:
    allowed = set(_AXES) | {"name", "duration", "seed", "cycle_period", "substep"}
    for key in table:
        if key not in allowed:
            raise ConfigError(f"sweep.{key}", "unknown key")
    if "data_rate" not in table:
        raise ConfigError("sweep.data_rate", "missing required field")
    name = _coerce("sweep.name", table.get("name", "sweep"), str)
    axes = {
        "ascr": _axis("sweep.ascr", table.get("ascr", [0.0]), float),
        "rx_speed": _axis("sweep.rx_speed", table.get("rx_speed", [0.0]), float),
        "data_rate": _axis("sweep.data_rate", table["data_rate"], float),
        "tracking": _axis("sweep.tracking", table.get("tracking", [True, False]), bool),
    }
    fixed = {k: table[k] for k in ("duration", "seed", "cycle_period", "substep") if k in table}
    entries = []
    for ascr, speed, rate, tracking in itertools.product(*axes.values()):
        row = dict(fixed, ascr=ascr, rx_speed=speed, data_rate=rate, tracking=tracking)
        label = (f"{name}_a{ascr:g}_v{speed:g}_r{rate:g}_{'on' if tracking else 'off'}")
        entries.append(_scenario(label, row, shared, "sweep"))
    names = [e.name for e in entries]
    if len(set(names)) != len(names):
        raise ConfigError("sweep", "axis values repeat, row names collide")
    return entries, axes


def parse_spec(doc: dict) -> ExperimentSpec:
    allowed = {"scenario", "sweep", "output"} | set(_TABLES)
    for key in doc:
        if key not in allowed:
            raise ConfigError(key, "unknown key")
    if ("scenario" in doc) == ("sweep" in doc):
        raise ConfigError("", "a file needs exactly one of [scenario.<name>] or [sweep]")
    shared = _shared(doc)
    spec = ExperimentSpec(scenarios=[])
    out = doc.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("output", "expected a table")
    for key, value in out.items():
        where = f"output.{key}"
        if key == "metrics":
            spec.metrics_path = _coerce(where, value, str)
        elif key == "trace":
            spec.trace = _coerce(where, value, bool)
        elif key == "frames":
            spec.frames_dir = _coerce(where, value, str)
        elif key == "seed_policy":
            spec.seed_policy = _coerce(where, value, str)
            if spec.seed_policy not in SEED_POLICIES:
                raise ConfigError(where, f"must be one of {SEED_POLICIES}")
        elif key == "workers":
            spec.workers = _coerce(where, value, int)
            if spec.workers < 1:
                raise ConfigError(where, "must be at least 1")
        else:
            raise ConfigError(where, "unknown key")
    if "scenario" in doc:
        scen = doc["scenario"]
        if not isinstance(scen, dict) or not scen:
            raise ConfigError("scenario", "expected at least one [scenario.<name>] table")
        for name, table in scen.items():
            spec.scenarios.append(_scenario(name, table, shared, f"scenario.{name}"))
    else:
        if not isinstance(doc["sweep"], dict):
            raise ConfigError("sweep", "expected a table")
        spec.scenarios, spec.axes = _sweep(doc["sweep"], shared)
    return spec


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigError(str(path), str(exc)) from None
    return parse_spec(doc)
