"""Experiment configuration: TOML with unit-tagged quantities.

Dimensional values are strings carrying their unit, e.g. ``"43 dBm"``,
``"6 dBi"``, ``"2.4 GHz"``, ``"15 m"``. Plain numbers are accepted only for
dimensionless fields (and for antenna gains, read as linear). Unknown
sections and keys are rejected.
"""
from __future__ import annotations

import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import PhyConfig, thermal_noise, wavelength
from .errors import ConfigError, DomainError
from .learning import LearnerConfig, SinrQuantizer
from .sim import DEFAULT_SLOTS, DEFAULT_THRESHOLD, DEFAULT_WINDOW, Setting, StrategySpec
from .stackelberg import GameParams

CONFIG_ENV_VAR = "BACKSCATTER_GAME_CONFIG"

POWER_UNITS = {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "nW": 1e-9}
LENGTH_UNITS = {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "km": 1e3}
FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]+)\s*$")

DEFAULT_TOML = """\
# Default experiment: the reference link, prices and learning setup.

[phy]
p_hap = "43 dBm"
delta = 0.5
g_t = "6 dBi"
g_r = "6 dBi"
g_j = "1.8 dBi"
freq_hap = "2.4 GHz"
freq_j = "2.4 GHz"
d_hap = "15 m"
d_j = "20 m"
gamma0 = 1.0
gamma1 = -1.0
n0 = "thermal"

[game]
kappa = 1.0
w = "1 MHz"
c_phi = 0.1
c_j = 0.1
p_j_max = "30 dBm"
phi_max = 1.0
k = 10
m = 10

[learner]
beta = 0.5
gamma = 0.8
epsilon = 0.05
seed = 0
rng = "PCG64"
sinr_levels = 8
sinr_min = "-10 dB"
sinr_max = "40 dB"
hotboot_realizations = 20
hotboot_slots = 500
hotboot_reduction = "sequential"
hotboot_perturb = 0.0

[user]
kind = "q-learning"

[jammer]
kind = "best-response-oracle"

[run]
slots = 2000
seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
window = 100
threshold = 0.9

[sweep]
user = ["q-learning", "hotboot-q", "random", { kind = "fixed", value = 0.5 }, "equilibrium-oracle"]
"""

SCHEMA = {
    "phy": {"p_hap", "delta", "g_t", "g_r", "g_j", "freq_hap", "freq_j", "lambda_hap", "lambda_j",
            "d_hap", "d_j", "gamma0", "gamma1", "n0"},
    "game": {"kappa", "w", "c_phi", "c_j", "p_j_max", "phi_max", "k", "m"},
    "learner": {"beta", "gamma", "epsilon", "seed", "rng", "sinr_levels", "sinr_min", "sinr_max",
                "hotboot_realizations", "hotboot_slots", "hotboot_reduction", "hotboot_perturb"},
    "user": {"kind", "value", "cache"},
    "jammer": {"kind", "value"},
    "run": {"slots", "seeds", "window", "threshold"},
    "sweep": {"user"},
}


@dataclass
class RunSettings:
    slots: int = DEFAULT_SLOTS
    seeds: tuple[int, ...] = tuple(range(10))
    window: int = DEFAULT_WINDOW
    threshold: float = DEFAULT_THRESHOLD


@dataclass
class HotbootSettings:
    realizations: int = 20
    slots: int = 500
    reduction: str = "sequential"
    perturb: float = 0.0


@dataclass
class ExperimentConfig:
    setting: Setting = field(default_factory=Setting)
    user: StrategySpec = field(default_factory=lambda: StrategySpec("q-learning"))
    jammer: StrategySpec = field(default_factory=lambda: StrategySpec("best-response-oracle"))
    run: RunSettings = field(default_factory=RunSettings)
    hotboot: HotbootSettings = field(default_factory=HotbootSettings)
    sweep_user: tuple[StrategySpec, ...] = ()


class _Source:
    """Raw TOML document plus enough of the text to point at lines."""

    def __init__(self, text: str, name: str):
        self.text = text
        self.name = name
        try:
            self.data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{name}: {exc}") from exc

    def line_of(self, section: str, key: str | None = None) -> int | None:
        current = None
        for i, raw in enumerate(self.text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            m = re.match(r"^\[+\s*([\w.]+)\s*\]+$", line)
            if m:
                current = m.group(1)
                if key is None and current == section:
                    return i
                continue
            if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", line):
                return i
        return None

    def error(self, section: str, key: str | None, message: str) -> ConfigError:
        full = f"{section}.{key}" if key else section
        return ConfigError(message, key=full, line=self.line_of(section, key))


def parse_quantity(value, units: dict[str, float], *, db_units=(), allow_bare=False) -> float:
    """Convert a unit-tagged value to SI. ``db_units`` maps dB-style tags to converters."""
    if isinstance(value, bool):
        raise ValueError("expected a number or a quantity string")
    if isinstance(value, (int, float)):
        if allow_bare:
            return float(value)
        raise ValueError(f"needs an explicit unit tag, one of {sorted(units) + list(dict(db_units))}")
    if not isinstance(value, str):
        raise ValueError("expected a quantity string such as \"15 m\"")
    m = _QUANTITY.match(value)
    if not m:
        raise ValueError(f"cannot parse quantity {value!r}")
    number, unit = float(m.group(1)), m.group(2)
    converters = dict(db_units)
    if unit in converters:
        return converters[unit](number)
    if unit in units:
        return number * units[unit]
    raise ValueError(f"unknown unit {unit!r}; expected one of {sorted(units) + list(converters)}")


def _dbm(x):
    return 10.0 ** ((x - 30.0) / 10.0)


def _dbw(x):
    return 10.0 ** (x / 10.0)


POWER_DB = (("dBm", _dbm), ("dBW", _dbw))
GAIN_DB = (("dBi", _dbw), ("dB", _dbw))


def _number(src: _Source, section: str, key: str, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise src.error(section, key, "expected a plain number")
    if integer and not isinstance(value, int):
        raise src.error(section, key, "expected an integer")
    if not integer and not math.isfinite(value):
        raise src.error(section, key, "expected a finite number")
    return value if integer else float(value)


def _strategy(src: _Source, section: str, key: str | None, raw) -> StrategySpec:
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict):
        raise src.error(section, key, "strategy must be a kind name or a table")
    unknown = set(raw) - {"kind", "value", "cache"}
    if unknown:
        raise src.error(section, key or sorted(unknown)[0], f"unknown strategy key(s) {sorted(unknown)}")
    if "kind" not in raw:
        raise src.error(section, key, "strategy needs a `kind`")
    value = raw.get("value")
    if value is not None and section == "jammer":
        try:
            value = parse_quantity(value, POWER_UNITS, db_units=POWER_DB)
        except ValueError as exc:
            raise src.error(section, "value", str(exc)) from exc
    elif value is not None:
        value = _number(src, section, key or "value", value)
    return StrategySpec(kind=raw["kind"], value=value, cache_path=raw.get("cache"))


def _build(src: _Source) -> ExperimentConfig:
    data = src.data
    for section, body in data.items():
        if section not in SCHEMA:
            raise src.error(section, None, f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise src.error(section, None, "expected a table")
        for key in body:
            if key not in SCHEMA[section]:
                raise src.error(section, key, "unknown key")

    def get(section, key, default=None):
        return data.get(section, {}).get(key, default)

    def quantity(section, key, units, default, **kw):
        raw = get(section, key)
        if raw is None:
            return default
        try:
            return parse_quantity(raw, units, **kw)
        except ValueError as exc:
            raise src.error(section, key, str(exc)) from exc

    def number(section, key, default, integer=False):
        raw = get(section, key)
        return default if raw is None else _number(src, section, key, raw, integer)

    # game first: the thermal noise default depends on the bandwidth
    dg = GameParams()
    game_kw = {
        "kappa": number("game", "kappa", dg.kappa),
        "w": quantity("game", "w", FREQ_UNITS, dg.w),
        "c_phi": number("game", "c_phi", dg.c_phi),
        "c_j": number("game", "c_j", dg.c_j),
        "p_j_max": quantity("game", "p_j_max", POWER_UNITS, dg.p_j_max, db_units=POWER_DB),
        "phi_max": number("game", "phi_max", dg.phi_max),
        "k": number("game", "k", dg.k, integer=True),
        "m": number("game", "m", dg.m, integer=True),
    }
    try:
        game = GameParams(**game_kw)
    except DomainError as exc:
        raise src.error("game", exc.field, str(exc)) from exc

    dp = PhyConfig()
    gain = dict(units={"linear": 1.0}, db_units=GAIN_DB, allow_bare=True)
    phy_keys = {}
    phy_kw = {
        "p_hap": quantity("phy", "p_hap", POWER_UNITS, dp.p_hap, db_units=POWER_DB),
        "delta": number("phy", "delta", dp.delta),
        "g_t": quantity("phy", "g_t", default=dp.g_t, **gain),
        "g_r": quantity("phy", "g_r", default=dp.g_r, **gain),
        "g_j": quantity("phy", "g_j", default=dp.g_j, **gain),
        "d_hap": quantity("phy", "d_hap", LENGTH_UNITS, dp.d_hap),
        "d_j": quantity("phy", "d_j", LENGTH_UNITS, dp.d_j),
        "gamma0": number("phy", "gamma0", dp.gamma0),
        "gamma1": number("phy", "gamma1", dp.gamma1),
    }
    for link in ("hap", "j"):
        lam_key, f_key = f"lambda_{link}", f"freq_{link}"
        if get("phy", lam_key) is not None and get("phy", f_key) is not None:
            raise src.error("phy", lam_key, f"give either {lam_key} or {f_key}, not both")
        if get("phy", f_key) is not None:
            freq = quantity("phy", f_key, FREQ_UNITS, None)
            if not freq > 0:
                raise src.error("phy", f_key, "frequency must be > 0")
            phy_kw[lam_key] = wavelength(freq)
            phy_keys[lam_key] = f_key
        else:
            phy_kw[lam_key] = quantity("phy", lam_key, LENGTH_UNITS, getattr(dp, lam_key))
    n0_raw = get("phy", "n0", "thermal")
    phy_kw["n0"] = (thermal_noise(game.w) if n0_raw == "thermal"
                    else quantity("phy", "n0", POWER_UNITS, None, db_units=POWER_DB))
    try:
        phy = PhyConfig(**phy_kw)
    except DomainError as exc:
        raise src.error("phy", phy_keys.get(exc.field, exc.field), str(exc)) from exc

    dl = LearnerConfig()
    try:
        learner = LearnerConfig(
            beta=number("learner", "beta", dl.beta),
            gamma=number("learner", "gamma", dl.gamma),
            epsilon=number("learner", "epsilon", dl.epsilon),
            seed=number("learner", "seed", dl.seed, integer=True),
            rng=get("learner", "rng", dl.rng),
        )
    except ConfigError as exc:
        raise src.error("learner", exc.key, str(exc)) from exc
    levels = number("learner", "sinr_levels", 8, integer=True)
    if levels < 2:
        raise src.error("learner", "sinr_levels", "need at least 2 SINR levels")
    db = dict(units={}, db_units=(("dB", float),))
    lo = quantity("learner", "sinr_min", default=-10.0, **db)
    hi = quantity("learner", "sinr_max", default=40.0, **db)
    if levels > 2 and not hi > lo:
        raise src.error("learner", "sinr_max", "sinr_max must exceed sinr_min")
    quantizer = SinrQuantizer.uniform_db(levels, lo, hi)

    hb = HotbootSettings(
        realizations=number("learner", "hotboot_realizations", 20, integer=True),
        slots=number("learner", "hotboot_slots", 500, integer=True),
        reduction=get("learner", "hotboot_reduction", "sequential"),
        perturb=number("learner", "hotboot_perturb", 0.0),
    )
    if hb.realizations < 1:
        raise src.error("learner", "hotboot_realizations", "must be >= 1")
    if hb.slots < 1:
        raise src.error("learner", "hotboot_slots", "must be >= 1")
    if hb.reduction not in ("sequential", "average"):
        raise src.error("learner", "hotboot_reduction", "must be 'sequential' or 'average'")
    if not 0 <= hb.perturb < 1:
        raise src.error("learner", "hotboot_perturb", "must lie in [0, 1)")

    setting = Setting(phy=phy, game=game, learner=learner, quantizer=quantizer)

    strategies = {}
    for role, default in (("user", "q-learning"), ("jammer", "best-response-oracle")):
        spec = _strategy(src, role, None, data.get(role, {"kind": default}))
        try:
            spec.validate(role, game)
        except ConfigError as exc:
            raise src.error(role, "value" if "value" in str(exc) else "kind", str(exc)) from exc
        strategies[role] = spec

    sweep_raw = get("sweep", "user", ["q-learning", "hotboot-q", "random",
                                      {"kind": "fixed", "value": 0.5}, "equilibrium-oracle"])
    if not isinstance(sweep_raw, list) or not sweep_raw:
        raise src.error("sweep", "user", "expected a non-empty list of strategies")
    sweep_user = []
    for raw in sweep_raw:
        spec = _strategy(src, "sweep", "user", raw)
        try:
            spec.validate("user", game)
        except ConfigError as exc:
            raise src.error("sweep", "user", str(exc)) from exc
        sweep_user.append(spec)

    run = RunSettings(
        slots=number("run", "slots", DEFAULT_SLOTS, integer=True),
        seeds=tuple(get("run", "seeds", list(range(10)))),
        window=number("run", "window", DEFAULT_WINDOW, integer=True),
        threshold=number("run", "threshold", DEFAULT_THRESHOLD),
    )
    if run.slots < 1:
        raise src.error("run", "slots", "must be >= 1")
    if not run.seeds or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0
                                for s in run.seeds):
        raise src.error("run", "seeds", "expected a non-empty list of non-negative integers")
    if run.window < 1:
        raise src.error("run", "window", "must be >= 1")
    if not 0 < run.threshold <= 1:
        raise src.error("run", "threshold", "must lie in (0, 1]")

    return ExperimentConfig(setting, strategies["user"], strategies["jammer"], run, hb,
                            tuple(sweep_user))


def loads(text: str, name: str = "<config>") -> ExperimentConfig:
    return _build(_Source(text, name))


def load(path=None) -> ExperimentConfig:
    """Load ``path``, else ``$BACKSCATTER_GAME_CONFIG``, else the built-in defaults."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return loads(DEFAULT_TOML, "<defaults>")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return loads(text, str(path))


def default_config() -> ExperimentConfig:
    return loads(DEFAULT_TOML, "<defaults>")
