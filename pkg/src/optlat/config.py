"""YAML scenario files with unit-tagged quantities.

Physical values are strings "<number> <unit>", e.g. ``u1: 150 E_R`` or
``detuning: -2000 Gamma``. Recognised units:

    energy     E_R
    detuning   Gamma
    angle      rad, deg   (the number may be written with pi, e.g. "pi/2.3 rad")
    time       hbar/E_R

Dimensionless and integer settings are plain YAML scalars. Unknown keys are
errors; every problem in a file is collected and reported together.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

SCENARIOS = ("potential", "bands", "fom", "cool", "tunnel", "dwspec", "verify")
UNITS = {"energy": {"E_R": 1.0}, "detuning": {"Gamma": 1.0},
         "angle": {"rad": 1.0, "deg": math.pi / 180}, "time": {"hbar/E_R": 1.0}}

# section -> key -> kind; kinds: energy/detuning/angle/time, int, float, str, bool,
# list:<kind>, or a tuple of allowed strings
SCHEMA = {
    None: {"scenario": SCENARIOS, "seed": "int", "atom": ("cesium", "spin_half"),
           "description": "str"},
    "lattice": {"geometry": ("lin_angle_lin", "three_beam_2d"), "theta": "angle", "u1": "energy",
                "detuning": "detuning", "mode": ("finite_hyperfine", "infinite_limit"),
                "field": "list:energy", "e_pi_ratio": "float", "phi": "angle", "F": "float",
                "z_points": "int"},
    "numerics": {"n_max": "int", "q_points": "int", "n_bands": "int", "dt": "time",
                 "grid_points": "int", "sample_every": "int", "duration": "time",
                 "backend": ("lapack", "native")},
    "fom": {"u1_dm2": "energy", "detuning_dm2": "detuning", "u1_2d": "energy",
            "detuning_2d": "detuning", "e_pi_ratio": "float", "phi": "angle",
            "u1_scan": "list:energy"},
    "cooling": {"u1": "energy", "detuning": "detuning", "pump_ratio": "float", "gamma_p": "energy",
                "q_boltzmann": "float", "n_max": "int", "steps": "list:int", "durations": "list:time",
                "duration_scale": "float", "samples_per_step": "int", "method": ("dop853", "expm"),
                "sweep": "list:float"},
    "doublewell": {"model": ("spin_half", "cesium_f4"), "u1": "energy", "theta": "angle",
                   "k_dz": "angle", "omega_perp": "energy", "b_z": "energy",
                   "omega_scan": "list:energy", "initial": ("S", "A", "L", "R")},
    "noise": {"amplitude": "angle", "correlation_time": "time", "ensemble": "int"},
    "output": {"dir": "str", "prefix": "str"},
    "expected": "free",
}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_PI = re.compile(rf"^(?P<sign>[-+]?)(?:(?P<a>{_NUM})\s*\*\s*)?pi(?:\s*/\s*(?P<b>{_NUM}))?$")


def _number(text: str) -> float:
    text = text.strip()
    m = _PI.match(text)
    if m:
        v = math.pi * float(m["a"] or 1.0) / float(m["b"] or 1.0)
        return -v if m["sign"] == "-" else v
    if re.fullmatch(_NUM, text):
        return float(text)
    raise ValueError(f"cannot read number {text!r}")


def parse_quantity(value, kind: str) -> float:
    """Convert '<number> <unit>' of the given kind to recoil units."""
    if isinstance(value, bool) or not isinstance(value, str):
        raise ValueError(f"expected a unit-tagged string for a {kind}, got {value!r}")
    parts = value.strip().rsplit(None, 1)
    if len(parts) != 2:
        raise ValueError(f"{value!r} lacks a unit (allowed: {', '.join(UNITS[kind])})")
    num, unit = parts
    if unit not in UNITS[kind]:
        raise ValueError(f"unit {unit!r} is not a {kind} unit (allowed: {', '.join(UNITS[kind])})")
    return _number(num) * UNITS[kind][unit]


def _convert(value, kind, where: str, problems: list):
    try:
        if isinstance(kind, tuple):
            if value not in kind:
                raise ValueError(f"must be one of {', '.join(kind)}")
            return value
        if kind.startswith("list:"):
            if not isinstance(value, list):
                raise ValueError("must be a list")
            sub = kind[5:]
            out = [_convert(v, sub, f"{where}[{i}]", problems) for i, v in enumerate(value)]
            return out
        if kind in UNITS:
            return parse_quantity(value, kind)
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError("must be an integer")
            return value
        if kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError("must be a number")
            return float(value)
        if kind == "str":
            if not isinstance(value, str):
                raise ValueError("must be a string")
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                raise ValueError("must be true or false")
            return value
    except ValueError as exc:
        problems.append(f"{where}: {exc}")
        return None
    raise AssertionError(kind)


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int = 0
    atom: str = "cesium"
    description: str = ""
    sections: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    source: str = ""

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)


def validate(raw) -> ScenarioConfig:
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a mapping"])
    top, sections, expected = {}, {}, {}
    for key, value in raw.items():
        if key in SCHEMA[None]:
            top[key] = _convert(value, SCHEMA[None][key], key, problems)
        elif key == "expected":
            if not isinstance(value, dict):
                problems.append("expected: must be a mapping")
            else:
                expected = {str(k): v for k, v in value.items()}
        elif key in SCHEMA:
            if not isinstance(value, dict):
                problems.append(f"{key}: must be a mapping")
                continue
            spec = SCHEMA[key]
            sec = {}
            for k, v in value.items():
                if k not in spec:
                    problems.append(f"{key}.{k}: unknown key")
                else:
                    sec[k] = _convert(v, spec[k], f"{key}.{k}", problems)
            sections[key] = sec
        else:
            problems.append(f"{key}: unknown key")
    if "scenario" not in raw:
        problems.append("scenario: required")
    seed = top.get("seed", 0)
    if seed is not None and not 0 <= seed < 2 ** 64:
        problems.append("seed: must be an unsigned 64-bit integer")
    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(top["scenario"], top.get("seed", 0), top.get("atom", "cesium"),
                          top.get("description", ""), sections, expected)


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: YAML syntax error: {exc}"]) from exc
    cfg = validate(raw)
    cfg.source = text
    return cfg
