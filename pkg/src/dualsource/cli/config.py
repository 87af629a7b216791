"""Instance files, the bundled library and experiment settings.

Instance files are INI documents::

    [instance]
    name = synthetic-01
    description = ...
    provenance = ...

    [parameters]
    n = 7
    s_max = 8
    ...
    demand_family = negative_binomial

Every key of ``[parameters]`` maps to a field of ``InstanceParams``; unknown
keys are errors.  ``var_c``/``var_a`` may be omitted for Poisson demand.
Files written by :func:`save_instance` are canonical: loading and saving
one reproduces it byte for byte.
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Union

from ..core.params import InstanceParams

LIBRARY_ENV = "DUALSOURCE_LIBRARY"
PARAM_KEYS = tuple(f.name for f in fields(InstanceParams))
INT_KEYS = ("n", "s_max", "l_c", "l_a", "q_c")
META_KEYS = ("name", "description", "provenance")
PathLike = Union[str, Path]


class ConfigError(ValueError):
    """A configuration or instance file is invalid."""


@dataclass(frozen=True)
class InstanceFile:
    params: InstanceParams
    name: str = ""
    description: str = ""
    provenance: str = ""


def format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return repr(value)


def _line_of(text: str, key: str) -> int:
    for no, line in enumerate(text.splitlines(), start=1):
        if re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return no
    return 0


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    cp.optionxform = str
    return cp


def parse_instance(text: str, source: str = "<string>") -> InstanceFile:
    cp = _parser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if cp.has_section("template"):
        raise ConfigError(f"{source}: this is a ratio template; instantiate it with a base price first")
    for section in cp.sections():
        if section not in ("instance", "parameters"):
            raise ConfigError(f"{source}:{_line_of(text, '[' + section)}: unknown section [{section}]")
    if not cp.has_section("parameters"):
        raise ConfigError(f"{source}: missing [parameters] section")
    meta = dict(cp["instance"]) if cp.has_section("instance") else {}
    for key in meta:
        if key not in META_KEYS:
            raise ConfigError(f"{source}:{_line_of(text, key)}: unknown key {key!r} in [instance]")
    raw = dict(cp["parameters"])
    values: Dict[str, object] = {}
    for key, value in raw.items():
        line = _line_of(text, key)
        if key not in PARAM_KEYS:
            raise ConfigError(f"{source}:{line}: unknown key {key!r}")
        try:
            if key == "demand_family":
                values[key] = value
            elif key in INT_KEYS:
                values[key] = int(value)
            else:
                values[key] = float(value)
        except ValueError:
            raise ConfigError(f"{source}:{line}: {key} = {value!r} is not a number") from None
    family = values.get("demand_family", "negative_binomial")
    for rate, var in (("mu_c", "var_c"), ("mu_a", "var_a")):
        if var not in values:
            if family != "poisson":
                raise ConfigError(f"{source}: {var} is required unless demand_family = poisson")
            if rate in values:
                values[var] = values[rate]
    missing = [k for k in PARAM_KEYS if k not in values and k != "demand_family"]
    if missing:
        raise ConfigError(f"{source}: missing keys {', '.join(missing)}")
    try:
        params = InstanceParams(**values)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return InstanceFile(params, meta.get("name", ""), meta.get("description", ""), meta.get("provenance", ""))


def instance_text(doc: InstanceFile) -> str:
    lines = ["[instance]"]
    for key in META_KEYS:
        lines.append(f"{key} = {getattr(doc, key)}".rstrip())
    lines += ["", "[parameters]"]
    lines += [f"{key} = {format_value(getattr(doc.params, key))}" for key in PARAM_KEYS]
    return "\n".join(lines) + "\n"


def save_instance(doc: Union[InstanceFile, InstanceParams], path: PathLike) -> None:
    if isinstance(doc, InstanceParams):
        doc = InstanceFile(doc, Path(path).stem)
    Path(path).write_text(instance_text(doc), encoding="utf-8")


def _library_dirs() -> List[Path]:
    dirs = []
    if os.environ.get(LIBRARY_ENV):
        dirs += [Path(p) for p in os.environ[LIBRARY_ENV].split(os.pathsep) if p]
    dirs.append(Path(str(resources.files("dualsource") / "data" / "instances")))
    return dirs


def resolve_instance(ref: PathLike) -> Path:
    """A path, or a library name looked up in ``$DUALSOURCE_LIBRARY`` first, then the bundle."""
    path = Path(ref)
    if path.suffix == ".ini" and path.exists():
        return path
    for directory in _library_dirs():
        candidate = directory / f"{ref}.ini"
        if candidate.exists():
            return candidate
    raise ConfigError(f"no instance file or library entry named {str(ref)!r}")


def read_instance(ref: PathLike) -> InstanceFile:
    path = resolve_instance(ref)
    return parse_instance(path.read_text(encoding="utf-8"), str(path))


def load_instance(ref: PathLike) -> InstanceParams:
    return read_instance(ref).params


def list_instances() -> List[str]:
    """Library names, user directories first, without duplicates."""
    seen: Dict[str, None] = {}
    for directory in _library_dirs():
        if directory.is_dir():
            for p in sorted(directory.glob("*.ini")):
                seen.setdefault(p.stem, None)
    return list(seen)


def instance_set(name: str) -> List[str]:
    """Named groups of library instances."""
    sets = {
        "synthetic": [f"synthetic-{i:02d}" for i in range(1, 11)],
        "synthetic-large": ["synthetic-11", "synthetic-12"],
    }
    if name not in sets:
        raise ConfigError(f"unknown instance set {name!r}; choose from {', '.join(sets)}")
    return sets[name]


def backorder_cost_from_fill_rate(h: float, fill_rate: float) -> float:
    """Backorder cost making ``b / (b + h)`` equal the target fill rate.

    The bundled synthetic instances keep their tabulated values, which
    differ slightly from this formula (5725 instead of 5771 for h = 29,
    fill rate 0.995).
    """
    if not 0.0 < fill_rate < 1.0:
        raise ValueError("fill rate must lie in (0, 1)")
    return h * fill_rate / (1.0 - fill_rate)


@dataclass(frozen=True)
class EvaluationSettings:
    replications: int = 100
    periods: int = 10_000
    warmup: int = 1_000
    seed: int = 0


HYPERPARAMETER_DEFAULTS = {
    "evaluation": {"replications": 100, "periods": 10_000, "warmup": 1_000, "seed": 0},
    "avi": {"samples": 2000, "horizon": 250, "epsilon": 0.1, "discount": 0.99, "forgetting": 1.0},
    "dcl": {
        "iterations": 4, "samples": 1000, "scenarios": 100, "horizon": 80, "warmup": 10,
        "chains": 40, "spread": 400, "hidden": "32,32", "learning_rate": 1e-3, "batch_size": 64, "epochs": 60,
    },
    "epl": {"sample_factor": 2.5, "scenario_factor": 2.0, "kappa": 10},
    "iwa": {"psi": 0.2, "max_iterations": 50},
    "validation": {"replications": 20, "periods": 2000, "warmup": 200, "seed": 99},
}


def load_hyperparameters(path: Optional[PathLike] = None) -> Dict[str, Dict[str, object]]:
    """Defaults overridden by an INI file whose sections and keys must already exist."""
    out = {s: dict(v) for s, v in HYPERPARAMETER_DEFAULTS.items()}
    if path is None:
        return out
    text = Path(path).read_text(encoding="utf-8")
    cp = _parser()
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in cp.sections():
        if section not in out:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in cp[section].items():
            if key not in out[section]:
                raise ConfigError(f"{path}:{_line_of(text, key)}: unknown key {key!r} in [{section}]")
            default = out[section][key]
            try:
                out[section][key] = type(default)(value) if not isinstance(default, str) else value
            except ValueError:
                raise ConfigError(f"{path}:{_line_of(text, key)}: bad value {value!r} for {key}") from None
            if isinstance(default, (int, float)) and out[section][key] < 0:
                raise ConfigError(f"{path}:{_line_of(text, key)}: {key} must be >= 0")
    return out
