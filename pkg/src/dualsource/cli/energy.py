"""Ratio templates for the valve case and the full-factorial sensitivity grid.

The template stores per-item ratios only; absolute values come from an
:class:`EnergyBase` supplied by the user.
"""

from __future__ import annotations

import configparser
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

from ..core.params import InstanceParams
from ..exact.bounds import determine_S
from .config import ConfigError, resolve_instance

ITEM_KEYS = ("parts", "c_c", "l_c", "mu_c", "c_a", "l_a", "mu_a", "k", "m", "h_per_year", "b")
VARIED = ("platforms", "c_a", "l_a", "mu_a", "b")
B_LEVELS = ("original", "min", "max")
DEFAULT_VARIATIONS: Dict[str, tuple] = {
    "platforms": (5, 15, 25),
    "c_a": (1.0, 1.25, 0.75),
    "l_a": (1.0, 0.75, 0.5),
    "mu_a": (1.0, 0.75, 0.5),
    "b": ("original", "min", "max"),
}


@dataclass(frozen=True)
class ItemRatios:
    name: str
    parts: int
    c_c: float
    l_c: float
    mu_c: float
    c_a: float  # of the item's c_c
    l_a: float  # of the item's l_c
    mu_a: float
    k: float  # fixed order cost, of c_c, both sources
    m: float  # of c_c
    h_per_year: float  # of c_c
    b: float


@dataclass(frozen=True)
class EnergyBase:
    """Absolute values of item 1 that the ratios scale.

    Only ``price`` is required.  ``b_min``/``b_max`` scale the backorder
    cost for the low and high sensitivity levels.  With ``s_max=None`` the
    stock cap follows :func:`determine_S` at ``epsilon``.
    """

    price: float
    lead_time: int = 36
    failure_rate: float = 1.0 / 520.0
    backorder: Optional[float] = None
    periods_per_year: int = 52
    q_c: int = 1
    b_min: float = 0.5
    b_max: float = 1.5
    s_max: Optional[int] = 25
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.price <= 0:
            raise ValueError("base price must be > 0")
        if not 0 < self.b_min <= 1 <= self.b_max:
            raise ValueError("backorder range must satisfy 0 < b_min <= 1 <= b_max")


def load_energy_template(ref: Union[str, Path] = "energy-template") -> List[ItemRatios]:
    path = resolve_instance(ref)
    cp = configparser.ConfigParser(interpolation=None)
    cp.read(path, encoding="utf-8")
    if not cp.has_section("template") or cp["template"].get("kind") != "energy-ratios":
        raise ConfigError(f"{path}: not an energy ratio template")
    items = []
    for section in cp.sections():
        if section == "template":
            continue
        sec = cp[section]
        unknown = set(sec) - set(ITEM_KEYS)
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)} in [{section}]")
        try:
            values = {k: (int(sec[k]) if k == "parts" else float(sec[k])) for k in ITEM_KEYS}
        except KeyError as exc:
            raise ConfigError(f"{path}: [{section}] lacks {exc.args[0]}") from None
        items.append(ItemRatios(section, **values))
    if not items:
        raise ConfigError(f"{path}: template has no items")
    return items


def instantiate(
    item: ItemRatios,
    base: EnergyBase,
    platforms: int = 1,
    c_a: float = 1.0,
    l_a: float = 1.0,
    mu_a: float = 1.0,
    b: str = "original",
) -> InstanceParams:
    """One instance; the keyword levels are multipliers on the item's original values."""
    c_c = item.c_c * base.price
    l_c = max(1, round(item.l_c * base.lead_time))
    mu_c = item.mu_c * base.failure_rate
    l_a_orig = max(1, round(item.l_a * l_c))
    backorder = (base.backorder if base.backorder is not None else base.price) * item.b
    backorder *= {"original": 1.0, "min": base.b_min, "max": base.b_max}[b]
    mu = item.mu_a * base.failure_rate * mu_a
    params = InstanceParams.poisson(
        n=item.parts * platforms,
        s_max=0,
        mu_c=mu_c,
        mu_a=mu,
        l_c=l_c,
        l_a=max(1, round(l_a * l_a_orig)),
        c_c=c_c,
        c_a=item.c_a * c_c * c_a,
        k_c=item.k * c_c,
        k_a=item.k * c_c,
        q_c=base.q_c,
        m=item.m * c_c,
        h=item.h_per_year * c_c / base.periods_per_year,
        b=backorder,
    )
    return params.with_(s_max=base.s_max if base.s_max is not None else determine_S(params, base.epsilon))


def _check_variations(variations: Mapping[str, Sequence]) -> None:
    for key, levels in variations.items():
        if key not in VARIED:
            raise ValueError(f"cannot vary {key!r}; choose from {VARIED}")
        if not levels:
            raise ValueError(f"no levels given for {key}")
        for level in levels:
            if key == "b":
                if level not in B_LEVELS:
                    raise ValueError(f"backorder level must be one of {B_LEVELS}, got {level!r}")
            elif key == "platforms":
                if int(level) != level or level < 1:
                    raise ValueError(f"platform count must be a positive integer, got {level!r}")
            elif not level > 0:
                raise ValueError(f"{key} multiplier must be > 0, got {level!r}")


def generate_energy_grid(
    template: Sequence[ItemRatios],
    base: Union[EnergyBase, float],
    variations: Optional[Mapping[str, Sequence]] = None,
) -> List[InstanceParams]:
    """Full factorial over the varied levels for every item, items outermost.

    Levels not varied stay at the original value (one platform).
    """
    if not isinstance(base, EnergyBase):
        base = EnergyBase(float(base))
    variations = DEFAULT_VARIATIONS if variations is None else dict(variations)
    _check_variations(variations)
    keys = [k for k in VARIED if k in variations]
    out = []
    for item in template:
        for combo in itertools.product(*(variations[k] for k in keys)):
            out.append(instantiate(item, base, **dict(zip(keys, combo))))
    return out
