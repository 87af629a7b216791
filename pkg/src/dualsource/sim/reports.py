"""CSV outputs.  Each file starts with one ``# schema <name> v<version>`` line."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from .engine import COST_COLUMNS, Estimate, _half_width

SCHEMA_VERSION = 1

SCHEMAS = {
    "gaps": ("instance", "policy", "mean_cost", "half_width", "gap_pct"),
    "breakdown": ("instance", "policy", *COST_COLUMNS, "total", "am_fraction"),
    "orders": ("instance", "policy", "source", "order_size", "frequency"),
    "iwa_trace": ("iteration", "gamma", "rho", "cost"),
}


def fmt(x) -> str:
    """Locale-independent, round-trippable number formatting."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path: Union[str, Path, io.TextIOBase], schema: str, rows: Iterable[Sequence]) -> None:
    header = SCHEMAS[schema]

    def emit(fh):
        fh.write(f"# schema {schema} v{SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"{schema} row has {len(row)} fields, expected {len(header)}")
            w.writerow([fmt(v) for v in row])

    if isinstance(path, (str, Path)):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            emit(fh)
    else:
        emit(path)


def read_csv(path: Union[str, Path]) -> tuple:
    """``(schema, version, rows as dicts)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().split()
        if len(first) != 4 or first[:2] != ["#", "schema"]:
            raise ValueError(f"{path}: missing schema header")
        schema, version = first[2], int(first[3].lstrip("v"))
        rows = list(csv.DictReader(fh))
    return schema, version, rows


@dataclass
class BreakdownRow:
    instance: str
    policy: str
    means: np.ndarray  # purchase, holding, backorder, maintenance
    half_widths: np.ndarray
    am_fraction: float

    @property
    def total(self) -> float:
        return float(self.means.sum())


def breakdown_report(instance: str, policy: str, stats: List) -> BreakdownRow:
    """Per-category means and half-widths over episodes (``EpisodeStats``) or an ``Estimate``."""
    if isinstance(stats, Estimate):
        return BreakdownRow(instance, policy, stats.breakdown, stats.breakdown_half_width, stats.am_fraction_installed)
    if not stats:
        raise ValueError("breakdown_report needs at least one episode")
    comp = np.array([s.cost.as_array() / s.periods for s in stats])
    return BreakdownRow(
        instance,
        policy,
        comp.mean(axis=0),
        np.array([_half_width(comp[:, j]) for j in range(4)]),
        float(np.mean([s.am_fraction_installed for s in stats])),
    )


def breakdown_rows(rows: Iterable[BreakdownRow]):
    for r in rows:
        yield (r.instance, r.policy, *map(float, r.means), r.total, r.am_fraction)


def order_rows(instance: str, policy: str, histogram: dict):
    """Frequencies of each order size per source (CM sizes in batches)."""
    for source in ("CM", "AM"):
        counts = np.asarray(histogram[source])
        total = counts.sum()
        for size, n in enumerate(counts):
            if n:
                yield (instance, policy, source, size, float(n / total))
