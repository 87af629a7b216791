"""Saving and loading trained or solved policies.

Rule-based and tabular policies use a line-oriented text format::

    # dualsource policy v1
    kind = base-stock
    source = CM
    base_stock = 5

Tabular files add ``model`` and ``states`` headers followed by one line
per state: the state row, then ``->``, then ``x_c x_a``.  Learned policies
are stored as JSON documents with a ``kind`` field.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from ..core.params import InstanceParams
from ..core.policy import Policy
from ..exact import TabularPolicy, enumerate_states
from ..heuristics import BaseStockPolicy, DualIndexParams, DualIndexPolicy
from ..learning import ClassifierPolicy, FeatureMap, LinearVFA, VfaGreedyPolicy

HEADER = "# dualsource policy v1"
PathLike = Union[str, Path]


class ArtifactError(ValueError):
    """A policy file is malformed or does not fit the instance."""


def policy_text(policy: Policy) -> str:
    if isinstance(policy, BaseStockPolicy):
        fields = {"kind": "base-stock", "source": policy.source, "base_stock": policy.base_stock}
    elif isinstance(policy, DualIndexPolicy):
        fields = {"kind": "dual-index", "z_a": policy.levels.z_a, "delta": policy.levels.delta}
    elif isinstance(policy, TabularPolicy):
        lines = [HEADER, "kind = tabular", f"model = {policy.space.model}", f"states = {len(policy.space)}"]
        for row, x in zip(policy.space.states, policy.decisions):
            lines.append(" ".join(map(str, row)) + f" -> {x[0]} {x[1]}")
        return "\n".join(lines) + "\n"
    else:
        raise TypeError(f"no text format for {type(policy).__name__}")
    return "\n".join([HEADER] + [f"{k} = {v}" for k, v in fields.items()]) + "\n"


def _vfa_dict(policy: VfaGreedyPolicy) -> dict:
    return {
        "version": 1,
        "kind": "linear-vfa",
        "features": policy.vfa.feature_map.to_dict(),
        "discount": policy.vfa.discount,
        "weights": policy.vfa.weights.tolist(),
        "grid": policy.grid.tolist(),
    }


def save_policy(policy: Policy, path: PathLike) -> None:
    path = Path(path)
    if isinstance(policy, ClassifierPolicy):
        path.write_text(json.dumps(policy.to_dict()), encoding="utf-8")
    elif isinstance(policy, VfaGreedyPolicy):
        path.write_text(json.dumps(_vfa_dict(policy)), encoding="utf-8")
    else:
        path.write_text(policy_text(policy), encoding="utf-8")


def _parse_header(lines, path) -> dict:
    fields = {}
    for no, line in enumerate(lines, start=2):
        if "->" in line:
            break
        key, sep, value = line.partition("=")
        if not sep:
            raise ArtifactError(f"{path}:{no}: expected 'key = value'")
        fields[key.strip()] = value.strip()
    return fields


def _load_tabular(lines, fields, params: InstanceParams, path) -> TabularPolicy:
    space = enumerate_states(params, fields.get("model", "full"))
    body = [l for l in lines if "->" in l]
    if int(fields.get("states", -1)) != len(space) or len(body) != len(space):
        raise ArtifactError(f"{path}: state count does not match the instance's state space")
    rows = np.array([[int(v) for v in l.split("->")[0].split()] for l in body], dtype=np.int64)
    decisions = np.array([[int(v) for v in l.split("->")[1].split()] for l in body], dtype=np.int64)
    if rows.shape[1] != space.states.shape[1]:
        raise ArtifactError(f"{path}: state width does not match the instance")
    try:
        order = space.index(rows)
    except KeyError as exc:
        raise ArtifactError(f"{path}: {exc.args[0]}") from None
    table = np.zeros((len(space), 2), dtype=np.int64)
    table[order] = decisions
    return TabularPolicy(space, table, params)


def load_policy(path: PathLike, params: InstanceParams) -> Policy:
    """Rebuild a saved policy for ``params``; the kind is read from the file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        kind = doc.get("kind")
        if kind == "classifier":
            return ClassifierPolicy.from_dict(doc, params)
        if kind == "linear-vfa":
            vfa = LinearVFA(np.array(doc["weights"]), FeatureMap.from_dict(doc["features"]), doc["discount"])
            return VfaGreedyPolicy(params, vfa, np.array(doc["grid"], dtype=np.int64))
        raise ArtifactError(f"{path}: unknown policy kind {kind!r}")
    lines = text.splitlines()
    if not lines or lines[0] != HEADER:
        raise ArtifactError(f"{path}: missing '{HEADER}' header")
    fields = _parse_header(lines[1:], path)
    kind = fields.get("kind")
    try:
        if kind == "base-stock":
            return BaseStockPolicy(params, fields["source"], int(fields["base_stock"]))
        if kind == "dual-index":
            return DualIndexPolicy(params, DualIndexParams(int(fields["z_a"]), int(fields["delta"])))
    except KeyError as exc:
        raise ArtifactError(f"{path}: missing field {exc.args[0]!r}") from None
    if kind == "tabular":
        return _load_tabular(lines[1:], fields, params, path)
    raise ArtifactError(f"{path}: unknown policy kind {kind!r}")
