"""Finite state spaces for the exact solver.

The *full* model tracks CM and AM parts separately.  The *simplified* model
(one failure rate, modes merged) reuses the same row layout with
``n_a = s_a = 0``; its dynamics are the full dynamics under single-rate
parameters followed by :func:`merge_modes`.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from ..core.batch import Layout
from ..core.params import InstanceParams, SystemState

DEFAULT_STATE_CAP = 5_000_000
MODELS = ("full", "simplified")


class StateSpaceTooLarge(RuntimeError):
    def __init__(self, count: int, cap: int):
        super().__init__(
            f"state space has {count} states, above the cap of {cap}; "
            "use a heuristic or learned policy for this instance"
        )
        self.count = count
        self.cap = cap


def merge_modes(states: np.ndarray) -> np.ndarray:
    """Fold AM parts and stock into the CM columns (simplified model)."""
    out = states.copy()
    out[:, 0] += out[:, 1]
    out[:, 1] = 0
    out[:, 2] += out[:, 3]
    out[:, 3] = 0
    return out


def _pipelines(slots: int, weight: int, cap: int) -> np.ndarray:
    """All nonnegative vectors of length ``slots`` with ``weight * sum <= cap``."""
    max_total = cap // weight
    rows = list(_bounded_vectors(slots, max_total))
    return np.array(rows, dtype=np.int64).reshape(-1, slots)


def _bounded_vectors(slots: int, max_total: int):
    """Lexicographic generator of vectors whose entries sum to at most ``max_total``."""
    if slots == 0:
        yield ()
        return
    for v in range(max_total + 1):
        for rest in _bounded_vectors(slots - 1, max_total - v):
            yield (v, *rest)


def count_states(params: InstanceParams, model: str = "full") -> int:
    """Closed-form size of the constrained state space (no enumeration)."""
    n_tot = 0
    for n_op in range(params.n + 1):
        bo = params.n - n_op
        mixes = n_op + 1 if model == "full" else 1
        cap = params.s_max + bo
        for stock in range(cap + 1):
            if stock > 0 and bo > 0:
                continue
            splits = stock + 1 if model == "full" else 1
            rem = cap - stock
            for cu in range(rem // params.q_c + 1):
                r2 = rem - cu * params.q_c
                nc = comb(cu + params.l_c - 1, params.l_c - 1)
                na = comb(r2 + params.l_a, params.l_a)  # vectors with sum <= r2
                n_tot += mixes * splits * nc * na
    return n_tot


@dataclass
class StateSpace:
    """Ordered list of states with a bijective state <-> ordinal map."""

    params: InstanceParams
    model: str
    states: np.ndarray  # (n, dim) int64, sorted by key
    keys: np.ndarray  # (n,) int64 ascending
    radix: np.ndarray  # per-column place values
    sizes: np.ndarray  # per-column exclusive upper bound

    def __len__(self) -> int:
        return self.states.shape[0]

    def encode(self, rows: np.ndarray) -> np.ndarray:
        return rows @ self.radix

    def lookup(self, keys: np.ndarray) -> np.ndarray:
        """Ordinals of encoded states; raises KeyError for unknown keys."""
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, len(self.keys) - 1)
        bad = self.keys[pos] != keys
        if bad.any():
            raise KeyError(f"state key {int(keys[np.argmax(bad)])} not in state space")
        return pos

    def contains(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(rows)
        in_range = ((rows >= 0) & (rows < self.sizes)).all(axis=1)
        keys = self.encode(np.where(in_range[:, None], rows, 0))
        pos = np.minimum(np.searchsorted(self.keys, keys), len(self.keys) - 1)
        return in_range & (self.keys[pos] == keys)

    def index(self, rows: np.ndarray) -> np.ndarray:
        """Ordinals of ``rows``; raises KeyError for states outside the space."""
        rows = np.atleast_2d(rows)
        ok = self.contains(rows)
        if not ok.all():
            raise KeyError(f"state {rows[np.argmin(ok)].tolist()} not in state space")
        return self.lookup(self.encode(rows))

    def index_of(self, state: SystemState) -> int:
        return int(self.index(state.to_array()[None, :])[0])

    def state_of(self, i: int) -> SystemState:
        return SystemState.from_array(self.states[i], self.params)

    @property
    def reference(self) -> int:
        """Ordinal of the full-CM, zero-stock, empty-pipeline state."""
        return self.index_of(SystemState.initial(self.params))


def _radix(params: InstanceParams) -> tuple[np.ndarray, np.ndarray]:
    lay = Layout.of(params)
    top = params.s_max + params.n
    sizes = [params.n + 1, params.n + 1, params.s_max + 1, params.s_max + 1]
    sizes += [top // params.q_c + 1] * lay.l_c + [top + 1] * lay.l_a
    place = np.ones(len(sizes), dtype=object)
    for j in range(len(sizes) - 2, -1, -1):
        place[j] = place[j + 1] * sizes[j + 1]
    if place[0] * sizes[0] >= 2**62:
        raise StateSpaceTooLarge(count_states(params), DEFAULT_STATE_CAP)
    return place.astype(np.int64), np.array(sizes, dtype=np.int64)


def enumerate_states(
    params: InstanceParams, model: str = "full", cap: int = DEFAULT_STATE_CAP
) -> StateSpace:
    """All states with ``0 <= n_c + n_a <= N`` and ``IP <= S``.

    At period boundaries stock on hand implies no backorders, so states
    violating that are excluded.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    total = count_states(params, model)
    if total > cap:
        raise StateSpaceTooLarge(total, cap)
    radix, sizes = _radix(params)
    top = params.s_max + params.n
    uc_all = _pipelines(params.l_c, params.q_c, top)
    ua_all = _pipelines(params.l_a, 1, top)
    uc_items = params.q_c * uc_all.sum(axis=1)
    ua_items = ua_all.sum(axis=1)

    blocks = []
    for n_op in range(params.n + 1):
        bo = params.n - n_op
        budget = params.s_max + bo
        mixes = [(n_op - n_a, n_a) for n_a in range(n_op + 1)] if model == "full" else [(n_op, 0)]
        stocks = [(0, 0)]
        if bo == 0:
            if model == "full":
                stocks = [(st - s_a, s_a) for st in range(budget + 1) for s_a in range(st + 1)]
            else:
                stocks = [(st, 0) for st in range(budget + 1)]
        for s_c, s_a in stocks:
            rem = budget - s_c - s_a
            ucs = uc_all[uc_items <= rem]
            uci = uc_items[uc_items <= rem]
            # pair every CM pipeline with each AM pipeline that still fits
            ok = ua_items[None, :] <= (rem - uci)[:, None]
            ic, ia = np.nonzero(ok)
            pipes = np.hstack([ucs[ic], ua_all[ia]])
            for n_c, n_a in mixes:
                head = np.tile(np.array([n_c, n_a, s_c, s_a], dtype=np.int64), (len(pipes), 1))
                blocks.append(np.hstack([head, pipes]))
    states = np.vstack(blocks)
    keys = states @ radix
    order = np.argsort(keys, kind="stable")
    states, keys = states[order], keys[order]
    if len(states) != total:
        raise AssertionError(f"enumeration produced {len(states)} states, expected {total}")
    return StateSpace(params=params, model=model, states=states, keys=keys, radix=radix, sizes=sizes)
