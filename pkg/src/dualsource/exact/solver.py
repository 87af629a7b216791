"""Average-cost policy iteration over an enumerated state space."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import bicgstab, gmres, splu

from ..core.params import InstanceParams
from ..core.policy import Policy
from .statespace import DEFAULT_STATE_CAP, StateSpace, enumerate_states, merge_modes
from .transitions import TransitionTable, build_transitions

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000


class SolverError(RuntimeError):
    """Policy evaluation or iteration did not reach its tolerance."""


class MultichainError(SolverError):
    """The policy induces more than one closed recurrent class."""


class TabularPolicy(Policy):
    """One decision per state ordinal.

    A policy on the simplified space can drive the full model: full states
    are merged (CM and AM columns added) before the lookup.
    """

    name = "tabular"

    def __init__(self, space: StateSpace, decisions: np.ndarray, params: Optional[InstanceParams] = None):
        decisions = np.asarray(decisions, dtype=np.int64).reshape(len(space), 2)
        self.space = space
        self.decisions = decisions
        self.params = params if params is not None else space.params
        budget = space.params.s_max - _ip(space)
        items = decisions[:, 0] * space.params.q_c + decisions[:, 1]
        if (decisions < 0).any() or (items > budget).any():
            bad = int(np.argmax((decisions < 0).any(axis=1) | (items > budget)))
            raise ValueError(f"decision {decisions[bad].tolist()} infeasible in state {space.states[bad].tolist()}")

    def decide_batch(self, states: np.ndarray) -> np.ndarray:
        rows = merge_modes(states) if self.space.model == "simplified" else states
        return self.decisions[self.space.index(rows)]

    def describe(self) -> dict:
        return {"name": self.name, "model": self.space.model, "states": len(self.space)}


def _ip(space: StateSpace) -> np.ndarray:
    from ..core.batch import inventory_position

    return inventory_position(space.states, space.params)


@dataclass
class ExactSolution:
    policy: TabularPolicy
    g: float
    v: np.ndarray
    reference_state: int
    table: TransitionTable
    iterations: int = 0
    converged: bool = True
    gain_history: List[float] = field(default_factory=list)
    residual: float = 0.0

    @property
    def space(self) -> StateSpace:
        return self.table.space


def _transition_matrix(table: TransitionTable, decisions: np.ndarray) -> sp.csr_matrix:
    n = table.n_states
    cols = table.columns(decisions)
    return sp.csr_matrix((table.prob, (table.owner, cols)), shape=(n, n))


def _cost_vector(table: TransitionTable, decisions: np.ndarray) -> np.ndarray:
    return table.base_cost + table.purchase(decisions)


def evaluation_residual(P, c: np.ndarray, g: float, v: np.ndarray) -> float:
    return float(np.abs(c - g + P @ v - v).max())


def _linear_solve(A, b: np.ndarray, x0: Optional[np.ndarray] = None, atol: float = 1e-10) -> np.ndarray:
    """Solve ``A x = b`` to max-norm residual ``atol`` (dense, Krylov, or LU)."""
    n = A.shape[0]
    if n <= DENSE_LIMIT:
        return np.linalg.solve(A.toarray(), b)
    x = np.zeros(n) if x0 is None else x0.copy()
    for krylov in (bicgstab, bicgstab, gmres, gmres):
        r = b - A @ x
        scale = np.abs(r).max()
        if scale <= atol:
            return x
        # unit-scaled right-hand side: tiny corrections otherwise break BiCGSTAB down
        kwargs = {"restart": 50} if krylov is gmres else {}
        dx, info = krylov(A, r / scale, rtol=1e-11, atol=0.0, maxiter=2000 if krylov is gmres else 20 * n, **kwargs)
        if np.isfinite(dx).all() and np.abs(b - A @ (x + scale * dx)).max() < scale:
            x = x + scale * dx
    r = b - A @ x
    if np.abs(r).max() <= atol:
        return x
    log.info("Krylov refinement stalled at residual %.3e, using sparse LU", np.abs(r).max())
    return splu(A.tocsc()).solve(b)


def residual_tolerance(c: np.ndarray) -> float:
    """Accepted max-norm evaluation residual: 1e-9, loosened with cost scale and size."""
    return max(1e-9, 1e-14 * np.abs(c).max() * len(c) ** 0.5)


def _solve_direct(P, c: np.ndarray, ref: int, x0: Optional[np.ndarray] = None):
    """Solve ``(I - P) v + g 1 = c`` with ``v[ref] = 0``.

    The column of ``v[ref]`` is replaced by the unknown ``g``.  Small systems
    use a dense LU; large ones BiCGSTAB (warm-started from the previous
    round when available) with a sparse LU as the fallback.
    """
    n = P.shape[0]
    A = (sp.identity(n, format="csr") - P).tocsc()
    A = A[:, np.r_[0:ref, ref + 1:n]]
    A = sp.hstack([A[:, :ref], sp.csc_matrix(np.ones((n, 1))), A[:, ref:]], format="csr")
    x = _linear_solve(A, c, x0, atol=0.1 * residual_tolerance(c))
    g = float(x[ref])
    v = x.copy()
    v[ref] = 0.0
    return g, v


def _solve_rvi(P, c: np.ndarray, ref: int, tol: float, max_sweeps: int, tau: float = 0.5, v0=None):
    """Relative value iteration on the aperiodic transform ``tau*I + (1-tau)*P``."""
    v = np.zeros_like(c) if v0 is None else v0 - v0[ref]
    for sweep in range(1, max_sweeps + 1):
        w = tau * v + (1.0 - tau) * (c + P @ v)
        diff = w - v
        lo, hi = diff.min(), diff.max()
        v = w - w[ref]
        if hi - lo < tol * (1.0 - tau):
            return 0.5 * (lo + hi) / (1.0 - tau), v, sweep
    raise SolverError(f"relative value iteration did not converge in {max_sweeps} sweeps (span {hi - lo:.3e})")


def policy_evaluation(
    policy,
    table: Optional[TransitionTable] = None,
    method: str = "direct",
    tol: float = 1e-9,
    max_sweeps: int = 1_000_000,
    v0: Optional[np.ndarray] = None,
    g0: Optional[float] = None,
):
    """Gain ``g`` and relative values ``v`` (``v[reference] = 0``) of a tabular policy.

    ``policy`` is a :class:`TabularPolicy` or a decision array aligned with
    ``table``.  ``method`` is ``"direct"`` (linear solve) or ``"rvi"``.
    """
    if isinstance(policy, TabularPolicy):
        if table is None:
            table = build_transitions(policy.space)
        decisions = policy.decisions
    else:
        decisions = np.asarray(policy, dtype=np.int64)
    if not table.feasible(decisions).all():
        raise ValueError("policy is infeasible in some state")
    P = _transition_matrix(table, decisions)
    c = _cost_vector(table, decisions)
    ref = table.space.reference
    if method == "direct":
        x0 = None
        if v0 is not None and g0 is not None:
            x0 = v0.copy()
            x0[ref] = g0
        g, v = _solve_direct(P, c, ref, x0)
    elif method == "rvi":
        g, v, _ = _solve_rvi(P, c, ref, tol, max_sweeps, v0=v0)
    else:
        raise ValueError(f"unknown evaluation method {method!r}")
    res = evaluation_residual(P, c, g, v)
    if not np.isfinite(res) or res > residual_tolerance(c) * (1e3 if method == "rvi" else 1.0):
        raise SolverError(f"policy evaluation residual {res:.3e} above tolerance ({method})")
    return g, v


@numba.njit(cache=True)
def _improve_kernel(ptr, prob, succ0, budget, base_cost, v, q_c, c_c, c_a, k_c, k_a, cur, rel_tol, new, qmin):
    n = budget.shape[0]
    changed = 0
    for i in range(n):
        bud = budget[i]
        lo, hi = ptr[i], ptr[i + 1]
        best = np.inf
        for xc in range(bud // q_c + 1):
            pc = c_c * q_c * xc + (k_c if xc > 0 else 0.0)
            for xa in range(bud - xc * q_c + 1):
                q = base_cost[i] + pc + c_a * xa + (k_a if xa > 0 else 0.0)
                for e in range(lo, hi):
                    q += prob[e] * v[succ0[e, xc] + xa]
                if q < best:
                    best = q
        thr = best + rel_tol * max(1.0, abs(best))
        qmin[i] = best
        # keep the incumbent when it is (numerically) optimal
        xc, xa = cur[i, 0], cur[i, 1]
        q = base_cost[i] + c_c * q_c * xc + (k_c if xc > 0 else 0.0) + c_a * xa + (k_a if xa > 0 else 0.0)
        for e in range(lo, hi):
            q += prob[e] * v[succ0[e, xc] + xa]
        if q <= thr:
            new[i, 0] = xc
            new[i, 1] = xa
            continue
        found = False
        for xc in range(bud // q_c + 1):
            pc = c_c * q_c * xc + (k_c if xc > 0 else 0.0)
            for xa in range(bud - xc * q_c + 1):
                q = base_cost[i] + pc + c_a * xa + (k_a if xa > 0 else 0.0)
                for e in range(lo, hi):
                    q += prob[e] * v[succ0[e, xc] + xa]
                if q <= thr:
                    new[i, 0] = xc
                    new[i, 1] = xa
                    found = True
                    break
            if found:
                break
        changed += 1
    return changed


def improve(table: TransitionTable, v: np.ndarray, current: np.ndarray, rel_tol: float = 1e-12):
    """One greedy improvement step; returns ``(decisions, min_q, n_changed)``.

    Ties within ``rel_tol`` keep the incumbent, otherwise the lexicographically
    smallest ``(x_c, x_a)`` is chosen.
    """
    p = table.params
    new = np.empty_like(current)
    qmin = np.empty(table.n_states)
    changed = _improve_kernel(
        table.ptr, table.prob, table.succ0, table.budget, table.base_cost, v,
        p.q_c, float(p.c_c), float(p.c_a), float(p.k_c), float(p.k_a),
        current, rel_tol, new, qmin,
    )
    return new, qmin, int(changed)


def bellman_residual(solution: ExactSolution) -> float:
    """Max over states of ``|v + g - min_x Q(s, x)|``."""
    _, qmin, _ = improve(solution.table, solution.v, solution.policy.decisions)
    return float(np.abs(solution.v + solution.g - qmin).max())


def policy_iteration(
    params: InstanceParams,
    model: str = "full",
    *,
    space: Optional[StateSpace] = None,
    table: Optional[TransitionTable] = None,
    initial: Optional[np.ndarray] = None,
    method: str = "direct",
    max_rounds: int = 500,
    max_sweeps: int = 1_000_000,
    state_cap: int = DEFAULT_STATE_CAP,
    rel_tol: float = 1e-12,
) -> ExactSolution:
    if table is None:
        space = space if space is not None else enumerate_states(params, model, cap=state_cap)
        table = build_transitions(space)
    space = table.space
    decisions = np.zeros((len(space), 2), dtype=np.int64) if initial is None else np.array(initial, dtype=np.int64)
    history: List[float] = []
    v = None
    converged = False
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        g, v = policy_evaluation(
            decisions, table, method=method, max_sweeps=max_sweeps, v0=v, g0=history[-1] if history else None
        )
        history.append(g)
        if len(history) > 1 and g > history[-2] + 1e-9 * max(1.0, abs(g)):
            log.warning("gain increased from %.12g to %.12g", history[-2], g)
        new, _, changed = improve(table, v, decisions, rel_tol)
        log.debug("round %d: g=%.10g, %d states changed", rounds, g, changed)
        if changed == 0:
            converged = True
            break
        decisions = new
    if not converged:
        log.warning("policy iteration hit the cap of %d rounds", max_rounds)
    policy = TabularPolicy(space, decisions)
    sol = ExactSolution(
        policy=policy,
        g=g,
        v=v,
        reference_state=space.reference,
        table=table,
        iterations=rounds,
        converged=converged,
        gain_history=history,
    )
    sol.residual = bellman_residual(sol)
    return sol


def closed_classes(P) -> List[np.ndarray]:
    """Closed communicating classes (recurrent classes) of a finite chain."""
    n_comp, labels = csgraph.connected_components(P, directed=True, connection="strong")
    coo = P.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_comp = np.zeros(n_comp, dtype=bool)
    open_comp[labels[coo.row[leaving & (coo.data > 0)]]] = True
    return [np.flatnonzero(labels == c) for c in range(n_comp) if not open_comp[c]]


def stationary_distribution(P) -> np.ndarray:
    """Unique stationary distribution; raises :class:`MultichainError` otherwise."""
    n = P.shape[0]
    classes = closed_classes(P)
    if len(classes) != 1:
        raise MultichainError(f"policy has {len(classes)} recurrent classes")
    rec = classes[0]
    Pr = P[rec][:, rec]
    m = len(rec)
    A = (sp.identity(m, format="csr") - Pr).T.tocsr()
    A = sp.vstack([sp.csr_matrix(np.ones((1, m))), A[1:]], format="csr")
    rhs = np.zeros(m)
    rhs[0] = 1.0
    x = _linear_solve(A, rhs, np.full(m, 1.0 / m))
    x = np.clip(x, 0.0, None)
    x /= x.sum()
    pi = np.zeros(n)
    pi[rec] = x
    resid = np.abs(pi @ P - pi).sum()
    if resid > 1e-10:
        raise SolverError(f"stationary distribution residual {resid:.3e}")
    return pi


def am_fraction(pi: np.ndarray, decisions: np.ndarray, q_c: int) -> float:
    am = float(pi @ decisions[:, 1])
    total = am + q_c * float(pi @ decisions[:, 0])
    return am / total if total > 0 else 0.0


def steady_state_am_fraction(solution: ExactSolution) -> float:
    """Long-run share of AM items among all ordered items under the solution."""
    decisions = solution.policy.decisions
    pi = stationary_distribution(_transition_matrix(solution.table, decisions))
    return am_fraction(pi, decisions, solution.space.params.q_c)


@dataclass
class ChainEvaluation:
    g: float
    pi: np.ndarray  # stationary distribution over ``states``
    states: np.ndarray  # reachable ordinals
    decisions: np.ndarray  # per reachable state
    breakdown: np.ndarray  # expected cost per period: purchase, holding, backorder, maintenance
    am_fraction: float


def reachable_evaluation(policy: Policy, table: TransitionTable, start: Optional[int] = None) -> ChainEvaluation:
    """Exact long-run cost of any policy on the chain reachable from ``start``.

    Only visited states are queried, so policies that are expensive to
    evaluate or defined on a different state model are fine.
    """
    space = table.space
    start = space.reference if start is None else start
    n = len(space)
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    order = [np.array([start])]
    dec_of = np.zeros((n, 2), dtype=np.int64)
    frontier = order[0]
    while len(frontier):
        dec = np.asarray(policy.decide_batch(space.states[frontier]), dtype=np.int64)
        items = dec[:, 0] * space.params.q_c + dec[:, 1]
        if (dec < 0).any() or (items > table.budget[frontier]).any():
            raise ValueError(f"{policy.name} returned an infeasible decision")
        dec_of[frontier] = dec
        _, succ, _ = table.successors_of(frontier, dec)
        succ = np.unique(succ)
        frontier = succ[~seen[succ]]
        seen[frontier] = True
        order.append(frontier)
    states = np.concatenate(order)
    local = np.full(n, -1, dtype=np.int64)
    local[states] = np.arange(len(states))
    owner, succ, prob = table.successors_of(states, dec_of[states])
    m = len(states)
    P = sp.csr_matrix((prob, (owner, local[succ])), shape=(m, m))
    pi = stationary_distribution(P)
    decisions = dec_of[states]
    purchase = table.purchase(decisions)
    breakdown = np.concatenate([[pi @ purchase], pi @ table.expected_breakdown[states]])
    return ChainEvaluation(
        g=float(breakdown.sum()),
        pi=pi,
        states=states,
        decisions=decisions,
        breakdown=breakdown,
        am_fraction=am_fraction(pi, decisions, space.params.q_c),
    )
