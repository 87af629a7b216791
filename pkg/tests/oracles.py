"""Independent reference implementations used only by the tests.

These deliberately avoid the package's array code paths: states are
``SystemState`` objects discovered by breadth-first search through the
scalar transition function, values live in dicts.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy import stats

from dualsource.core import model
from dualsource.core.params import Decision, FailureRealization, SystemState


def reachable_states(params, start=None):
    """Every state reachable from ``start`` under *some* feasible decision."""
    start = start or SystemState.initial(params)
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for d in model.feasible_decisions(s, params):
            for nxt, _ in model.enumerate_transitions(s, d, params):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    return sorted(seen, key=lambda s: s.to_array().tolist())


def brute_force_states(params):
    """Nested-loop enumeration of the constrained state space (full model)."""
    import itertools

    out = []
    top = params.s_max + params.n
    for n_c in range(params.n + 1):
        for n_a in range(params.n + 1 - n_c):
            for s_c in range(params.s_max + 1):
                for s_a in range(params.s_max + 1):
                    for u_c in itertools.product(range(top // params.q_c + 1), repeat=params.l_c):
                        for u_a in itertools.product(range(top + 1), repeat=params.l_a):
                            st = SystemState(n_c, n_a, s_c, s_a, u_c, u_a)
                            b = model.backorders(st, params)
                            if s_c + s_a > 0 and b > 0:
                                continue
                            if model.inventory_position(st, params) > params.s_max:
                                continue
                            out.append(st)
    return out


def _q_table(params, states):
    index = {s: i for i, s in enumerate(states)}
    table = []
    for s in states:
        row = []
        for d in model.feasible_decisions(s, params):
            cost = model.expected_period_cost(s, d, params)
            succ = [(index[n], p) for n, p in model.enumerate_transitions(s, d, params)]
            row.append((d, cost, succ))
        table.append(row)
    return table


def relative_value_iteration(params, states=None, tol=1e-11, max_sweeps=100_000, tau=0.5):
    """Optimal gain by relative value iteration with an aperiodicity transform."""
    states = states or reachable_states(params)
    table = _q_table(params, states)
    ref = states.index(SystemState.initial(params))
    v = np.zeros(len(states))
    for sweep in range(max_sweeps):
        w = np.empty_like(v)
        for i, row in enumerate(table):
            w[i] = min(c + sum(p * v[j] for j, p in succ) for _, c, succ in row)
        w = tau * v + (1 - tau) * w
        diff = w - v
        v = w - w[ref]
        if diff.max() - diff.min() < tol * (1 - tau):
            g = 0.5 * (diff.max() + diff.min()) / (1 - tau)
            policy = {}
            for i, row in enumerate(table):
                qs = [c + sum(p * v[j] for j, p in succ) for _, c, succ in row]
                policy[states[i]] = row[int(np.argmin(qs))][0]
            return g, dict(zip(states, v)), policy
    raise RuntimeError("oracle value iteration did not converge")


def evaluate_policy(params, decide, states=None):
    """Gain of a fixed policy by a dense linear solve on reachable states."""
    start = SystemState.initial(params)
    if states is None:
        seen = {start}
        queue = deque([start])
        while queue:
            s = queue.popleft()
            for nxt, _ in model.enumerate_transitions(s, decide(s), params):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        states = sorted(seen, key=lambda s: s.to_array().tolist())
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    c = np.zeros(n)
    for i, s in enumerate(states):
        d = decide(s)
        c[i] = model.expected_period_cost(s, d, params)
        for nxt, p in model.enumerate_transitions(s, d, params):
            P[i, index[nxt]] += p
    # stationary distribution of the (unichain) policy
    A = np.vstack([(np.eye(n) - P).T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    return float(pi @ c)


def nbinom_tail_by_summation(mean, var, k):
    """P(D > k) by summing the pmf from 0..k directly."""
    if np.isclose(var, mean):
        pmf = [stats.poisson.pmf(j, mean) for j in range(k + 1)]
    else:
        r = mean**2 / (var - mean)
        p = mean / var
        pmf = [stats.nbinom.pmf(j, r, p) for j in range(k + 1)]
    return 1.0 - sum(pmf)


def rls_batch_fit(X, y):
    return np.linalg.lstsq(X, y, rcond=None)[0]


def gamma_from_rho(rho, mu_c, mu_a):
    return rho * mu_c / ((1 - rho) * mu_a + rho * mu_c)


def rho_from_gamma(gamma, mu_c, mu_a):
    return gamma * mu_a / (gamma * mu_a + (1 - gamma) * mu_c)


__all__ = [
    "Decision",
    "FailureRealization",
    "brute_force_states",
    "evaluate_policy",
    "gamma_from_rho",
    "nbinom_tail_by_summation",
    "reachable_states",
    "relative_value_iteration",
    "rho_from_gamma",
    "rls_batch_fit",
]
