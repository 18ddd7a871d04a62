"""Deliberately naive oracles for the test suite and the checking CLI commands.

Nothing here imports from the optimized modules: every quantity is replayed
from its definition with plain loops over nested lists.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np

from .errors import CapabilityError, ParameterError


def _raw(L):
    """Nested-list view ``raw[t][s][i]`` (0-based t) of a tensor or array."""
    values = getattr(L, "values", L)
    return np.asarray(values, dtype=np.float64).tolist()


def oracle_composite(raw, t, actions_by_round, d):
    """Composite loss at 1-based round ``t``; ``actions_by_round[tau]`` for 1-based ``tau``."""
    total = 0.0
    for s in range(d + 1):
        tau = t - s
        if tau >= 1:
            total += raw[tau - 1][s][actions_by_round[tau]]
    return total


def oracle_composite_losses(L, actions):
    raw = _raw(L)
    T, d = len(raw), len(raw[0]) - 1
    by_round = {t + 1: int(a) for t, a in enumerate(actions)}
    return [oracle_composite(raw, t, by_round, d) for t in range(1, T + 1)]


def oracle_composite_regret(L, actions) -> float:
    """Realized regret replayed with a triple loop."""
    raw = _raw(L)
    T, d, K = len(raw), len(raw[0]) - 1, len(raw[0][0])
    by_round = {t + 1: int(a) for t, a in enumerate(actions)}
    paid = 0.0
    for t in range(1, T + 1):
        paid += oracle_composite(raw, t, by_round, d)
    best = math.inf
    for k in range(K):
        constant = {tau: k for tau in range(1, T + 1)}
        total = 0.0
        for t in range(1, T + 1):
            total += oracle_composite(raw, t, constant, d)
        best = min(best, total)
    return paid - best


@functools.lru_cache(maxsize=8)
def _compositions(n, k):
    """All k-tuples of nonnegative integers summing to n, as an array."""
    if k == 1:
        return np.array([[n]])
    rows = []
    for cuts in itertools.combinations(range(n + k - 1), k - 1):
        prev = -1
        row = []
        for c in cuts:
            row.append(c - prev - 1)
            prev = c
        row.append(n + k - 2 - prev)
        rows.append(row)
    out = np.array(rows)
    out.setflags(write=False)
    return out


def _objective(Q, w, eta):
    return Q @ w - 2.0 * eta * np.sqrt(Q).sum(axis=1)


def oracle_tsallis_argmin(w, eta: float, grid_step: float = 1e-3) -> np.ndarray:
    """Minimize ``sum w_i q_i - 2 eta sum sqrt(q_i)`` over a simplex grid.

    The grid has spacing ``grid_step`` (``1/grid_step`` must be an integer).
    The search is exhaustive on a 0.01 lattice, then exhaustive inside a box
    of +-3 coarse cells around the incumbent at each finer lattice; the
    objective is strictly convex, so the box always contains the fine optimum
    in practice.
    """
    w = np.asarray(w, dtype=np.float64)
    K = w.size
    if K > 4:
        raise CapabilityError(f"grid argmin supports K <= 4, got K={K}")
    if not 0 < grid_step <= 1e-2:
        raise ParameterError("grid_step must lie in (0, 0.01]")
    if K == 1:
        return np.array([1.0])
    n_final = round(1.0 / grid_step)
    if abs(n_final * grid_step - 1.0) > 1e-9:
        raise ParameterError("1/grid_step must be an integer")

    levels = [100]
    while levels[-1] * 10 < n_final:
        levels.append(levels[-1] * 10)
    if levels[-1] != n_final:
        levels.append(n_final)

    n = levels[0]
    cand = _compositions(n, K)
    best = cand[np.argmin(_objective(cand / n, w, eta))]
    for n_next in levels[1:]:
        ratio = n_next // n if n_next % n == 0 else n_next / n
        center = best[:-1] * ratio
        radius = int(math.ceil(3 * ratio))
        axes = [np.arange(max(0, int(c) - radius), min(n_next, int(c) + radius) + 1)
                for c in center]
        grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(K - 1, -1).T
        last = n_next - grid.sum(axis=1)
        grid = np.column_stack([grid, last])[last >= 0]
        best = grid[np.argmin(_objective(grid / n_next, w, eta))]
        n = n_next
    return best / n


def check_ragionieri(c, a: int, b: int, d: int) -> bool:
    """Evaluate both sides of the weighted-window summation identity.

    ``c[k]`` holds ``c_{a-d+k}``, so ``c`` covers indices ``a-d .. b+d``.
    """
    if a > b or d < 0:
        raise ParameterError("need a <= b and d >= 0")
    c = list(c)
    if len(c) != b - a + 2 * d + 1:
        raise ParameterError(f"c must cover indices a-d..b+d ({b - a + 2 * d + 1} values)")

    def at(t):
        return c[t - (a - d)]

    lhs = 0.0
    for t in range(a - d, a):
        lhs += (t - a + d + 1) * at(t)
    for t in range(a, b + 1):
        lhs += (d + 1) * at(t)
    for t in range(b + 1, b + d + 1):
        lhs += (b + d + 1 - t) * at(t)
    rhs = 0.0
    for tau in range(a, b + d + 1):
        for t in range(tau - d, tau + 1):
            rhs += at(t)
    return abs(lhs - rhs) <= 1e-9 * (1 + abs(rhs))


def check_window_bound(L) -> bool:
    """Every (d+1)-window of constant-arm composite losses sums to at most 2d+1."""
    raw = _raw(L)
    T, d, K = len(raw), len(raw[0]) - 1, len(raw[0][0])
    for i in range(K):
        constant = {tau: i for tau in range(1, T + 1)}
        comp = {t: oracle_composite(raw, t, constant, d) for t in range(1, T + 1)}
        for t in range(2 * d + 1, T - d + 1):
            window = 0.0
            for tau in range(t - d, t + 1):
                window += comp[tau]
            if window > 2 * d + 1 + 1e-9:
                return False
    return True


def oracle_update_rounds(bits, d: int) -> list:
    """1-based update rounds of a Boolean sequence, straight from the definition."""
    out = []
    for t in range(1, len(bits) + 1):
        if t < 2 * d + 1:
            continue
        prod = bits[t - 1]
        for s in range(1, 2 * d + 1):
            prod *= 1 - bits[t - s - 1]
        if prod == 1:
            out.append(t)
    return out


def check_reduction(L, linear_losses, actions, tol: float = 1e-12) -> list:
    """Replay the linear-bandit embedding identities on one action sequence.

    Returns a list of human-readable failures (empty when everything holds):
    composite losses vanish off multiples of ``d+1`` and equal
    ``(d+1) * <l_u, q_t>`` on them, where ``q_t`` is the empirical distribution
    of the last ``d+1`` actions; and the best constant-arm composite total is
    ``d+1`` times the best linear total.
    """
    raw = _raw(L)
    lin = np.asarray(linear_losses, dtype=np.float64).tolist()
    T, d, K = len(raw), len(raw[0]) - 1, len(raw[0][0])
    by_round = {t + 1: int(a) for t, a in enumerate(actions)}
    failures = []
    for t in range(1, T + 1):
        got = oracle_composite(raw, t, by_round, d)
        if t % (d + 1):
            want = 0.0
        else:
            q = [0.0] * K
            for s in range(t - d, t + 1):
                q[by_round[s]] += 1.0 / (d + 1)
            u = -(-t // (d + 1))
            want = (d + 1) * sum(lin[u - 1][j] * q[j] for j in range(K))
        if abs(got - want) > tol:
            failures.append(f"t={t}: composite {got!r} != {want!r}")

    best_comp = math.inf
    for k in range(K):
        constant = {tau: k for tau in range(1, T + 1)}
        best_comp = min(best_comp, sum(oracle_composite(raw, t, constant, d)
                                       for t in range(1, T + 1)))
    best_lin = min((d + 1) * sum(row[k] for row in lin) for k in range(K))
    if abs(best_comp - best_lin) > 1e-9 * (1 + abs(best_lin)):
        failures.append(f"comparator {best_comp!r} != (d+1) * linear {best_lin!r}")
    return failures
