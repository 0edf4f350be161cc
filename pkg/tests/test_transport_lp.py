"""Exact transportation solver against brute-force vertex enumeration."""

from itertools import combinations

import numpy as np
import pytest

from vvot.errors import MassMismatchError
from vvot.transport_lp import solve_transport


def brute_force_transport(a, b, cost, tol=1e-12):
    """Enumerate all spanning-tree bases of the bipartite arc set, solve
    each by leaf elimination, and keep feasible vertices."""
    m, n = len(a), len(b)
    arcs = [(i, j) for i in range(m) for j in range(n)]
    best = np.inf
    for sub in combinations(arcs, m + n - 1):
        flows = _tree_flows(sub, a, b, m, n)
        if flows is None:
            continue
        if min(flows.values()) < -tol:
            continue
        val = sum(cost[i, j] * f for (i, j), f in flows.items())
        best = min(best, val)
    return best


def _tree_flows(arcs, a, b, m, n):
    deg = {}
    inc = {}
    for (i, j) in arcs:
        for node in (("r", i), ("c", j)):
            deg[node] = deg.get(node, 0) + 1
            inc.setdefault(node, []).append((i, j))
    if len(deg) < m + n:
        return None
    remaining = dict.fromkeys(arcs, True)
    bal = {("r", i): a[i] for i in range(m)}
    bal.update({("c", j): b[j] for j in range(n)})
    flows = {}
    active_deg = dict(deg)
    for _ in range(len(arcs)):
        leaf = next((nd for nd, d in active_deg.items() if d == 1), None)
        if leaf is None:
            return None  # cycle present
        arc = next(x for x in inc[leaf] if remaining[x])
        flows[arc] = bal[leaf]
        remaining[arc] = False
        i, j = arc
        other = ("c", j) if leaf == ("r", i) else ("r", i)
        bal[other] -= bal[leaf]
        bal[leaf] = 0.0
        for nd in (leaf, other):
            active_deg[nd] -= 1
        inc[leaf] = [x for x in inc[leaf] if remaining[x]]
        inc[other] = [x for x in inc[other] if remaining[x]]
    return flows


class TestSolveTransport:
    def test_identity(self):
        val, plan = solve_transport([0.5, 0.5], [0.5, 0.5],
                                    np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert val == 0.0
        assert np.allclose(plan, np.diag([0.5, 0.5]))

    def test_mass_mismatch(self):
        with pytest.raises(MassMismatchError):
            solve_transport([1.0], [0.5], np.zeros((1, 1)))

    def test_zero_rows_allowed(self):
        val, plan = solve_transport([1.0, 0.0], [0.0, 1.0],
                                    np.array([[3.0, 2.0], [1.0, 0.0]]))
        assert val == pytest.approx(2.0)
        assert plan[0, 1] == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(12))
    def test_against_brute_force_3x3(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.dirichlet(np.ones(3))
        b = rng.dirichlet(np.ones(3))
        cost = rng.uniform(0, 4, (3, 3))
        val, plan = solve_transport(a, b, cost)
        ref = brute_force_transport(a, b, cost)
        assert val == pytest.approx(ref, abs=1e-10)
        assert np.allclose(plan.sum(axis=1), a, atol=1e-12)
        assert np.allclose(plan.sum(axis=0), b, atol=1e-12)
        assert np.all(plan >= -1e-14)

    @pytest.mark.parametrize("seed", range(6))
    def test_degenerate_equal_masses(self, seed):
        rng = np.random.default_rng(100 + seed)
        a = np.full(4, 0.25)
        b = np.full(4, 0.25)
        cost = rng.integers(0, 3, (4, 4)).astype(float)
        val, plan = solve_transport(a, b, cost)
        ref = brute_force_transport(a, b, cost)
        assert val == pytest.approx(ref, abs=1e-10)

    def test_rectangular(self):
        rng = np.random.default_rng(5)
        a = rng.dirichlet(np.ones(2))
        b = rng.dirichlet(np.ones(4))
        cost = rng.uniform(0, 2, (2, 4))
        val, plan = solve_transport(a, b, cost)
        ref = brute_force_transport(a, b, cost)
        assert val == pytest.approx(ref, abs=1e-10)

    def test_larger_instance_marginals(self):
        rng = np.random.default_rng(11)
        a = rng.dirichlet(np.ones(12))
        b = rng.dirichlet(np.ones(15))
        cost = rng.uniform(0, 5, (12, 15))
        val, plan = solve_transport(a, b, cost)
        assert np.allclose(plan.sum(axis=1), a, atol=1e-12)
        assert np.allclose(plan.sum(axis=0), b, atol=1e-12)
        from scipy.optimize import linprog
        A_eq = []
        b_eq = []
        for i in range(12):
            row = np.zeros(12 * 15)
            row[i * 15:(i + 1) * 15] = 1.0
            A_eq.append(row)
            b_eq.append(a[i])
        for j in range(15):
            row = np.zeros(12 * 15)
            row[j::15] = 1.0
            A_eq.append(row)
            b_eq.append(b[j])
        res = linprog(cost.ravel(), A_eq=np.array(A_eq), b_eq=np.array(b_eq),
                      bounds=(0, None), method="highs")
        assert val == pytest.approx(res.fun, abs=1e-9)
