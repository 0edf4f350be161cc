"""Exact dense transportation-problem solver.

Classic primal transportation simplex on the spanning-tree basis
(northwest-corner start, MODI potentials, first-negative entering rule
with a leaving-arc tie-break, which suppresses cycling on the
degenerate instances that equal-mass atoms produce).  Instances here
are desk-scale, so a dense implementation with an explicit tree walk is
simpler and fast enough; the duality gap is verified on exit.
"""

from __future__ import annotations

import numpy as np

from .errors import MassMismatchError


def _northwest_corner(a, b):
    m, n = len(a), len(b)
    x = np.zeros((m, n))
    basis = []
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while i < m and j < n:
        q = min(ra[i], rb[j])
        x[i, j] = q
        basis.append((i, j))
        ra[i] -= q
        rb[j] -= q
        if i == m - 1 and j == n - 1:
            break
        if ra[i] <= rb[j] and i < m - 1:
            i += 1
        elif j < n - 1:
            j += 1
        else:
            i += 1
    return x, basis


def _potentials(basis, cost, m, n):
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    adj_rows = [[] for _ in range(m)]
    adj_cols = [[] for _ in range(n)]
    for (i, j) in basis:
        adj_rows[i].append(j)
        adj_cols[j].append(i)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, k = stack.pop()
        if kind == "r":
            for j in adj_rows[k]:
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    stack.append(("c", j))
        else:
            for i in adj_cols[k]:
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    stack.append(("r", i))
    return u, v


def _find_cycle(basis, enter, m, n):
    """Alternating cycle created by the entering arc: a path in the
    basis tree from the entering row node to its column node."""
    i0, j0 = enter
    adj = {}
    for (i, j) in basis:
        adj.setdefault(("r", i), []).append(("c", j))
        adj.setdefault(("c", j), []).append(("r", i))
    start, goal = ("r", i0), ("c", j0)
    parent = {start: None}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nxt in adj.get(node, []):
            if nxt not in parent:
                parent[nxt] = node
                stack.append(nxt)
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    path.reverse()  # from ("r", i0) to ("c", j0)
    arcs = []
    for a, b in zip(path[:-1], path[1:]):
        if a[0] == "r":
            arcs.append((a[1], b[1]))
        else:
            arcs.append((b[1], a[1]))
    # entering arc closes the cycle; arcs alternate -,+,-,... after it
    minus = arcs[0::2]
    plus = arcs[1::2]
    return minus, plus


def solve_transport(supply, demand, cost, tol: float = 1e-11,
                    max_pivots: int | None = None):
    """Exact optimum of the balanced transportation problem.

    Returns (value, plan) with ``plan`` of shape (len(supply),
    len(demand)).  Zero-mass rows and columns are allowed.
    """
    a = np.asarray(supply, dtype=float)
    b = np.asarray(demand, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if abs(a.sum() - b.sum()) > 1e-9 * max(1.0, a.sum()):
        raise MassMismatchError(f"supply {a.sum()} vs demand {b.sum()}")
    rows = np.nonzero(a > 0)[0]
    cols = np.nonzero(b > 0)[0]
    plan = np.zeros(cost.shape)
    if len(rows) == 0 or len(cols) == 0:
        return 0.0, plan
    a_r, b_r = a[rows], b[cols]
    c_r = cost[np.ix_(rows, cols)]
    m, n = len(rows), len(cols)

    x, basis = _northwest_corner(a_r, b_r)
    basis_set = set(basis)
    if max_pivots is None:
        max_pivots = 200 * (m + n) * max(m, n)
    for _ in range(max_pivots):
        u, v = _potentials(basis, c_r, m, n)
        rc = c_r - u[:, None] - v[None, :]
        enter = None
        best = -tol
        for i in range(m):
            js = np.nonzero(rc[i] < best)[0]
            if len(js):
                enter = (i, int(js[np.argmin(rc[i, js])]))
                break
        if enter is None:
            break
        minus, plus = _find_cycle(basis, enter, m, n)
        delta = min(x[i, j] for (i, j) in minus)
        leave = next((i, j) for (i, j) in minus if x[i, j] == delta)
        for (i, j) in minus:
            x[i, j] -= delta
        for (i, j) in plus:
            x[i, j] += delta
        x[enter] = delta
        basis_set.remove(leave)
        basis_set.add(enter)
        basis = list(basis_set)
    else:
        raise RuntimeError("transportation simplex exceeded pivot budget")

    u, v = _potentials(basis, c_r, m, n)
    value = float((c_r * x).sum())
    dual = float(a_r @ u + b_r @ v)
    if abs(value - dual) > 1e-9 * max(1.0, abs(value)):
        raise RuntimeError(f"duality gap {value - dual} exceeds tolerance")
    plan[np.ix_(rows, cols)] = x
    return value, plan
