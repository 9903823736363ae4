"""Dense two-phase primal simplex with Bland's rule, for the small tree LPs.

Solves   min c.z   s.t.  A z >= b,  z >= 0

and returns a vertex (basic) optimal solution, which is what gives the sparse
support of the extracted tree distributions.  Bland's rule (smallest eligible
index for both entering and leaving variable) rules out cycling; the LPs here
have a handful of rows, so speed is irrelevant.
"""
from __future__ import annotations

import numpy as np

TOL = 1e-9


class LPError(RuntimeError):
    pass


class LPInfeasible(LPError):
    pass


class LPUnbounded(LPError):
    pass


def solve_min_ge(c, A, b) -> tuple[np.ndarray, float]:
    """Minimize c.z subject to A z >= b, z >= 0; returns (z*, objective)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    # Standard form A z - s = b with surplus s; flip rows with negative b so
    # the right-hand side is nonnegative and artificials form a unit basis.
    T = np.hstack([A, -np.eye(m)])
    rhs = b.copy()
    for i in range(m):
        if rhs[i] < 0:
            T[i] *= -1.0
            rhs[i] *= -1.0
    total = n + m
    art = np.eye(m)
    tab = np.hstack([T, art])
    basis = list(range(total, total + m))
    # Phase 1: minimize the artificial sum.
    cost1 = np.zeros(total + m)
    cost1[total:] = 1.0
    tab, rhs, basis, obj1 = _simplex(tab, rhs, basis, cost1)
    if obj1 > 1e-7:
        raise LPInfeasible(f"phase-1 objective {obj1}")
    # Drive leftover artificials out of the basis where possible.
    for i, bi in enumerate(basis):
        if bi >= total:
            pivot_col = next(
                (j for j in range(total) if abs(tab[i, j]) > TOL), None
            )
            if pivot_col is not None:
                _pivot(tab, rhs, i, pivot_col)
                basis[i] = pivot_col
    keep = [i for i, bi in enumerate(basis) if bi < total]
    tab = tab[keep][:, :total]
    rhs = rhs[keep]
    basis = [basis[i] for i in keep]
    cost2 = np.zeros(total)
    cost2[:n] = c
    tab, rhs, basis, obj2 = _simplex(tab, rhs, basis, cost2)
    z = np.zeros(total)
    for i, bi in enumerate(basis):
        z[bi] = rhs[i]
    return z[:n], float(obj2)


def _pivot(tab, rhs, row, col):
    piv = tab[row, col]
    tab[row] /= piv
    rhs[row] /= piv
    for i in range(tab.shape[0]):
        if i != row and abs(tab[i, col]) > 0:
            rhs[i] -= tab[i, col] * rhs[row]
            tab[i] -= tab[i, col] * tab[row]


def _simplex(tab, rhs, basis, cost):
    tab = tab.copy()
    rhs = rhs.copy()
    basis = list(basis)
    for _ in range(100000):
        y = cost[basis] @ tab
        reduced = cost - y
        entering = next((j for j in range(tab.shape[1]) if reduced[j] < -TOL), None)
        if entering is None:
            break
        ratios = [
            (rhs[i] / tab[i, entering], basis[i], i)
            for i in range(tab.shape[0])
            if tab[i, entering] > TOL
        ]
        if not ratios:
            raise LPUnbounded("no leaving variable")
        leaving_row = min(ratios)[2]
        _pivot(tab, rhs, leaving_row, entering)
        basis[leaving_row] = entering
    else:
        raise LPError("simplex iteration cap reached")
    obj = float(cost[basis] @ rhs)
    return tab, rhs, basis, obj
