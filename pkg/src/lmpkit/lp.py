"""Dense two-phase simplex for small standard-form linear programs.

Solves  min c.x  s.t.  A x = b, x >= 0  with Bland's entering/leaving rule,
so cycling is impossible.  Problem sizes here are tiny (tens of rows), so a
full dense tableau is the simplest correct choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

__all__ = ["LpResult", "solve_standard_form"]

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-11


@dataclass(frozen=True)
class LpResult:
    status: str  # "optimal", "infeasible", "unbounded"
    x: np.ndarray | None
    objective: float | None


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for i in range(tableau.shape[0]):
        if i != row and tableau[i, col] != 0.0:
            tableau[i] -= tableau[i, col] * tableau[row]
    basis[row] = col


def _iterate(tableau: np.ndarray, basis: np.ndarray, cost: np.ndarray, ncols: int) -> str:
    """Run simplex iterations in place; returns 'optimal' or 'unbounded'."""
    m = tableau.shape[0]
    max_iter = 50_000 + 200 * (m + ncols)
    for _ in range(max_iter):
        reduced = cost.copy()
        for i in range(m):
            if cost[basis[i]] != 0.0:
                reduced -= cost[basis[i]] * tableau[i, :-1]
        entering = -1
        for j in range(ncols):  # Bland: lowest eligible index enters
            if reduced[j] < -_COST_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        ratios = []
        for i in range(m):
            a = tableau[i, entering]
            if a > _PIVOT_TOL:
                ratios.append((tableau[i, -1] / a, basis[i], i))
        if not ratios:
            return "unbounded"
        best = min(r[0] for r in ratios)
        # Bland: among minimal ratios, the row whose basic variable has the
        # lowest index leaves.
        band = best + 1e-10 * (1.0 + abs(best))
        leave_row = min((r for r in ratios if r[0] <= band), key=lambda r: r[1])[2]
        _pivot(tableau, basis, leave_row, entering)
    raise NumericalError("simplex iteration limit exceeded")


def solve_standard_form(
    c: np.ndarray, A: np.ndarray, b: np.ndarray
) -> LpResult:
    """Two-phase dense simplex on min c.x, A x = b, x >= 0."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    if A.ndim != 2 or A.shape != (b.size, c.size):
        raise NumericalError("inconsistent LP dimensions")
    m, n = A.shape
    A = A.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # Phase 1: artificial basis.
    tableau = np.hstack([A, np.eye(m), b.reshape(-1, 1)])
    basis = np.arange(n, n + m)
    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    status = _iterate(tableau, basis, phase1_cost, n + m)
    if status == "unbounded":  # cannot happen with artificials, defensive
        raise NumericalError("phase-1 simplex reported unbounded")
    infeasibility = float(phase1_cost[basis] @ tableau[:, -1])
    scale = 1.0 + float(np.max(np.abs(b))) if b.size else 1.0
    if infeasibility > 1e-8 * scale:
        return LpResult(status="infeasible", x=None, objective=None)

    # Drive remaining artificials out of the basis, or drop redundant rows.
    keep_rows = []
    for i in range(m):
        if basis[i] >= n:
            pivot_col = -1
            for j in range(n):
                if abs(tableau[i, j]) > _PIVOT_TOL:
                    pivot_col = j
                    break
            if pivot_col >= 0:
                _pivot(tableau, basis, i, pivot_col)
                keep_rows.append(i)
            # else: redundant constraint row, dropped below
        else:
            keep_rows.append(i)
    if len(keep_rows) < m:
        tableau = tableau[keep_rows]
        basis = basis[keep_rows]

    # Phase 2 on the original columns.
    tableau = np.hstack([tableau[:, :n], tableau[:, -1:]])
    phase2_cost = c.copy()
    status = _iterate(tableau, basis, phase2_cost, n)
    if status == "unbounded":
        return LpResult(status="unbounded", x=None, objective=None)
    x = np.zeros(n)
    for i, col in enumerate(basis):
        x[col] = tableau[i, -1]
    return LpResult(status="optimal", x=x, objective=float(c @ x))
