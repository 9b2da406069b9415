"""Deterministic dense two-phase simplex over the assembled LP form.

Solves min c.x subject to A_eq x = b_eq, A_ub x <= b_ub, 0 <= x <= upper.
Upper bounds become explicit slack rows (problems here are tiny, so the
simplicity is worth more than a bounded-variable ratio test). Phase one
minimizes the sum of artificial variables; artificial columns stay in
the tableau afterwards but are barred from entering, which keeps every
row priced for the dual bound. Identical inputs always produce the
identical solution vector: pivot choice is Dantzig with lowest-index
ties, with Bland's rule taking over after a run of degenerate pivots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .fairness_lp import AssembledLP

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"


class SolverError(RuntimeError):
    def __init__(self, message: str, status: str):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray | None
    objective: float
    status: str
    iterations: int
    dual_bound: float = float("nan")
    max_eq_residual: float = float("nan")
    max_ub_violation: float = float("nan")


def _pivot(T: np.ndarray, basis: np.ndarray, r: int, j: int) -> None:
    # driver-level pivot; same arithmetic as the kernels
    piv = T[r, j]
    T[r, :] /= piv
    colv = T[:, j].copy()
    colv[r] = 0.0
    T -= np.outer(colv, T[r, :])
    T[:, j] = 0.0
    T[r, j] = 1.0
    basis[r] = j


def solve(lp: AssembledLP, tol: float = 1e-9, max_iter: int | None = None) -> LPSolution:
    """Solve to an optimal basic feasible solution.

    Never raises for infeasible/unbounded/stalled problems; those come
    back in the status field.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = lp.n_vars
    if np.any(lp.lower != 0.0):
        raise ValueError("solver expects zero lower bounds")
    piv_tol = 1e-9
    bland_after = 64

    bounded = np.flatnonzero(np.isfinite(lp.upper))
    if np.any(lp.upper[bounded] < 0.0):
        return LPSolution(None, float("nan"), INFEASIBLE, 0)
    m_eq, m_ub, m_bnd = len(lp.b_eq), len(lp.b_ub), len(bounded)
    m = m_eq + m_ub + m_bnd
    n_slack = m_ub + m_bnd

    A = np.zeros((m, n + n_slack))
    b = np.zeros(m)
    unit_col = np.full(m, -1, dtype=np.int64)   # priced unit column per row
    unit_sign = np.ones(m)
    if m_eq:
        A[:m_eq, :n] = lp.a_eq
        b[:m_eq] = lp.b_eq
    if m_ub:
        A[m_eq:m_eq + m_ub, :n] = lp.a_ub
        b[m_eq:m_eq + m_ub] = lp.b_ub
    for s, row in enumerate(range(m_eq, m_eq + m_ub)):
        A[row, n + s] = 1.0
        unit_col[row] = n + s
    for s, (row, var) in enumerate(zip(range(m_eq + m_ub, m), bounded)):
        A[row, var] = 1.0
        A[row, n + m_ub + s] = 1.0
        b[row] = lp.upper[var]
        unit_col[row] = n + m_ub + s
    flip = b < 0
    A[flip] *= -1.0
    b[flip] = -b[flip]
    unit_sign[flip] = -1.0

    # rows whose unit column has coefficient +1 start with it basic;
    # the rest (eq rows, flipped ub rows) get an artificial
    basis = np.full(m, -1, dtype=np.int64)
    need_art = []
    for i in range(m):
        if unit_col[i] >= 0 and unit_sign[i] > 0:
            basis[i] = unit_col[i]
        else:
            need_art.append(i)
    n_art = len(need_art)
    ncols = n + n_slack + n_art
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n + n_slack] = A
    T[:m, ncols] = b
    for k, i in enumerate(need_art):
        col = n + n_slack + k
        T[i, col] = 1.0
        basis[i] = col
        unit_col[i] = col
        unit_sign[i] = 1.0
    n_enterable = n + n_slack
    if max_iter is None:
        max_iter = max(2000, 200 * (m + ncols))

    # phase 1: drive the artificials to zero
    iterations = 0
    if n_art:
        T[m, n + n_slack:ncols] = 1.0
        for i in need_art:
            T[m, :] -= T[i, :]
        status, its = _kernels.simplex_iterate(T, basis, n_enterable, tol, piv_tol,
                                               max_iter, bland_after)
        iterations += its
        if status == _kernels._STATUS_ITERLIMIT:
            return LPSolution(None, float("nan"), ITERATION_LIMIT, iterations)
        if -T[m, ncols] > 1e-8:
            return LPSolution(None, float("nan"), INFEASIBLE, iterations)
        # pivot lingering zero-level artificials out where possible; rows
        # where no real column remains are redundant and dropped outright
        for i in range(m):
            if basis[i] >= n_enterable:
                row = np.abs(T[i, :n_enterable])
                j = int(np.argmax(row))
                if row[j] > piv_tol:
                    _pivot(T, basis, i, j)
        keep = np.flatnonzero(basis < n_enterable)
        if len(keep) < m:
            T = T[np.append(keep, m)]
            basis = basis[keep]
            unit_col = unit_col[keep]
            unit_sign = unit_sign[keep]
            b = b[keep]
            m = len(keep)

    # phase 2: true objective
    T[m, :] = 0.0
    T[m, :n] = lp.c
    for i in range(m):
        if basis[i] < n:
            cj = lp.c[basis[i]]
            if cj != 0.0:
                T[m, :] -= cj * T[i, :]
    status, its = _kernels.simplex_iterate(T, basis, n_enterable, tol, piv_tol,
                                           max_iter, bland_after)
    iterations += its
    if status == _kernels._STATUS_UNBOUNDED:
        return LPSolution(None, float("nan"), UNBOUNDED, iterations)
    if status == _kernels._STATUS_ITERLIMIT:
        return LPSolution(None, float("nan"), ITERATION_LIMIT, iterations)

    x_full = np.zeros(ncols)
    x_full[basis] = T[:m, ncols]
    x = x_full[:n].copy()
    objective = float(lp.c @ x)
    # duals from the reduced costs of each row's priced unit column
    y = np.array([-unit_sign[i] * T[m, unit_col[i]] for i in range(m)])
    dual_bound = float(y @ b)
    eq_res = float(np.max(np.abs(lp.a_eq @ x - lp.b_eq))) if m_eq else 0.0
    ub_viol = float(np.max(np.maximum(lp.a_ub @ x - lp.b_ub, 0.0))) if m_ub else 0.0
    return LPSolution(x=x, objective=objective, status=OPTIMAL, iterations=iterations,
                      dual_bound=dual_bound, max_eq_residual=eq_res,
                      max_ub_violation=ub_viol)
