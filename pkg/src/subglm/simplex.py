"""Dense two-phase simplex with Bland's rule.

Solves  min c'x  subject to  A x <= b,  x >= 0  exactly enough for the small
row programs of the constrained inverse fit (tens of variables).  Bland's
anti-cycling rule makes termination unconditional; there is no iterative
tolerance to tune beyond the pivot threshold.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InfeasibleProgramError, UnboundedProgramError

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
MAX_PIVOTS = 100_000


@dataclass
class LpResult:
    x: np.ndarray
    objective: float


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _run_simplex(T, basis, cost, allowed):
    """Minimize cost over the canonical tableau; returns the objective value.

    ``allowed`` masks columns eligible to enter the basis.  Bland's rule:
    entering column is the smallest-index allowed column with negative
    reduced cost; leaving row breaks ratio ties by smallest basis index.
    """
    m, width = T.shape
    ncols = width - 1
    for _ in range(MAX_PIVOTS):
        red = cost - cost[basis] @ T[:, :ncols]
        entering = -1
        for j in range(ncols):
            if allowed[j] and red[j] < -PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return float(cost[basis] @ T[:, -1])
        ratios = np.full(m, np.inf)
        col = T[:, entering]
        pos = col > PIVOT_TOL
        ratios[pos] = T[pos, -1] / col[pos]
        best = np.inf
        leave = -1
        for i in range(m):
            if ratios[i] < best - PIVOT_TOL or (
                ratios[i] < best + PIVOT_TOL and leave >= 0 and basis[i] < basis[leave]
            ):
                best = ratios[i]
                leave = i
        if leave < 0 or not np.isfinite(best):
            raise UnboundedProgramError("linear program unbounded below")
        _pivot(T, basis, leave, entering)
    raise ConvergenceError("simplex pivot cap exceeded")


def solve_lp(c, A, b) -> LpResult:
    """min c'x s.t. A x <= b, x >= 0 (b may have negative entries)."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, nv = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    n_art = int(neg.sum())
    ncols = nv + m + n_art
    T = np.zeros((m, ncols + 1))
    T[:, :nv] = A
    T[np.arange(m), nv + np.arange(m)] = np.where(neg, -1.0, 1.0)
    T[:, -1] = b
    basis = np.empty(m, dtype=np.int64)
    art = nv + m
    for i in range(m):
        if neg[i]:
            T[i, art] = 1.0
            basis[i] = art
            art += 1
        else:
            basis[i] = nv + i

    allowed = np.ones(ncols, dtype=bool)
    if n_art:
        cost1 = np.zeros(ncols)
        cost1[nv + m:] = 1.0
        phase1 = _run_simplex(T, basis, cost1, allowed)
        if phase1 > FEAS_TOL:
            raise InfeasibleProgramError(f"infeasible program (phase-1 value {phase1:.3e})")
        # drive any artificial still basic (at zero level) out of the basis
        for i in range(m):
            if basis[i] >= nv + m:
                for j in range(nv + m):
                    if abs(T[i, j]) > PIVOT_TOL:
                        _pivot(T, basis, i, j)
                        break
        allowed[nv + m:] = False

    cost2 = np.zeros(ncols)
    cost2[:nv] = c
    obj = _run_simplex(T, basis, cost2, allowed)
    x = np.zeros(ncols)
    for i in range(m):
        x[basis[i]] = T[i, -1]
    return LpResult(x=x[:nv], objective=obj)
