"""Dense revised simplex with Bland's rule for desk-scale linear programs.

    min c @ x  s.t.  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  lower <= x <= upper

Lower bounds must be finite; finite upper bounds become extra inequality
rows. Phase one starts from slack columns wherever a row allows it and from
artificial columns elsewhere.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import ConvergenceError, InfeasibleError, LrpError, UnboundedError
from app.schemas.fleet import LpSolution

logger = logging.getLogger(__name__)


def _as_system(A, b, n: int) -> Tuple[np.ndarray, np.ndarray]:
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if A.shape != (b.size, n):
        raise LrpError(f"constraint matrix shape {A.shape} does not match ({b.size}, {n})")
    return A, b


def _as_bounds(bounds: Optional[Sequence[Tuple[Optional[float], Optional[float]]]], n: int):
    if bounds is None:
        return np.zeros(n), np.full(n, np.inf)
    if len(bounds) != n:
        raise LrpError(f"{len(bounds)} bounds for {n} variables")
    lower = np.array([-np.inf if lo is None else lo for lo, _ in bounds], dtype=float)
    upper = np.array([np.inf if hi is None else hi for _, hi in bounds], dtype=float)
    if not np.isfinite(lower).all():
        raise LrpError("free variables are not supported; give every variable a finite lower bound")
    return lower, upper


def _simplex(A, b, cost, basis, tol, max_iter, phase):
    m = A.shape[0]
    iterations = 0
    while True:
        B = A[:, basis]
        x_b = np.maximum(np.linalg.solve(B, b), 0.0)
        y = np.linalg.solve(B.T, cost[basis])
        reduced = cost - A.T @ y
        reduced[basis] = 0.0
        entering = np.flatnonzero(reduced < -tol)
        if entering.size == 0:
            return "optimal", basis, iterations
        j = int(entering[0])
        d = np.linalg.solve(B, A[:, j])
        rows = np.flatnonzero(d > tol)
        if rows.size == 0:
            return "unbounded", basis, iterations
        ratios = x_b[rows] / d[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
        leave = int(ties[np.argmin(basis[ties])])
        basis[leave] = j
        iterations += 1
        if iterations >= max_iter:
            raise ConvergenceError(f"simplex phase {phase} hit the {max_iter} iteration cap")
        if m and iterations % 500 == 0:
            logger.debug(f"simplex phase {phase}: {iterations} pivots")


def lp_solve(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    bounds=None,
    *,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> LpSolution:
    tol = settings.LP_TOL if tol is None else tol
    max_iter = settings.LP_MAX_ITER if max_iter is None else max_iter
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = c.size
    A_ub, b_ub = _as_system(A_ub, b_ub, n)
    A_eq, b_eq = _as_system(A_eq, b_eq, n)
    lower, upper = _as_bounds(bounds, n)
    if (upper < lower).any():
        raise InfeasibleError("upper bound below lower bound")

    capped = np.flatnonzero(np.isfinite(upper))
    caps = np.zeros((capped.size, n))
    caps[np.arange(capped.size), capped] = 1.0
    G = np.vstack([A_ub, caps])
    h = np.concatenate([b_ub - A_ub @ lower, upper[capped] - lower[capped]])
    m_ub, m_eq = G.shape[0], A_eq.shape[0]
    m, n_std = m_ub + m_eq, n + m_ub

    A = np.zeros((m, n_std))
    A[:m_ub, :n] = G
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([h, b_eq - A_eq @ lower])
    flipped = b < 0
    A[flipped] *= -1.0
    b[flipped] *= -1.0

    art_rows = [i for i in range(m) if i >= m_ub or flipped[i]]
    art = np.zeros((m, len(art_rows)))
    art[art_rows, np.arange(len(art_rows))] = 1.0
    A_full = np.hstack([A, art])
    basis = np.empty(m, dtype=int)
    k = 0
    for i in range(m):
        if i < m_ub and not flipped[i]:
            basis[i] = n + i
        else:
            basis[i] = n_std + k
            k += 1

    iterations = 0
    if art_rows:
        cost1 = np.concatenate([np.zeros(n_std), np.ones(len(art_rows))])
        _, basis, it1 = _simplex(A_full, b, cost1, basis, tol, max_iter, phase=1)
        iterations += it1
        x_b = np.linalg.solve(A_full[:, basis], b)
        infeasibility = float(cost1[basis] @ x_b)
        if infeasibility > tol * max(1.0, float(np.abs(b).max())):
            raise InfeasibleError(f"linear program is infeasible (phase one residual {infeasibility:.3g})")

        # Pivot remaining zero-level artificials out; rows where that fails are redundant.
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] < n_std:
                continue
            B = A_full[:, basis]
            row = np.linalg.solve(B.T, np.eye(m)[r]) @ A_full[:, :n_std]
            row[basis[basis < n_std]] = 0.0
            movable = np.flatnonzero(np.abs(row) > tol)
            if movable.size:
                basis[r] = int(movable[0])
            else:
                keep[art_rows[basis[r] - n_std]] = False
        if not keep.all():
            logger.debug(f"Dropping {int((~keep).sum())} redundant equality rows")
            dropped_positions = [r for r in range(m) if basis[r] >= n_std]
            basis = np.delete(basis, dropped_positions)
            A_full = A_full[keep]
            b = b[keep]
        A_std = A_full[:, :n_std]
    else:
        A_std = A

    cost2 = np.concatenate([c, np.zeros(m_ub)])
    status, basis, it2 = _simplex(A_std, b, cost2, basis, tol, max_iter, phase=2)
    iterations += it2
    if status == "unbounded":
        raise UnboundedError("linear program is unbounded")

    B = A_std[:, basis]
    x_b = np.linalg.solve(B, b)
    y = np.linalg.solve(B.T, cost2[basis])
    z = np.zeros(n_std)
    z[basis] = x_b
    z[np.abs(z) < tol] = 0.0
    x = lower + z[:n]
    primal = float(cost2[basis] @ x_b)
    gap = abs(primal - float(b @ y))
    objective = float(c @ x)
    logger.debug(f"LP solved: {n} variables, {m} rows, {iterations} pivots, objective {objective:.6g}")
    return LpSolution(
        x=x,
        objective=objective,
        iterations=iterations,
        duality_gap=gap,
        ineq_slack=b_ub - A_ub @ x,
    )
