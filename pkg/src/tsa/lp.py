"""Dense linear programming and concave maximization, self-contained.

``solve_lp`` maximizes c.x subject to A x <= b, x >= 0 with a two-phase
tableau simplex under Bland's rule (anti-cycling).  Equality rows are encoded
by callers as <=/>= pairs via ``add_equality``.  ``maximize_concave`` runs
Frank-Wolfe with the simplex as linear oracle and reports a certified upper
bound (best iterate value plus duality gap).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

PIVOT_TOL = 1e-9
RHS_TOL = 1e-8


@dataclass
class LpProblem:
    """max c.x  s.t.  A x <= b, x >= 0."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 2:
            self.A = self.A.reshape(-1, self.c.size)
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.A.shape != (self.b.size, self.c.size):
            raise ValueError(f"inconsistent LP shapes A{self.A.shape}, b{self.b.shape}, c{self.c.shape}")
        if not (np.isfinite(self.c).all() and np.isfinite(self.A).all() and np.isfinite(self.b).all()):
            raise ValueError("LP data must be finite")

    def add_equality(self, row: np.ndarray, rhs: float) -> None:
        """Append row.x == rhs as a <=/>= pair."""
        row = np.asarray(row, dtype=float).reshape(1, -1)
        self.A = np.vstack([self.A, row, -row])
        self.b = np.concatenate([self.b, [float(rhs)], [-float(rhs)]])


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray] = None
    value: Optional[float] = None
    dual: Optional[np.ndarray] = None
    cs_residual: Optional[float] = None


def _bland_enter(obj_row: np.ndarray, allowed: int) -> int:
    for j in range(allowed):
        if obj_row[j] < -PIVOT_TOL:
            return j
    return -1


def _bland_leave(T: np.ndarray, basis: np.ndarray, col: int) -> int:
    rows = T.shape[0] - 1
    best, best_ratio = -1, None
    for i in range(rows):
        a = T[i, col]
        if a > PIVOT_TOL:
            ratio = T[i, -1] / a
            if best == -1 or ratio < best_ratio - PIVOT_TOL or (
                    abs(ratio - best_ratio) <= PIVOT_TOL and basis[i] < basis[best]):
                best, best_ratio = i, ratio
    return best


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    piv = T[row]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, piv)
    T[row] = piv
    basis[row] = col


def _set_objective(T: np.ndarray, basis: np.ndarray, cost: np.ndarray) -> None:
    """Rewrite the last tableau row as reduced costs for ``cost`` under ``basis``."""
    cb = cost[basis]
    T[-1, :] = cb @ T[:-1, :]
    T[-1, :-1] -= cost


def _run(T: np.ndarray, basis: np.ndarray, allowed: int, deadline=None) -> str:
    it = 0
    while True:
        col = _bland_enter(T[-1], allowed)
        if col < 0:
            return "optimal"
        row = _bland_leave(T, basis, col)
        if row < 0:
            return "unbounded"
        _pivot(T, basis, row, col)
        it += 1
        if deadline is not None and it % 256 == 0:
            deadline.check()


def solve_lp(problem: LpProblem, deadline=None) -> LpSolution:
    """Two-phase simplex; returns statuses instead of raising on infeasible/unbounded."""
    nrows, ncols = problem.A.shape
    if nrows == 0:
        if (problem.c > PIVOT_TOL).any():
            return LpSolution("unbounded")
        x = np.zeros(ncols)
        return LpSolution("optimal", x, 0.0, np.zeros(0), 0.0)

    A = problem.A.copy()
    b = problem.b.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    slack = np.where(neg, -1.0, 1.0)

    n_art = int(neg.sum())
    total = ncols + nrows + n_art
    T = np.zeros((nrows + 1, total + 1))
    T[:-1, :ncols] = A
    T[:-1, ncols:ncols + nrows] = np.diag(slack)
    art_cols = []
    k = 0
    basis = np.zeros(nrows, dtype=int)
    for i in range(nrows):
        if neg[i]:
            col = ncols + nrows + k
            T[i, col] = 1.0
            art_cols.append(col)
            basis[i] = col
            k += 1
        else:
            basis[i] = ncols + i
    T[:-1, -1] = b

    if n_art:
        cost1 = np.zeros(total)
        cost1[art_cols] = -1.0
        _set_objective(T, basis, cost1)
        status = _run(T, basis, total, deadline)
        assert status == "optimal"  # phase 1 is bounded
        if T[-1, -1] < -RHS_TOL:
            return LpSolution("infeasible")
        # Drive leftover artificials out of the basis; drop redundant rows.
        drop = []
        dropped_rows = []
        for i in range(nrows):
            if basis[i] >= ncols + nrows:
                piv_col = -1
                for j in range(ncols + nrows):
                    if abs(T[i, j]) > PIVOT_TOL:
                        piv_col = j
                        break
                if piv_col >= 0:
                    _pivot(T, basis, i, piv_col)
                else:
                    drop.append(i)
        if drop:
            keep = [i for i in range(nrows) if i not in drop]
            dropped_rows = drop
            T = np.vstack([T[keep], T[-1:]])
            basis = basis[keep]
            nrows = len(keep)
        T = np.hstack([T[:, :ncols + problem.A.shape[0]], T[:, -1:]])
    else:
        dropped_rows = []

    total = T.shape[1] - 1
    cost2 = np.zeros(total)
    cost2[:ncols] = problem.c
    _set_objective(T, basis, cost2)
    status = _run(T, basis, total, deadline)
    if status == "unbounded":
        return LpSolution("unbounded")

    x = np.zeros(total)
    x[basis] = T[:-1, -1]
    xsol = x[:ncols]
    value = float(problem.c @ xsol)
    # Duals are the reduced costs of the slack columns in the final tableau;
    # rows dropped as redundant in phase 1 get dual 0.
    dual = T[-1, ncols:ncols + problem.A.shape[0]].copy()
    dual[dropped_rows] = 0.0
    slack_residual = problem.b - problem.A @ xsol
    cs = float(abs(dual @ slack_residual)) + float(abs((dual @ problem.A - problem.c) @ xsol))
    return LpSolution("optimal", xsol, value, dual, cs)


def enumerate_vertices_best(problem: LpProblem) -> Optional[float]:
    """Brute-force LP optimum via basis enumeration; test oracle for tiny LPs."""
    from itertools import combinations

    n = problem.c.size
    rows = [(problem.A[i], problem.b[i]) for i in range(problem.b.size)]
    rows += [(-(np.eye(n)[j]), 0.0) for j in range(n)]
    best = None
    feasible_any = False
    for combo in combinations(range(len(rows)), n):
        M = np.array([rows[i][0] for i in combo])
        rhs = np.array([rows[i][1] for i in combo])
        try:
            x = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            continue
        if (x < -1e-9).any() or (problem.A @ x - problem.b > 1e-9).any():
            continue
        feasible_any = True
        val = float(problem.c @ x)
        if best is None or val > best:
            best = val
    if not feasible_any:
        return None
    return best


# ---------------------------------------------------------------------------
# Frank-Wolfe


@dataclass
class ConcaveResult:
    status: str
    point: Optional[np.ndarray] = None
    value: Optional[float] = None
    certified_upper: Optional[float] = None
    iterations: int = 0
    gap: Optional[float] = None
    bound_history: list = None  # best certified bound after each iteration


def maximize_concave(f: Callable[[np.ndarray], float],
                     grad: Callable[[np.ndarray], np.ndarray],
                     feasible: LpProblem,
                     iters: int = 500,
                     gap_tol: float = 1e-6,
                     check_gradient: bool = True) -> ConcaveResult:
    """Frank-Wolfe over {x >= 0 : A x <= b} for concave smooth f.

    certified_upper = min_k [f(x_k) + gap_k] is a valid bound on the optimum
    because concavity gives f* <= f(x) + grad(x).(s* - x) <= f(x) + gap(x).
    """
    start = solve_lp(LpProblem(np.zeros_like(feasible.c), feasible.A, feasible.b))
    if start.status != "optimal":
        return ConcaveResult("infeasible")
    x = start.x

    if check_gradient:
        g = grad(x)
        h = 1e-6
        for j in range(min(3, x.size)):
            e = np.zeros_like(x)
            e[j] = h
            fd = (f(x + e) - f(x - e)) / (2 * h)
            scale = max(1.0, abs(fd), abs(g[j]))
            if abs(fd - g[j]) / scale > 1e-4:
                raise ValueError(f"gradient oracle inconsistent with f at coordinate {j}")

    best_x, best_val = x, f(x)
    certified = np.inf
    gap = np.inf
    history = []
    it = 0
    for it in range(1, iters + 1):
        g = grad(x)
        lin = solve_lp(LpProblem(g, feasible.A, feasible.b))
        if lin.status == "unbounded":
            raise ValueError("Frank-Wolfe needs a bounded feasible region")
        s = lin.x
        d = s - x
        gap = float(g @ d)
        fx = f(x)
        certified = min(certified, fx + max(gap, 0.0))
        history.append(certified)
        if fx > best_val:
            best_x, best_val = x, fx
        if gap <= gap_tol:
            break
        # Exact-enough line search: f concave along the segment, so ternary search.
        lo, hi = 0.0, 1.0
        for _ in range(40):
            m1 = lo + (hi - lo) / 3
            m2 = hi - (hi - lo) / 3
            if f(x + m1 * d) < f(x + m2 * d):
                lo = m1
            else:
                hi = m2
        step = (lo + hi) / 2
        if step <= 0:
            step = 2.0 / (it + 2.0)
        x = x + step * d

    fx = f(x)
    if fx > best_val:
        best_x, best_val = x, fx
    certified = min(certified, best_val + max(gap, 0.0)) if np.isfinite(certified) else best_val
    return ConcaveResult("optimal", best_x, float(best_val), float(max(certified, best_val)),
                         iterations=it, gap=float(gap), bound_history=history)
