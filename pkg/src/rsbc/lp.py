"""Dense linear-program solver for rate-region maximizations.

Primal two-phase simplex on the standard-form tableau with Bland's
anti-cycling rule.  Problems generated by the rate-region code have many
more constraints than variables (up to ~45k rows for six users but never
more than 63 columns); for such tall systems with nonnegative right hand
sides the solver transparently works on the dual tableau instead, which
keeps the memory footprint at rows x columns of the *transposed* system
and recovers the primal solution from the reduced costs of the slack
columns.  Both routes produce identical optima and are cross-checked in
the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._kernels import (
    STATUS_MAXITER,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    pivot_loop,
)
from .errors import ContractViolation, NumericalError

#: Entries smaller than this (in absolute value) never serve as pivots.
DEFAULT_PIVOT_TOL = 1e-10

#: Absolute slack allowed when checking constraint satisfaction.
DEFAULT_FEAS_TOL = 1e-8

#: Problems with more rows than this (and b >= 0) are solved through the
#: dual tableau; the primal tableau would need O(m^2) memory.  The primal
#: path is preferred whenever it fits since it is better conditioned on
#: the heavily degenerate rate-region systems.
DUAL_MIN_ROWS = 4096

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"


@dataclass
class LinearProgram:
    """maximize objective . x  subject to  A x <= b  (and x >= 0 if nonneg)."""

    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    nonneg: bool = True

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64).ravel()
        n = self.objective.size
        a = np.asarray(self.constraint_matrix, dtype=np.float64)
        if a.size == 0:
            a = a.reshape(0, n)
        if a.ndim != 2 or a.shape[1] != n:
            raise ContractViolation(
                f"constraint matrix shape {a.shape} does not match {n} variables"
            )
        self.constraint_matrix = a
        b = np.asarray(self.rhs, dtype=np.float64).ravel()
        if b.size != a.shape[0]:
            raise ContractViolation(
                f"{b.size} right hand sides for {a.shape[0]} constraints"
            )
        if not np.all(np.isfinite(b)):
            raise ContractViolation("right hand sides must be finite")
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(self.objective)):
            raise ContractViolation("coefficients must be finite")
        self.rhs = b

    @classmethod
    def from_rows(
        cls,
        objective: Sequence[float],
        constraints: Iterable[tuple[Sequence[float], float]],
        nonneg: bool = True,
    ) -> "LinearProgram":
        rows = list(constraints)
        obj = np.asarray(objective, dtype=np.float64)
        if rows:
            a = np.asarray([np.asarray(r, dtype=np.float64) for r, _ in rows])
            b = np.asarray([v for _, v in rows], dtype=np.float64)
        else:
            a = np.zeros((0, obj.size))
            b = np.zeros(0)
        return cls(obj, a, b, nonneg=nonneg)

    @property
    def num_variables(self) -> int:
        return self.objective.size

    @property
    def num_constraints(self) -> int:
        return self.constraint_matrix.shape[0]


@dataclass
class LpResult:
    status: str
    value: float | None = None
    solution: np.ndarray | None = None
    niter: int = 0
    duals: np.ndarray | None = field(default=None, repr=False)


def _apply_pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    basis[row] = col
    T[row, :] /= T[row, col]
    prow = T[row, :]
    for i in range(T.shape[0]):
        if i != row:
            f = T[i, col]
            if f != 0.0:
                T[i, :] -= f * prow


def _solve_standard(
    c: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    pivot_tol: float,
    feas_tol: float,
    maxiter: int | None,
) -> LpResult:
    """Two-phase simplex for: maximize c.x s.t. a x <= b, x >= 0."""
    m, n = a.shape
    if m == 0:
        if np.any(c > pivot_tol):
            return LpResult(UNBOUNDED)
        return LpResult(OPTIMAL, 0.0, np.zeros(n), 0, np.zeros(0))

    flip = b < 0.0
    a_eq = np.where(flip[:, None], -a, a)
    b_eq = np.where(flip, -b, b)
    slack_sign = np.where(flip, -1.0, 1.0)
    art_rows = np.nonzero(flip)[0]
    n_art = art_rows.size

    if maxiter is None:
        maxiter = max(2000, 50 * (m + n))

    ncols = n + m + n_art + 1
    nrows = m + 1 + (1 if n_art else 0)
    T = np.zeros((nrows, ncols))
    T[:m, :n] = a_eq
    T[:m, n : n + m] = np.diag(slack_sign)
    for j, i in enumerate(art_rows):
        T[i, n + m + j] = 1.0
    T[:m, -1] = b_eq
    T[m, :n] = -c

    basis = np.empty(m, dtype=np.int64)
    basis[:] = n + np.arange(m)
    basis[art_rows] = n + m + np.arange(n_art)

    nit_total = 0
    if n_art:
        # Phase-1 objective: maximize -(sum of artificials), expressed by
        # subtracting every artificial row; basic artificial columns keep
        # zero reduced cost.
        T[-1, :] = -T[art_rows, :].sum(axis=0)
        T[-1, n + m : n + m + n_art] = 0.0
        status, nit = pivot_loop(T, basis, m, pivot_tol, maxiter)
        nit_total += nit
        if status == STATUS_MAXITER:
            raise NumericalError("phase-1 simplex hit the iteration limit")
        if status == STATUS_UNBOUNDED and T[-1, -1] < -feas_tol:
            # The phase-1 objective is bounded by zero, so a genuine
            # unbounded verdict away from completion is a numerical failure.
            raise NumericalError("phase-1 objective reported unbounded")
        if T[-1, -1] < -feas_tol:
            return LpResult(INFEASIBLE, niter=nit_total)
        # Drive leftover artificial variables out of the basis where possible.
        for i in np.nonzero(basis >= n + m)[0]:
            cols = np.nonzero(np.abs(T[i, : n + m]) > pivot_tol)[0]
            if cols.size:
                _apply_pivot(T, basis, int(i), int(cols[0]))
                nit_total += 1
        T = np.delete(T[:-1, :], np.s_[n + m : n + m + n_art], axis=1)
        T = np.ascontiguousarray(T)

    status, nit = pivot_loop(T, basis, m, pivot_tol, maxiter)
    nit_total += nit
    if status == STATUS_MAXITER:
        raise NumericalError("simplex hit the iteration limit")
    if status == STATUS_UNBOUNDED:
        return LpResult(UNBOUNDED, niter=nit_total)
    assert status == STATUS_OPTIMAL

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, -1]
    duals = np.maximum(T[-1, n : n + m], 0.0)
    return LpResult(OPTIMAL, float(T[-1, -1]), x, nit_total, duals)


def _solve_via_dual(
    c: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    pivot_tol: float,
    feas_tol: float,
    maxiter: int | None,
) -> LpResult:
    """Solve a tall primal (b >= 0, hence feasible) through its dual.

    min b.y s.t. a^T y >= c, y >= 0 is posed as a standard-form max; the
    primal solution is the vector of reduced costs on the dual's slack
    columns, and dual infeasibility certifies an unbounded primal.
    """
    res = _solve_standard(-b, -a.T.copy(), -c, pivot_tol, feas_tol, maxiter)
    if res.status == INFEASIBLE:
        return LpResult(UNBOUNDED, niter=res.niter)
    if res.status == UNBOUNDED:
        raise NumericalError("dual of a feasible-bounded problem reported unbounded")
    return LpResult(OPTIMAL, -res.value, res.duals, res.niter, res.solution)


def maximize(
    lp: LinearProgram,
    pivot_tol: float = DEFAULT_PIVOT_TOL,
    feas_tol: float = DEFAULT_FEAS_TOL,
    maxiter: int | None = None,
) -> LpResult:
    """Maximize the objective over the constraint polytope.

    Returns an LpResult whose status is ``optimal``, ``unbounded`` or
    ``infeasible``; on ``optimal`` the solution satisfies every constraint
    within ``feas_tol`` and value = objective . solution.  Deterministic
    for identical input.
    """
    c = lp.objective
    a = lp.constraint_matrix
    b = lp.rhs
    n0 = c.size

    if not lp.nonneg:
        # Free variables: split x = u - v with u, v >= 0.
        c = np.concatenate([c, -c])
        a = np.concatenate([a, -a], axis=1)

    m, n = a.shape
    if m > max(DUAL_MIN_ROWS, n) and b.min() >= 0.0:
        res = _solve_via_dual(c, a, b, pivot_tol, feas_tol, maxiter)
    else:
        res = _solve_standard(c, a, b, pivot_tol, feas_tol, maxiter)

    if res.status == OPTIMAL and not lp.nonneg:
        res.solution = res.solution[:n0] - res.solution[n0:]
    return res


def feasible(
    constraints: Iterable[tuple[Sequence[float], float]],
    point: Sequence[float],
    tol: float = DEFAULT_FEAS_TOL,
) -> bool:
    """True iff every constraint holds within ``tol`` and point >= -1e-10."""
    x = np.asarray(point, dtype=np.float64).ravel()
    if np.any(x < -1e-10):
        return False
    for coeffs, rhs in constraints:
        row = np.asarray(coeffs, dtype=np.float64).ravel()
        if row.size != x.size:
            raise ContractViolation(
                f"constraint has {row.size} coefficients for a {x.size}-vector"
            )
        if float(row @ x) > rhs + tol:
            return False
    return True
