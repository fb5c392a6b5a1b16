"""Simplex pivot loop: numba-compiled kernel with a pure-numpy fallback.

The pivot loop dominates the runtime of every sum-rate maximization, so it
is compiled with numba when available.  Set ``RSBC_BACKEND=numpy`` to force
the fallback (or ``RSBC_BACKEND=numba`` to insist on the compiled kernel).
Both paths execute the same arithmetic in the same order and produce
bit-identical tableaus.

Kernel contract: ``T`` is a dense tableau whose last column is the right
hand side and whose LAST row is the objective being driven; rows ``0..m-1``
are constraint rows (a phase-1 tableau carries the phase-2 objective as an
extra passive row just above the driving row).  ``basis[i]`` is the column
currently basic in row ``i``.

Pivot selection: the entering column is the most negative reduced cost
(ties by lowest index) while the objective is making progress; after
STALL_LIMIT consecutive pivots without improvement the loop runs a burst
of up to BLAND_BURST pivots under Bland's smallest-index rule, whose
anti-cycling property perturbs the basis off the degenerate plateau, then
returns to the faster rule (immediately on any objective improvement).
The ratio test clamps round-off-negative basic values and treats ratios
within a small relative window as tied; ties are broken by the largest
pivot element in the fast mode (numerical stability: tiny pivots amplify
the whole tableau by 1/pivot) and by the smallest basic variable index in
Bland bursts (the tie-break its termination argument requires).  The
iteration cap is the last-resort guard against adversarial inputs.
Everything is deterministic for identical input.

Returns ``(status, niter)`` with status 0 = optimal, 1 = unbounded,
2 = iteration limit reached.
"""

from __future__ import annotations

import os

import numpy as np

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_MAXITER = 2

#: Consecutive non-improving pivots tolerated before a Bland burst.
STALL_LIMIT = 64

#: Length of one Bland burst before control returns to the fast rule.
BLAND_BURST = 128

#: Relative width of the ratio-test tie window.
RATIO_TIE_TOL = 1e-9


def _pivot_loop_py(T: np.ndarray, basis: np.ndarray, m: int, tol: float,
                   maxiter: int) -> tuple[int, int]:
    ncols = T.shape[1]
    obj = T.shape[0] - 1
    nit = 0
    bland = 0
    stall = 0
    last_obj = T[obj, ncols - 1]
    while nit < maxiter:
        red = T[obj, : ncols - 1]
        if bland > 0:
            neg = np.nonzero(red < -tol)[0]
            if neg.size == 0:
                return STATUS_OPTIMAL, nit
            pivcol = int(neg[0])
            bland -= 1
        else:
            pivcol = int(np.argmin(red))
            if not red[pivcol] < -tol:
                return STATUS_OPTIMAL, nit

        col = T[:m, pivcol]
        eligible = np.nonzero(col > tol)[0]
        if eligible.size == 0:
            return STATUS_UNBOUNDED, nit
        # Round-off can push basic values a few ulp below zero; clamping the
        # numerator and widening the tie set keeps the degenerate ties that
        # the tie-break rules rely on.
        ratios = np.maximum(T[eligible, ncols - 1], 0.0) / col[eligible]
        best = ratios.min()
        ties = eligible[ratios <= best + RATIO_TIE_TOL * (1.0 + best)]
        if bland > 0:
            pivrow = int(ties[np.argmin(basis[ties])])
        else:
            pivrow = int(ties[np.argmax(col[ties])])

        basis[pivrow] = pivcol
        T[pivrow, :] /= T[pivrow, pivcol]
        prow = T[pivrow, :]
        for i in range(T.shape[0]):
            if i != pivrow:
                f = T[i, pivcol]
                if f != 0.0:
                    T[i, :] -= f * prow
        nit += 1

        now = T[obj, ncols - 1]
        if now > last_obj + 1e-12 * (1.0 + abs(last_obj)):
            last_obj = now
            stall = 0
            bland = 0
        elif bland == 0:
            stall += 1
            if stall >= STALL_LIMIT:
                stall = 0
                bland = BLAND_BURST
    return STATUS_MAXITER, nit


def _pivot_loop_impl(T, basis, m, tol, maxiter):  # pragma: no cover - numba source
    ncols = T.shape[1]
    nrows = T.shape[0]
    obj = nrows - 1
    nit = 0
    bland = 0
    stall = 0
    last_obj = T[obj, ncols - 1]
    while nit < maxiter:
        pivcol = -1
        if bland > 0:
            for j in range(ncols - 1):
                if T[obj, j] < -tol:
                    pivcol = j
                    break
            bland -= 1
        else:
            bestred = T[obj, 0]
            pivcol0 = 0
            for j in range(1, ncols - 1):
                if T[obj, j] < bestred:
                    bestred = T[obj, j]
                    pivcol0 = j
            if bestred < -tol:
                pivcol = pivcol0
        if pivcol < 0:
            return STATUS_OPTIMAL, nit

        best = np.inf
        for i in range(m):
            a = T[i, pivcol]
            if a > tol:
                num = T[i, ncols - 1]
                if num < 0.0:
                    num = 0.0
                r = num / a
                if r < best:
                    best = r
        if best == np.inf:
            return STATUS_UNBOUNDED, nit
        cut = best + RATIO_TIE_TOL * (1.0 + best)
        pivrow = -1
        for i in range(m):
            a = T[i, pivcol]
            if a > tol:
                num = T[i, ncols - 1]
                if num < 0.0:
                    num = 0.0
                if num / a <= cut:
                    if pivrow < 0:
                        pivrow = i
                    elif bland > 0:
                        if basis[i] < basis[pivrow]:
                            pivrow = i
                    elif a > T[pivrow, pivcol]:
                        pivrow = i

        basis[pivrow] = pivcol
        piv = T[pivrow, pivcol]
        for j in range(ncols):
            T[pivrow, j] /= piv
        for i in range(nrows):
            if i != pivrow:
                f = T[i, pivcol]
                if f != 0.0:
                    for j in range(ncols):
                        T[i, j] -= f * T[pivrow, j]
        nit += 1

        now = T[obj, ncols - 1]
        if now > last_obj + 1e-12 * (1.0 + abs(last_obj)):
            last_obj = now
            stall = 0
            bland = 0
        elif bland == 0:
            stall += 1
            if stall >= STALL_LIMIT:
                stall = 0
                bland = BLAND_BURST
    return STATUS_MAXITER, nit


def _build_numba_kernel():
    from numba import njit

    return njit(
        "Tuple((int64, int64))(float64[:, ::1], int64[::1], int64, float64, int64)",
        cache=True,
    )(_pivot_loop_impl)


_requested = os.environ.get("RSBC_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(f"RSBC_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    BACKEND = "numpy"
    pivot_loop = _pivot_loop_py
else:
    try:
        pivot_loop = _build_numba_kernel()
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        BACKEND = "numpy"
        pivot_loop = _pivot_loop_py


def pivot_loop_numpy(T, basis, m, tol, maxiter):
    """Always-available reference implementation (used by the benchmark)."""
    return _pivot_loop_py(T, basis, m, tol, maxiter)
