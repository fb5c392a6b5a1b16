"""Stream elimination and stream ordering for the MISO rate-splitting scheme.

A common stream can be dropped with bounded rate loss whenever some user
subset I admits a splitting matrix W with H_I W = H_I and H_Ibar W = 0; the
minimum-norm candidate is assembled from the columns of the full channel
pseudoinverse.  Streams are ordered by the smallest squared Frobenius norm
over the subsets I that separate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import Channel
from .errors import PreconditionError
from .numerics import pseudo_inverse
from .regions import (
    full_mask,
    max_sum_rate,
    popcount,
    rs_constraints,
    users_of,
)

#: Relative residual tolerance when verifying the splitting conditions.
DEFAULT_W_TOL = 1e-8


@dataclass(frozen=True)
class WMatrixResult:
    """Minimum-norm splitting candidate for a user subset I."""

    subset: int
    solvable: bool
    norm_sq: float
    W: np.ndarray | None = None


@dataclass(frozen=True)
class OrderedStream:
    stream: int
    c_value: float
    randomized_c: float
    rank: int


@dataclass(frozen=True)
class StreamOrdering:
    """Common streams sorted by (randomized) elimination threshold, descending."""

    entries: tuple[OrderedStream, ...]
    sigma: float
    seed: int

    def top_streams(self, n: int) -> tuple[int, ...]:
        return tuple(e.stream for e in self.entries[:n])


def _require_miso(ch: Channel) -> None:
    if not ch.miso:
        raise PreconditionError("stream algorithms require single-antenna receivers")


def w_matrix(ch: Channel, subset: int, tol: float = DEFAULT_W_TOL) -> WMatrixResult:
    """Candidate W = Hplus[:, I] @ H[I, :] and its splitting verdict.

    Hplus[:, I] takes the columns of the *full* channel pseudoinverse, not
    the pseudoinverse of the submatrix; that choice is the minimum-norm
    solution whenever the splitting system is solvable at all.  The verdict
    checks both residuals relative to the submatrix / full channel norms.
    """
    _require_miso(ch)
    full = full_mask(ch.K)
    if subset <= 0 or subset >= full:
        raise PreconditionError(
            f"subset {subset:#x} must be a proper nonempty part of {full:#x}"
        )
    hplus = pseudo_inverse(ch.H)
    return _w_matrix_given_pinv(ch, hplus, subset, tol)


def _w_matrix_given_pinv(
    ch: Channel, hplus: np.ndarray, subset: int, tol: float
) -> WMatrixResult:
    rows_in = [k - 1 for k in users_of(subset)]
    comp = full_mask(ch.K) & ~subset
    rows_out = [k - 1 for k in users_of(comp)]
    h_in = ch.H[rows_in]
    h_out = ch.H[rows_out]
    w = hplus[:, rows_in] @ h_in
    res_in = np.linalg.norm(h_in @ w - h_in)
    res_out = np.linalg.norm(h_out @ w)
    ok = res_in <= tol * np.linalg.norm(h_in) and res_out <= tol * np.linalg.norm(ch.H)
    if not ok:
        return WMatrixResult(subset, False, math.inf, None)
    return WMatrixResult(subset, True, float(np.linalg.norm(w) ** 2), w)


def all_w_matrices(ch: Channel, tol: float = DEFAULT_W_TOL) -> dict[int, WMatrixResult]:
    """Splitting candidates for all 2^K - 2 proper nonempty subsets."""
    _require_miso(ch)
    hplus = pseudo_inverse(ch.H)
    full = full_mask(ch.K)
    return {
        subset: _w_matrix_given_pinv(ch, hplus, subset, tol)
        for subset in range(1, full)
    }


def eliminate(ch: Channel, c: float, tol: float = DEFAULT_W_TOL) -> set[int]:
    """Surviving streams after dropping everything separable at threshold c.

    Every subset I whose splitting candidate is solvable with squared norm
    at most c removes all streams that straddle I.  Subsets are scanned in
    ascending bitmask order, which is immaterial for the result but keeps
    the procedure deterministic.
    """
    if c < 0:
        raise PreconditionError(f"threshold must be nonnegative, got {c}")
    full = full_mask(ch.K)
    survivors = set(range(1, full + 1))
    for subset, res in sorted(all_w_matrices(ch, tol).items()):
        if res.solvable and res.norm_sq <= c:
            comp = full & ~subset
            survivors = {
                s for s in survivors if not (s & subset and s & comp)
            }
    return survivors


def min_threshold(
    ch: Channel,
    streams_of_interest: list[int] | None = None,
    tol: float = DEFAULT_W_TOL,
) -> dict[int, float]:
    """Smallest threshold at which each common stream gets eliminated.

    c_K = min over subsets I straddled by K of the splitting norm, infinite
    when no straddling subset is solvable.
    """
    full = full_mask(ch.K)
    if streams_of_interest is None:
        streams_of_interest = [s for s in range(1, full + 1) if popcount(s) >= 2]
    if any(popcount(s) < 2 for s in streams_of_interest):
        raise PreconditionError("thresholds are defined for streams with >= 2 users")
    results = all_w_matrices(ch, tol)
    out: dict[int, float] = {}
    for s in streams_of_interest:
        best = math.inf
        for subset, res in results.items():
            if s & subset and s & (full & ~subset) and res.norm_sq < best:
                best = res.norm_sq
        out[s] = best
    return out


def order_streams(
    ch: Channel,
    sigma: float | None = None,
    seed: int = 0,
    tol: float = DEFAULT_W_TOL,
) -> StreamOrdering:
    """Order common streams by elimination threshold, largest first.

    Many streams share a threshold (there are only 2^K - 2 candidate
    values), so zero-mean uniform noise with variance sigma^2 breaks ties;
    sigma defaults to 1e-6 times the median finite threshold, small enough
    never to reorder distinct values.  With sigma = 0 ties fall back to
    ascending bitmask order.  Infinite thresholds always rank first.
    """
    if sigma is not None and sigma < 0:
        raise PreconditionError(f"sigma must be nonnegative, got {sigma}")
    thresholds = min_threshold(ch, tol=tol)
    if sigma is None:
        finite = [v for v in thresholds.values() if math.isfinite(v)]
        sigma = 1e-6 * float(np.median(finite)) if finite else 0.0
    rng = np.random.default_rng(seed)
    half_width = sigma * math.sqrt(3.0)
    randomized = {}
    for s in sorted(thresholds):
        noise = float(rng.uniform(-half_width, half_width))
        randomized[s] = thresholds[s] + noise if math.isfinite(thresholds[s]) else math.inf
    order = sorted(thresholds, key=lambda s: (-randomized[s], s))
    entries = tuple(
        OrderedStream(s, thresholds[s], randomized[s], rank)
        for rank, s in enumerate(order)
    )
    return StreamOrdering(entries, sigma=float(sigma), seed=seed)


def sum_rate_with_streams(ch: Channel, P: float, active: set[int] | list[int]) -> float:
    """Sum-rate LP with only the given streams active.

    All constraints of the reduced system are retained; rates of inactive
    streams are fixed to zero by removing their variables.
    """
    active = sorted(set(int(s) for s in active))
    if not active:
        raise PreconditionError("at least one stream must stay active")
    full = full_mask(ch.K)
    if any(s <= 0 or s > full for s in active):
        raise PreconditionError("active streams must be nonempty user subsets")
    value, _ = max_sum_rate(rs_constraints(ch, P), variables=active)
    return value


def ordering_json(ordering: StreamOrdering) -> list[dict]:
    return [
        {
            "stream_bitmask": e.stream,
            "c_value": e.c_value if math.isfinite(e.c_value) else "inf",
            "rank": e.rank,
        }
        for e in ordering.entries
    ]


def elimination_json(threshold: float, surviving: set[int]) -> dict:
    thr = threshold if math.isfinite(threshold) else "inf"
    return {"threshold": thr, "surviving": sorted(surviving)}
