"""Sum rates and bounds for the rate-splitting scheme.

Exact (LP) sum rates over the reduced constraint system, the three-user
closed form with its explicit achieving split, the K-user analytical
upper bound built from fixed-cardinality collections, the two-user
linear-precoding-only bound, and high-SNR slope fitting.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import Channel
from .errors import (
    ContractViolation,
    NumericalError,
    PreconditionError,
    SplitInfeasibleError,
)
from .lp import LinearProgram, maximize
from .numerics import hermitize, logdet_hermitian_psd
from .regions import (
    Collection,
    all_capacity_terms,
    collection_covariance,
    full_mask,
    mask_of,
    max_sum_rate,
    rs_constraints,
    user_bit,
    users_of,
)

_SOLUTION_FLOOR = -1e-10
_SPLIT_FLOOR = -1e-9


@dataclass
class SumRateReport:
    """Result of one sum-rate computation on one channel at one power."""

    channel_digest: str
    P: float
    rs_lp_value: float
    solution: dict[int, float]
    active_users: int
    closed_form_value: float | None = None
    upper_bound_value: float | None = None

    def __post_init__(self):
        if self.rs_lp_value < _SOLUTION_FLOOR:
            raise NumericalError(f"negative sum rate {self.rs_lp_value}")
        clamped = {}
        for s, v in self.solution.items():
            if v < _SOLUTION_FLOOR:
                raise NumericalError(f"stream {s:#x} has rate {v} < {_SOLUTION_FLOOR}")
            clamped[s] = max(v, 0.0)
        self.solution = clamped
        total = sum(self.solution.values())
        if abs(total - self.rs_lp_value) > 1e-7:
            raise NumericalError(
                f"solution rates sum to {total}, LP value is {self.rs_lp_value}"
            )

    def as_json_dict(self) -> dict:
        values = {"rs_lp": self.rs_lp_value}
        if self.closed_form_value is not None:
            values["closed_form"] = self.closed_form_value
        if self.upper_bound_value is not None:
            values["upper_bound"] = self.upper_bound_value
        return {
            "channel_digest": self.channel_digest,
            "P": self.P,
            "values": values,
            "solution": {str(s): v for s, v in sorted(self.solution.items())},
            "active_subset": self.active_users,
        }


def rs_sum_rate(ch: Channel, P: float) -> SumRateReport:
    """LP maximum of the total stream rate over the reduced system."""
    value, solution = max_sum_rate(rs_constraints(ch, P))
    report = SumRateReport(
        channel_digest=ch.digest(),
        P=P,
        rs_lp_value=value,
        solution=solution,
        active_users=full_mask(ch.K),
    )
    if ch.K == 3:
        report.closed_form_value = three_user_closed_form(ch, P)
    return report


def rs_sum_rate_best_subset(ch: Channel, P: float) -> SumRateReport:
    """Best sum rate over all nonempty active-user subsets.

    Ignored users are removed from the channel entirely; the report maps
    the winning subset's streams back to the original user labels.
    """
    best: SumRateReport | None = None
    for subset in range(1, 1 << ch.K):
        users = users_of(subset)
        sub = ch.subchannel(subset)
        value, solution = max_sum_rate(rs_constraints(sub, P))
        if best is None or value > best.rs_lp_value + 1e-12:
            relabeled = {
                _relabel_mask(s, users): v for s, v in solution.items()
            }
            best = SumRateReport(
                channel_digest=ch.digest(),
                P=P,
                rs_lp_value=value,
                solution=relabeled,
                active_users=subset,
            )
    assert best is not None
    if ch.K == 3:
        best.closed_form_value = three_user_closed_form(ch, P)
    return best


def _relabel_mask(local_mask: int, users: tuple[int, ...]) -> int:
    out = 0
    for i, k in enumerate(users):
        if local_mask >> i & 1:
            out |= user_bit(k)
    return out


def rs_weighted_max(
    ch: Channel, P: float, weights: Sequence[float]
) -> tuple[float, np.ndarray]:
    """Maximize sum_k w_k R_k over the private-rate region of the RS split.

    Each stream rate splits into per-owner parts, R_k being the sum of the
    parts owned by user k; the LP runs over the split variables so that
    unequal weights can steer how shared streams are attributed.
    Returns (value, per-user rates).
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.size != ch.K:
        raise ContractViolation(f"{w.size} weights for {ch.K} users")
    if np.any(w < 0):
        raise PreconditionError("weights must be nonnegative")
    cons = rs_constraints(ch, P)
    variables = [
        (k, s)
        for s in range(1, 1 << ch.K)
        for k in users_of(s)
    ]
    index = {v: i for i, v in enumerate(variables)}
    a = np.zeros((len(cons), len(variables)))
    b = np.empty(len(cons))
    for i, c in enumerate(cons):
        for s in c.streams:
            for k in users_of(s):
                a[i, index[(k, s)]] = 1.0
        b[i] = c.rhs
    obj = np.array([w[k - 1] for k, _ in variables])
    res = maximize(LinearProgram(obj, a, b))
    if res.status != "optimal":
        raise NumericalError(f"weighted-rate LP terminated with status {res.status}")
    rates = np.zeros(ch.K)
    for (k, _), x in zip(variables, res.solution):
        rates[k - 1] += x
    return res.value, rates


def _pair_collection(i: int, j: int, pivot: int) -> Collection:
    return Collection(
        tuple(sorted((mask_of((pivot, i)), mask_of((pivot, j))))),
        pivot=pivot,
        minimal=True,
    )


def three_user_terms(ch: Channel, P: float) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Capacity terms C_s (indexed by mask) and the pair-collection terms tau_k."""
    if ch.K != 3:
        raise PreconditionError(f"three-user computation on a {ch.K}-user channel")
    c = all_capacity_terms(ch, P)
    taus = []
    for k in range(1, 4):
        others = [u for u in (1, 2, 3) if u != k]
        q = collection_covariance(ch, _pair_collection(others[0], others[1], k), P)
        hk = ch.user_matrix(k)
        arg = np.eye(hk.shape[0]) + hk @ q @ hk.conj().T
        taus.append(logdet_hermitian_psd(hermitize(arg)))
    return c, (taus[0], taus[1], taus[2])


def three_user_pair_bound_term(ch: Channel, P: float) -> float:
    """min_k(tau_k - C_k)/2 + (C1+C2+C3 - C12-C23-C13 + 3*C123)/2."""
    c, tau = three_user_terms(ch, P)
    singles = (c[1], c[2], c[4])
    slack = min(tau[k] - singles[k] for k in range(3))
    combo = c[1] + c[2] + c[4] - c[3] - c[6] - c[5] + 3 * c[7]
    return 0.5 * slack + 0.5 * combo


def three_user_min_term(ch: Channel, P: float) -> float:
    """min{C123, pair-bound term}: the all-active three-user sum rate."""
    c, _ = three_user_terms(ch, P)
    return min(float(c[7]), three_user_pair_bound_term(ch, P))


def three_user_closed_form(ch: Channel, P: float) -> float:
    """Optimal three-user RS sum rate (with user dropping allowed)."""
    c, _ = three_user_terms(ch, P)
    return max(float(c[3]), float(c[5]), float(c[6]), three_user_min_term(ch, P))


def three_user_split_solution(ch: Channel, P: float) -> dict[int, float]:
    """Explicit 7-stream rate assignment achieving the all-active sum rate.

    Users are relabeled so the one with the smallest tau_k - C_k comes
    first; the two achievability cases then pin the stream rates (in the
    second case only the sum of the two largest streams is pinned, and the
    individual split is chosen against its box constraints).

    The construction rests on inequalities that are exact only up to a
    bounded slack; channels that violate them at finite SNR (negative
    stream rates, or tau_1 exceeding C_1 in the second case) raise
    SplitInfeasibleError, and for those the exact LP optimum sits strictly
    below the closed-form sum.  On success the assignment is feasible for
    the full constraint system and sums to the all-active sum rate.
    """
    c, tau = three_user_terms(ch, P)
    singles = {1: c[1], 2: c[2], 3: c[4]}
    lead = min((1, 2, 3), key=lambda k: (tau[k - 1] - singles[k], k))
    perm = [lead] + [k for k in (1, 2, 3) if k != lead]
    sub = Channel(
        np.concatenate([ch.user_matrix(k) for k in perm]),
        tuple(ch.nr[k - 1] for k in perm),
    )

    cc, tt = three_user_terms(sub, P)
    c1, c2, c3 = cc[1], cc[2], cc[4]
    c12, c13, c23, c123 = cc[3], cc[5], cc[6], cc[7]
    tau1, tau2, tau3 = tt

    rates: dict[int, float] = {}
    if tau1 + c2 + c3 + c123 > c12 + c13 + c23:
        rates[0b001] = c123 - c23
        rates[0b010] = c123 - c13
        rates[0b100] = c123 - c12
        rates[0b011] = c23 - c3 - (c123 - c13)
        rates[0b101] = c12 - c2 - (c123 - c23)
        rates[0b110] = c13 - c1 - (c123 - c12)
        rates[0b111] = c1 + c2 + c3 + c123 - c12 - c13 - c23
    else:
        rates[0b001] = c123 - c23
        rates[0b010] = c123 - c13
        rates[0b100] = c123 - c12
        rates[0b011] = 0.5 * (tau1 + c2 + c13 + c23 - c3 - c12 - c123)
        rates[0b101] = 0.5 * (tau1 + c3 + c12 + c23 - c2 - c13 - c123)
        pair_sum = 0.5 * (c2 + c3 + c12 + c13 - tau1 - c23 - c123)
        cap = min(
            c12 + c13 - c1 - c123,
            0.5 * (2 * tau2 - tau1 - c2 + c3 + c12 + c13 - c23 - c123),
            0.5 * (2 * tau3 - tau1 - c3 + c2 + c12 + c13 - c23 - c123),
        )
        r23 = min(pair_sum, cap)
        rates[0b110] = r23
        rates[0b111] = pair_sum - r23
        # With the lead user's combined constraint tight, the full-set
        # stream must fit under C_1 - tau_1; at finite SNR that margin can
        # be negative, and then no assignment attains the closed-form sum.
        if rates[0b111] > c1 - tau1 + 1e-9:
            raise SplitInfeasibleError(
                f"full-set stream rate {rates[0b111]:.6g} exceeds the "
                f"remaining headroom {c1 - tau1:.6g} of the lead user"
            )

    out: dict[int, float] = {}
    for local_mask, v in rates.items():
        if v < _SPLIT_FLOOR:
            raise SplitInfeasibleError(
                f"stream {local_mask:#x} would need rate {v:.6g}"
            )
        out[_relabel_mask(local_mask, tuple(perm))] = max(v, 0.0)
    return out


def _fixed_cardinality_collection(i: int, size: int, K: int) -> Collection:
    others = [u for u in range(1, K + 1) if u != i]
    members = tuple(
        sorted(mask_of((i, *combo)) for combo in itertools.combinations(others, size - 1))
    )
    return Collection(members, pivot=i, minimal=True)


def k_user_upper_bound(ch: Channel, P: float) -> float:
    """Analytical sum-rate upper bound from fixed-cardinality collections.

    With l_i^(k) the constraint value of the collection of all k-subsets
    containing user i, the bound is
    sum_i ( l_i^(K)/(K-1) + sum_{k=1}^{K-2} l_i^(k)/(k(k+1)) )
    + min_m ( l_m^(K-1) - l_m^(K) ) / (K-1).
    Only K^2 collections are involved, so any K is tractable.
    """
    K = ch.K
    if K < 2:
        raise PreconditionError("the upper bound needs at least two users")
    ell = np.zeros((K + 1, K + 1))
    for i in range(1, K + 1):
        hk = ch.user_matrix(i)
        for size in range(1, K + 1):
            q = collection_covariance(ch, _fixed_cardinality_collection(i, size, K), P)
            arg = np.eye(hk.shape[0]) + hk @ q @ hk.conj().T
            ell[i, size] = logdet_hermitian_psd(hermitize(arg))
    total = 0.0
    for i in range(1, K + 1):
        total += ell[i, K] / (K - 1)
        for size in range(1, K - 1):
            total += ell[i, size] / (size * (size + 1))
    total += min(ell[m, K - 1] - ell[m, K] for m in range(1, K + 1)) / (K - 1)
    return total


def lp_only_sum_rate_bound(ch: Channel, P: float) -> float:
    """Two-user sum-rate bound for linear precoding without rate splitting.

    max{log2(1 + P|h1|^2), log2(1 + P|h2|^2),
        log2(1 + beta * P^2 det(H H^H))}
    with beta = min{(1 - rho^2)/rho^2, 1} and rho the normalized row
    correlation.  Degenerate rows fall back to the single-user terms.
    """
    if ch.K != 2 or not ch.miso or ch.M != 2:
        raise PreconditionError("bound defined for 2-user MISO channels with M = 2")
    h1, h2 = ch.H[0], ch.H[1]
    n1 = float(np.linalg.norm(h1) ** 2)
    n2 = float(np.linalg.norm(h2) ** 2)
    single = max(math.log2(1 + P * n1), math.log2(1 + P * n2))
    if n1 == 0.0 or n2 == 0.0:
        return single
    cross = abs(complex(h1 @ h2.conj()))
    rho_sq = min(cross**2 / (n1 * n2), 1.0)
    det = max(n1 * n2 - cross**2, 0.0)
    beta = 1.0 if rho_sq == 0.0 else min((1.0 - rho_sq) / rho_sq, 1.0)
    return max(single, math.log2(1 + beta * P * P * det))


def dpc_sum_capacity(ch: Channel, P: float) -> float:
    """Sum-capacity proxy C_[K] = log2 det(I + P H^H H)."""
    if P < 0:
        raise PreconditionError(f"P must be nonnegative, got {P}")
    if P == 0:
        return 0.0
    gram = np.eye(ch.M) + P * (ch.H.conj().T @ ch.H)
    return logdet_hermitian_psd(hermitize(gram))


def gdof_slope(values: Sequence[tuple[float, float]]) -> float:
    """Least-squares pre-log of rate versus log2 P over the top half of P.

    Requires at least three samples spanning four decades of P; the lower
    half of the sweep is dropped to suppress the O(1) offsets.
    """
    pts = sorted((float(p), float(r)) for p, r in values)
    if len(pts) < 3:
        raise PreconditionError("need at least three (P, rate) samples")
    p_min, p_max = pts[0][0], pts[-1][0]
    if p_min <= 0 or math.log10(p_max / p_min) < 4.0:
        raise PreconditionError("P samples must span at least four decades")
    cut = math.sqrt(p_min * p_max)
    top = [(p, r) for p, r in pts if p >= cut]
    if len(top) < 2:
        raise PreconditionError("top half of the P range has fewer than two samples")
    x = np.log2([p for p, _ in top])
    y = np.array([r for _, r in top])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def precoder_ratio_bound_own(f: complex, g: complex, q1: np.ndarray) -> tuple[float, float]:
    h2 = np.array([f, g], dtype=np.complex128)
    lam1 = float(np.linalg.eigvalsh(q1).max())
    lhs = float(np.real(q1[0, 0])) / (1.0 + float(np.real(h2 @ q1 @ h2.conj())))
    af2 = abs(f) ** 2
    ag2 = abs(g) ** 2
    if af2 > 0.0:
        rhs = 2.0 * min(2.0 / af2 + 2.0 * (ag2 / af2) * lam1, lam1)
    else:
        rhs = 2.0 * lam1
    return lhs, rhs


def precoder_ratio_bound_cross(f: complex, g: complex, q2: np.ndarray) -> tuple[float, float]:
    h2 = np.array([f, g], dtype=np.complex128)
    lam2 = float(np.linalg.eigvalsh(q2).max())
    lhs = float(np.real(h2 @ q2 @ h2.conj())) / (1.0 + float(np.real(q2[0, 0])))
    rhs = 2.0 * abs(f) ** 2 + 2.0 * abs(g) ** 2 * lam2
    return lhs, rhs


def precoder_ratio_bounds_hold(f: complex, g: complex, q1: np.ndarray, q2: np.ndarray) -> bool:
    """Both precoder-ratio bounds, as a randomized property check.

    For PSD Q1, Q2 and h2 = [f, g]:
      Q1(1,1)/(1 + h2 Q1 h2^H) <= 2 min{2/|f|^2 + 2(|g|^2/|f|^2) l1, l1}
      h2 Q2 h2^H/(1 + Q2(1,1)) <= 2|f|^2 + 2|g|^2 l2
    with l1, l2 the top eigenvalues.  Expected to hold for every input.
    """
    lhs_a, rhs_a = precoder_ratio_bound_own(f, g, q1)
    lhs_b, rhs_b = precoder_ratio_bound_cross(f, g, q2)
    slack = 1e-9
    return lhs_a <= rhs_a * (1 + slack) + slack and lhs_b <= rhs_b * (1 + slack) + slack
