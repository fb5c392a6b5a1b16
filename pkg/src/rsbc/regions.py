"""Collections of decode-sets, MMSE covariances and rate-constraint systems.

A stream index is a nonempty subset of users encoded as a bitmask (user k
is bit k-1).  For every user k the reduced constant-gap constraint system
carries one constraint per *minimal* collection (an antichain of stream
indices all containing k); the left hand side of that constraint sums the
rates of the corresponding *maximal* collection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .channel import Channel
from .errors import CapacityError, ContractViolation, PreconditionError
from .lp import LinearProgram, maximize
from .numerics import hermitize, logdet_hermitian_psd

#: Antichain enumeration is guarded here; the count per user is the number
#: of nonempty antichains on K-1 elements (7580 at K = 6) and explodes after.
MAX_ENUMERATION_USERS = 6

#: The unreduced exact region has 2^(2^(K-1)) - 1 collections per user.
MAX_EXACT_USERS = 4

_NONEMPTY_ANTICHAIN_COUNTS = {1: 1, 2: 2, 3: 5, 4: 19, 5: 167, 6: 7580}


def user_bit(user: int) -> int:
    return 1 << (user - 1)

def full_mask(K: int) -> int:
    return (1 << K) - 1

def mask_of(users: Iterable[int]) -> int:
    m = 0
    for u in users:
        m |= user_bit(u)
    return m

def users_of(mask: int) -> tuple[int, ...]:
    return tuple(k + 1 for k in range(mask.bit_length()) if mask >> k & 1)

def popcount(mask: int) -> int:
    return bin(mask).count("1")


@dataclass(frozen=True)
class Collection:
    """A set of stream indices; with a pivot, all members must contain it."""

    members: tuple[int, ...]
    pivot: int | None = None
    minimal: bool = False

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        object.__setattr__(self, "members", members)
        if not members:
            raise ContractViolation("a collection must be nonempty")
        if any(m <= 0 for m in members):
            raise ContractViolation("stream indices must be nonempty user sets")
        if len(set(members)) != len(members):
            raise ContractViolation("duplicate members in collection")
        if self.pivot is not None:
            pb = user_bit(self.pivot)
            if any(not m & pb for m in members):
                raise ContractViolation(
                    f"every member must contain the pivot user {self.pivot}"
                )
        if self.minimal and not _is_antichain(members):
            raise ContractViolation("collection flagged minimal is not an antichain")


@dataclass(frozen=True)
class RateConstraint:
    """sum of R_stream over ``streams``  <=  ``rhs`` bits."""

    streams: tuple[int, ...]
    rhs: float
    pivot: int
    provenance: tuple[int, ...]

    def __post_init__(self):
        if not self.streams:
            raise ContractViolation("a rate constraint needs at least one stream")
        if not np.isfinite(self.rhs):
            raise ContractViolation(f"non-finite right hand side {self.rhs}")

    def as_json_dict(self) -> dict:
        return {
            "pivot": self.pivot,
            "streams": list(self.streams),
            "rhs_bits": self.rhs,
            "provenance": list(self.provenance),
        }


def _is_antichain(members: Sequence[int]) -> bool:
    for a in members:
        for b in members:
            if a != b and a & b == a:
                return False
    return True


def reduce_to_minimal(c: Collection) -> Collection:
    """Drop every member that is a proper subset of another member.

    Idempotent; the result is an antichain and keeps the pivot.
    """
    keep = tuple(
        m
        for m in c.members
        if not any(m != o and m & o == m for o in c.members)
    )
    return Collection(tuple(sorted(keep)), pivot=c.pivot, minimal=True)


def maximal_of(m: Collection, k: int) -> Collection:
    """Union of all collections with pivot k that reduce to ``m``.

    Adds every proper subset (containing k) of a member.
    """
    if m.pivot != k:
        raise PreconditionError(f"collection pivot {m.pivot} differs from user {k}")
    if not m.minimal:
        raise PreconditionError("maximal_of expects a minimal collection")
    kb = user_bit(k)
    out = set(m.members)
    for s in m.members:
        rest = s & ~kb
        sub = rest
        while True:
            out.add(sub | kb)
            if sub == 0:
                break
            sub = (sub - 1) & rest
    return Collection(tuple(sorted(out)), pivot=k)


def enumerate_minimal_collections(k: int, K: int) -> list[Collection]:
    """All antichains of user subsets that contain user k.

    Depth-first over candidate subsets in decreasing-cardinality order;
    with that ordering a candidate can only be a subset of an already
    chosen member, so one containment test prunes the branch.
    """
    if K > MAX_ENUMERATION_USERS:
        raise CapacityError(
            f"K={K}: the antichain count per user is the number of nonempty "
            f"antichains on {K - 1} elements and grows like the Dedekind "
            f"numbers; enumeration is guarded at K <= {MAX_ENUMERATION_USERS}"
        )
    if not 1 <= k <= K:
        raise PreconditionError(f"pivot {k} outside 1..{K}")
    kb = user_bit(k)
    others = full_mask(K) & ~kb
    candidates = []
    sub = others
    while True:
        candidates.append(sub | kb)
        if sub == 0:
            break
        sub = (sub - 1) & others
    ordered = sorted(candidates, key=lambda m: (-popcount(m), m))

    out: list[Collection] = []
    chosen: list[int] = []

    def grow(start: int) -> None:
        for idx in range(start, len(ordered)):
            cand = ordered[idx]
            if any(cand & m == cand for m in chosen):
                continue
            chosen.append(cand)
            out.append(Collection(tuple(sorted(chosen)), pivot=k, minimal=True))
            grow(idx + 1)
            chosen.pop()

    grow(0)
    assert len(out) == _NONEMPTY_ANTICHAIN_COUNTS[K]
    return out


def mmse_covariance(ch: Channel, s: int, P: float) -> np.ndarray:
    """MMSE stream covariance Q_s = (P^-1 I + H_sbar^H H_sbar)^-1.

    The complement convention H_empty = 0 makes the full-set stream
    covariance exactly P * I.  The result keeps interference at the
    unintended users below the noise level: H_sbar Q_s H_sbar^H <= I.
    """
    if P <= 0:
        raise PreconditionError(f"P must be positive, got {P}")
    if s <= 0:
        raise ContractViolation("stream index must be a nonempty user set")
    comp = full_mask(ch.K) & ~s
    if comp == 0:
        return P * np.eye(ch.M, dtype=np.complex128)
    hbar = ch.rows_of(comp)
    q = np.linalg.inv(np.eye(ch.M) / P + hbar.conj().T @ hbar)
    return hermitize(q)


def all_mmse_covariances(ch: Channel, P: float) -> dict[int, np.ndarray]:
    """MMSE covariances for every nonempty stream index (2^K - 1 matrices)."""
    return {s: mmse_covariance(ch, s, P) for s in range(1, 1 << ch.K)}


def collection_covariance(ch: Channel, m: Collection, P: float) -> np.ndarray:
    """Sum of the MMSE covariances over the members of a collection."""
    q = np.zeros((ch.M, ch.M), dtype=np.complex128)
    for s in m.members:
        q += mmse_covariance(ch, s, P)
    return q


def capacity_term(ch: Channel, s: int, P: float) -> float:
    """C_s = log2 det(I + P H_s H_s^H); zero for the empty set or P = 0."""
    if P < 0:
        raise PreconditionError(f"P must be nonnegative, got {P}")
    if s == 0 or P == 0:
        return 0.0
    rows = ch.rows_of(s)
    gram = np.eye(rows.shape[0]) + P * (rows @ rows.conj().T)
    return logdet_hermitian_psd(hermitize(gram))


def all_capacity_terms(ch: Channel, P: float) -> np.ndarray:
    """C_s for every subset mask 0..2^K-1 (index = mask)."""
    out = np.zeros(1 << ch.K)
    for s in range(1, 1 << ch.K):
        out[s] = capacity_term(ch, s, P)
    return out


def rs_constraints(ch: Channel, P: float) -> list[RateConstraint]:
    """Reduced constant-gap constraint system of the RS scheme.

    One constraint per (user k, minimal collection with pivot k): the rates
    of the maximal collection sum to at most
    log2 det(I + H_k Q_minimal H_k^H).  Emitted pivot-ascending, then in
    antichain generation order.

    The per-user blocks H_k Q_s H_k^H are precomputed for the 2^K - 1
    stream covariances, so the cost per collection is a small matrix sum
    rather than fresh inversions (at K = 6 there are 7580 collections per
    user but still only 63 covariances).
    """
    if P <= 0:
        raise PreconditionError(f"P must be positive, got {P}")
    covs = all_mmse_covariances(ch, P)
    out: list[RateConstraint] = []
    for k in range(1, ch.K + 1):
        hk = ch.user_matrix(k)
        blocks = {s: hk @ q @ hk.conj().T for s, q in covs.items()}
        eye = np.eye(hk.shape[0])
        for minimal in enumerate_minimal_collections(k, ch.K):
            arg = eye + sum(blocks[s] for s in minimal.members)
            rhs = logdet_hermitian_psd(hermitize(arg))
            out.append(
                RateConstraint(
                    streams=maximal_of(minimal, k).members,
                    rhs=rhs,
                    pivot=k,
                    provenance=minimal.members,
                )
            )
    return out


def _all_subcollections(streams: tuple[int, ...]):
    n = len(streams)
    for sel in range(1, 1 << n):
        yield tuple(streams[i] for i in range(n) if sel >> i & 1)


def default_power_split(ch: Channel, P: float) -> dict[int, float]:
    """Per-stream nominal powers scaled so the spent power meets the budget.

    Starts from the equal split P/(2^K - 1) and rescales all nominal powers
    by a common factor until sum_s trace(Q_s) = P; without the rescaling the
    traces generically add up to more than P.
    """
    streams = list(range(1, 1 << ch.K))
    base = {s: P / len(streams) for s in streams}

    def spent(scale: float) -> float:
        return sum(
            np.trace(mmse_covariance(ch, s, scale * base[s])).real for s in streams
        )

    if spent(1.0) <= P:
        return base
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mid == 0.0 or spent(mid) > P:
            hi = mid
        else:
            lo = mid
    return {s: lo * base[s] for s in streams}


def exact_constraints(
    ch: Channel, P: float, power_split: dict[int, float] | None = None
) -> list[RateConstraint]:
    """Exact finite-SNR achievable-rate constraints with interference terms.

    For every user k and every nonempty sub-collection S of {streams
    containing k}: sum of R_s over S <= log2 det(I + (I + interference)^-1
    * signal), with the interference summed over streams not containing k.
    Guarded at K <= 4 (the per-user collection count is 2^(2^(K-1)) - 1).
    """
    if ch.K > MAX_EXACT_USERS:
        raise CapacityError(
            f"K={ch.K}: the exact region has 2^(2^(K-1))-1 collections per "
            f"user; guarded at K <= {MAX_EXACT_USERS}"
        )
    if P <= 0:
        raise PreconditionError(f"P must be positive, got {P}")
    if power_split is None:
        power_split = default_power_split(ch, P)
    else:
        spent = sum(
            np.trace(_split_covariance(ch, s, p)).real for s, p in power_split.items()
        )
        if spent > P + 1e-6:
            raise PreconditionError(
                f"power split spends {spent:.9g} > P = {P:.9g}"
            )

    all_streams = list(range(1, 1 << ch.K))
    covs = {s: _split_covariance(ch, s, power_split.get(s, 0.0)) for s in all_streams}

    out: list[RateConstraint] = []
    for k in range(1, ch.K + 1):
        hk = ch.user_matrix(k)
        kb = user_bit(k)
        own = tuple(s for s in all_streams if s & kb)
        noise = np.eye(hk.shape[0], dtype=np.complex128)
        for s in all_streams:
            if not s & kb:
                noise = noise + hk @ covs[s] @ hk.conj().T
        noise = hermitize(noise)
        log_noise = logdet_hermitian_psd(noise)
        signal = {s: hermitize(hk @ covs[s] @ hk.conj().T) for s in own}
        for sub in _all_subcollections(own):
            total = noise + sum(signal[s] for s in sub)
            rhs = logdet_hermitian_psd(hermitize(total)) - log_noise
            out.append(
                RateConstraint(streams=sub, rhs=rhs, pivot=k, provenance=sub)
            )
    return out


def _split_covariance(ch: Channel, s: int, p_s: float) -> np.ndarray:
    if p_s < 0:
        raise PreconditionError(f"stream power must be nonnegative, got {p_s}")
    if p_s == 0.0:
        return np.zeros((ch.M, ch.M), dtype=np.complex128)
    return mmse_covariance(ch, s, p_s)


def mac_weighted_max(ch: Channel, P: float, weights: Sequence[float]) -> float:
    """Greedy maximum of sum_k w_k R_k over the dual-MAC polymatroid.

    The rank function is C_s, so sorting users by weight (descending,
    ties by index) and assigning marginal ranks is optimal.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.size != ch.K:
        raise ContractViolation(f"{w.size} weights for {ch.K} users")
    if np.any(w < 0):
        raise PreconditionError("weights must be nonnegative")
    order = sorted(range(1, ch.K + 1), key=lambda k: (-w[k - 1], k))
    value = 0.0
    mask = 0
    prev = 0.0
    for k in order:
        mask |= user_bit(k)
        cur = capacity_term(ch, mask, P)
        value += w[k - 1] * (cur - prev)
        prev = cur
    return value


def duality_gap_bound(nt: int, nr: int) -> float:
    """Worst-case region offset n_t * log2(n_r) between dual descriptions."""
    if nt < 1 or nr < 1:
        raise PreconditionError(f"antenna counts must be >= 1, got nt={nt}, nr={nr}")
    return nt * float(np.log2(nr))


def constraints_lp(
    constraints: Sequence[RateConstraint],
    objective: dict[int, float],
    variables: Sequence[int] | None = None,
) -> tuple[LinearProgram, list[int]]:
    """Assemble an LP over stream-rate variables from rate constraints.

    ``variables`` restricts (and orders) the stream variables; streams not
    listed are fixed to zero while their constraints are retained.
    """
    if variables is None:
        seen: set[int] = set()
        for c in constraints:
            seen.update(c.streams)
        variables = sorted(seen)
    variables = list(variables)
    index = {s: i for i, s in enumerate(variables)}
    a = np.zeros((len(constraints), len(variables)))
    b = np.empty(len(constraints))
    for i, c in enumerate(constraints):
        for s in c.streams:
            j = index.get(s)
            if j is not None:
                a[i, j] = 1.0
        b[i] = c.rhs
    obj = np.array([objective.get(s, 0.0) for s in variables])
    return LinearProgram(obj, a, b), variables


def max_sum_rate(
    constraints: Sequence[RateConstraint], variables: Sequence[int] | None = None
) -> tuple[float, dict[int, float]]:
    """Maximize the plain sum of stream rates over a constraint system."""
    if variables is None:
        seen: set[int] = set()
        for c in constraints:
            seen.update(c.streams)
        variables = sorted(seen)
    lp, order = constraints_lp(constraints, {s: 1.0 for s in variables}, variables)
    res = maximize(lp)
    if res.status != "optimal":
        raise PreconditionError(f"sum-rate LP terminated with status {res.status}")
    return res.value, {s: float(res.solution[i]) for i, s in enumerate(order)}
