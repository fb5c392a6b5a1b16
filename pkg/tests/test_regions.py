import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsbc.channel import Channel, rayleigh
from rsbc.errors import CapacityError, ContractViolation, PreconditionError
from rsbc.lp import LinearProgram, maximize
from rsbc.numerics import hermitize, logdet_hermitian_psd
from rsbc.regions import (
    Collection,
    all_capacity_terms,
    capacity_term,
    collection_covariance,
    default_power_split,
    duality_gap_bound,
    enumerate_minimal_collections,
    exact_constraints,
    mac_weighted_max,
    mask_of,
    max_sum_rate,
    maximal_of,
    mmse_covariance,
    reduce_to_minimal,
    rs_constraints,
    users_of,
)


def members(col):
    return set(col.members)


class TestCollections:
    def test_reduce_drops_dominated(self):
        # {{1},{3},{1,2}} loses {1}, which sits inside {1,2}.
        col = Collection((mask_of([1]), mask_of([3]), mask_of([1, 2])))
        out = reduce_to_minimal(col)
        assert members(out) == {mask_of([3]), mask_of([1, 2])}
        assert out.minimal

    def test_reduce_idempotent(self):
        col = Collection((mask_of([3]), mask_of([1, 2])))
        once = reduce_to_minimal(col)
        assert members(reduce_to_minimal(once)) == members(once)

    def test_reduce_chain(self):
        col = Collection(
            (mask_of([1]), mask_of([1, 2]), mask_of([1, 2, 3])), pivot=1
        )
        assert members(reduce_to_minimal(col)) == {mask_of([1, 2, 3])}

    def test_maximal_pair(self):
        m = Collection((mask_of([1, 2]),), pivot=1, minimal=True)
        out = maximal_of(m, 1)
        assert members(out) == {mask_of([1]), mask_of([1, 2])}

    def test_maximal_singleton(self):
        m = Collection((mask_of([1]),), pivot=1, minimal=True)
        assert members(maximal_of(m, 1)) == {mask_of([1])}

    def test_maximal_fixed_cardinality(self):
        # Size-2 sets containing 1 (K = 4) widen to all sets of size <= 2.
        K = 4
        size2 = [mask_of(c) for c in itertools.combinations(range(1, K + 1), 2) if 1 in c]
        m = Collection(tuple(sorted(size2)), pivot=1, minimal=True)
        expect = {
            mask_of(c)
            for r in (1, 2)
            for c in itertools.combinations(range(1, K + 1), r)
            if 1 in c
        }
        assert members(maximal_of(m, 1)) == expect

    def test_invariants_checked(self):
        with pytest.raises(ContractViolation):
            Collection(())
        with pytest.raises(ContractViolation):
            Collection((mask_of([2]),), pivot=1)
        with pytest.raises(ContractViolation):
            Collection((mask_of([1]), mask_of([1, 2])), pivot=1, minimal=True)


class TestEnumeration:
    def test_two_users(self):
        out = enumerate_minimal_collections(1, 2)
        assert {frozenset(members(c)) for c in out} == {
            frozenset({mask_of([1])}),
            frozenset({mask_of([1, 2])}),
        }

    def test_three_users(self):
        out = enumerate_minimal_collections(1, 3)
        expect = {
            frozenset({mask_of([1])}),
            frozenset({mask_of([1, 2])}),
            frozenset({mask_of([1, 3])}),
            frozenset({mask_of([1, 2]), mask_of([1, 3])}),
            frozenset({mask_of([1, 2, 3])}),
        }
        assert {frozenset(members(c)) for c in out} == expect

    def test_single_user(self):
        out = enumerate_minimal_collections(1, 1)
        assert len(out) == 1
        assert members(out[0]) == {mask_of([1])}

    @pytest.mark.parametrize("K,count", [(2, 2), (3, 5), (4, 19), (5, 167), (6, 7580)])
    def test_counts_follow_dedekind(self, K, count):
        assert len(enumerate_minimal_collections(1, K)) == count

    def test_guard(self):
        with pytest.raises(CapacityError, match="Dedekind"):
            enumerate_minimal_collections(1, 7)

    def test_reduce_of_maximal_is_identity(self):
        for col in enumerate_minimal_collections(2, 4):
            again = reduce_to_minimal(maximal_of(col, 2))
            assert members(again) == members(col)


class TestMmseCovariance:
    def test_full_set_gives_scaled_identity(self):
        ch = rayleigh(3, 4, seed=0)
        q = mmse_covariance(ch, 0b111, 25.0)
        assert np.array_equal(q, 25.0 * np.eye(4))

    def test_identity_channel_diagonal(self):
        P = 10.0
        ch = Channel(np.eye(3, dtype=complex), (1, 1, 1))
        q = mmse_covariance(ch, 0b001, P)
        expect = np.diag([P, 1 / (1 / P + 1), 1 / (1 / P + 1)])
        assert np.allclose(q, expect, atol=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_interference_below_noise(self, seed):
        ch = rayleigh(4, 4, seed=seed)
        P = 100.0
        for s in range(1, 15):
            comp = 0b1111 & ~s
            if comp == 0:
                continue
            hbar = ch.rows_of(comp)
            leak = hbar @ mmse_covariance(ch, s, P) @ hbar.conj().T
            assert np.linalg.eigvalsh(hermitize(leak)).max() <= 1.0 + 1e-9

    def test_collection_covariance_singleton(self):
        ch = rayleigh(3, 3, seed=1)
        col = Collection((0b011,), pivot=1, minimal=True)
        assert np.allclose(
            collection_covariance(ch, col, 10.0), mmse_covariance(ch, 0b011, 10.0)
        )

    def test_collection_covariance_identity_channel(self):
        P = 10.0
        ch = Channel(np.eye(3, dtype=complex), (1, 1, 1))
        col = Collection((0b011, 0b101), pivot=1, minimal=True)
        expect = mmse_covariance(ch, 0b011, P) + mmse_covariance(ch, 0b101, P)
        assert np.allclose(collection_covariance(ch, col, P), expect)

    @pytest.mark.parametrize("seed", [3, 4])
    def test_sandwich_between_minimal_and_scaled(self, seed):
        # Q_minimal <= Q_S <= |S| Q_minimal in the PSD order.
        ch = rayleigh(3, 3, seed=seed)
        P = 30.0
        big = Collection((0b001, 0b011, 0b111), pivot=1)
        small = reduce_to_minimal(big)
        q_big = collection_covariance(ch, big, P)
        q_small = collection_covariance(ch, small, P)
        assert np.linalg.eigvalsh(hermitize(q_big - q_small)).min() >= -1e-8
        bound = len(big.members) * q_small - q_big
        assert np.linalg.eigvalsh(hermitize(bound)).min() >= -1e-8


class TestCapacityTerms:
    def test_zero_power(self):
        ch = rayleigh(2, 2, seed=0)
        assert capacity_term(ch, 0b11, 0.0) == 0.0

    def test_identity_channel(self):
        P = 9.0
        ch = Channel(np.eye(2, dtype=complex), (1, 1))
        assert capacity_term(ch, 0b11, P) == pytest.approx(2 * np.log2(1 + P))

    @pytest.mark.parametrize("seed", [0, 5])
    def test_monotone(self, seed):
        ch = rayleigh(4, 4, seed=seed)
        c = all_capacity_terms(ch, 50.0)
        for s in range(1 << 4):
            for t in range(1 << 4):
                if s & t == s:
                    assert c[s] <= c[t] + 1e-10

    @pytest.mark.parametrize("seed", [0, 5])
    def test_submodular(self, seed):
        ch = rayleigh(4, 5, seed=seed)
        c = all_capacity_terms(ch, 50.0)
        full = (1 << 4) - 1
        for a in range(1 << 4):
            sub = a
            while True:
                for b in range(full + 1):
                    lhs = c[a | b] - c[a]
                    rhs = c[sub | b] - c[sub]
                    assert lhs <= rhs + 1e-8
                if sub == 0:
                    break
                sub = (sub - 1) & a


class TestRsConstraints:
    def test_two_user_rhs_identities(self):
        # The generated right hand sides equal {C12-C2, C12-C1, C1, C2}.
        ch = rayleigh(2, 2, seed=4)
        P = 200.0
        c = all_capacity_terms(ch, P)
        cons = rs_constraints(ch, P)
        assert len(cons) == 4
        expect = sorted([c[3] - c[2], c[3] - c[1], c[1], c[2]])
        assert sorted(x.rhs for x in cons) == pytest.approx(expect, abs=1e-8)

    def test_two_user_lp_value(self):
        ch = Channel(np.eye(2, dtype=complex), (1, 1))
        P = 40.0
        c = all_capacity_terms(ch, P)
        value, _ = max_sum_rate(rs_constraints(ch, P))
        assert value == pytest.approx(min(c[1] + c[2], c[3]), abs=1e-8)

    def test_three_user_count_and_taus(self):
        ch = rayleigh(3, 3, seed=2)
        P = 100.0
        cons = rs_constraints(ch, P)
        assert len(cons) == 15
        # Exactly three constraints stem from the two-pair collections.
        pair_cons = [c for c in cons if len(c.provenance) == 2]
        assert len(pair_cons) == 3
        for c in pair_cons:
            col = Collection(c.provenance, pivot=c.pivot, minimal=True)
            hk = ch.user_matrix(c.pivot)
            arg = np.eye(1) + hk @ collection_covariance(ch, col, P) @ hk.conj().T
            assert c.rhs == pytest.approx(logdet_hermitian_psd(hermitize(arg)), abs=1e-9)

    def test_small_power_small_rhs(self):
        ch = rayleigh(3, 3, seed=2)
        cons = rs_constraints(ch, 1e-9)
        assert max(c.rhs for c in cons) < 1e-6

    def test_tau_bounded_by_single_user_capacity(self):
        # log det(I + H_k Q_S H_k^H) <= C_k + nr_k log2 |S| for minimal S.
        for seed in range(3):
            ch = rayleigh(3, 4, seed=seed)
            P = 100.0
            c = all_capacity_terms(ch, P)
            for con in rs_constraints(ch, P):
                kb = 1 << (con.pivot - 1)
                bound = c[kb] + np.log2(len(con.provenance))
                assert con.rhs <= bound + 1e-8

    def test_canonical_order(self):
        ch = rayleigh(3, 3, seed=0)
        cons = rs_constraints(ch, 10.0)
        assert [c.pivot for c in cons] == sorted(c.pivot for c in cons)

    def test_guard(self):
        ch = rayleigh(7, 7, seed=0)
        with pytest.raises(CapacityError):
            rs_constraints(ch, 10.0)


class TestExactConstraints:
    def test_single_user(self):
        ch = rayleigh(1, 2, seed=0)
        P = 10.0
        cons = exact_constraints(ch, P)
        assert len(cons) == 1
        split = default_power_split(ch, P)
        q = mmse_covariance(ch, 0b1, split[1])
        h = ch.H
        expect = logdet_hermitian_psd(hermitize(np.eye(1) + h @ q @ h.conj().T))
        assert cons[0].rhs == pytest.approx(expect, abs=1e-10)

    def test_counts(self):
        assert len(exact_constraints(rayleigh(2, 2, seed=0), 10.0)) == 2 * 3
        assert len(exact_constraints(rayleigh(3, 3, seed=0), 10.0)) == 3 * 15

    def test_guard(self):
        with pytest.raises(CapacityError):
            exact_constraints(rayleigh(5, 5, seed=0), 10.0)

    def test_zero_split(self):
        ch = rayleigh(2, 2, seed=1)
        cons = exact_constraints(ch, 5.0, power_split={s: 0.0 for s in range(1, 4)})
        assert max(abs(c.rhs) for c in cons) == 0.0

    def test_power_violation(self):
        ch = rayleigh(2, 2, seed=1)
        with pytest.raises(PreconditionError, match="power"):
            exact_constraints(ch, 5.0, power_split={s: 5.0 for s in range(1, 4)})

    def test_default_split_meets_budget(self):
        ch = rayleigh(3, 3, seed=7)
        P = 50.0
        split = default_power_split(ch, P)
        spent = sum(
            np.trace(mmse_covariance(ch, s, p)).real
            for s, p in split.items()
            if p > 0
        )
        assert spent <= P + 1e-6

    def test_exact_rhs_below_interference_free_version(self):
        # Dropping the interference term and raising powers to the nominal P
        # can only increase the constraint value.
        ch = rayleigh(2, 2, seed=9)
        P = 100.0
        split = default_power_split(ch, P)
        cons = exact_constraints(ch, P, power_split=split)
        for c in cons:
            hk = ch.user_matrix(c.pivot)
            small = np.eye(1)
            big = np.eye(1)
            for s in c.streams:
                small = small + hk @ mmse_covariance(ch, s, split[s]) @ hk.conj().T
                big = big + hk @ mmse_covariance(ch, s, P) @ hk.conj().T
            small_v = logdet_hermitian_psd(hermitize(small))
            big_v = logdet_hermitian_psd(hermitize(big))
            interference = np.eye(1)
            kb = 1 << (c.pivot - 1)
            for s in range(1, 4):
                if not s & kb:
                    interference = (
                        interference + hk @ mmse_covariance(ch, s, split[s]) @ hk.conj().T
                    )
            penalty = logdet_hermitian_psd(hermitize(interference))
            assert c.rhs <= small_v + 1e-9 <= big_v + 1e-9
            assert c.rhs >= small_v - penalty - 1e-9


class TestMacWeightedMax:
    def test_uniform_weights_full_rank(self):
        ch = rayleigh(3, 3, seed=3)
        P = 20.0
        assert mac_weighted_max(ch, P, [1, 1, 1]) == pytest.approx(
            capacity_term(ch, 0b111, P)
        )

    def test_single_user_weight(self):
        ch = rayleigh(2, 2, seed=3)
        P = 20.0
        assert mac_weighted_max(ch, P, [1, 0]) == pytest.approx(
            capacity_term(ch, 0b01, P)
        )

    def test_two_one_weights_identity_channel(self):
        ch = Channel(np.eye(2, dtype=complex), (1, 1))
        P = 15.0
        c1 = capacity_term(ch, 0b01, P)
        c12 = capacity_term(ch, 0b11, P)
        assert mac_weighted_max(ch, P, [2, 1]) == pytest.approx(2 * c1 + (c12 - c1))

    @pytest.mark.parametrize("seed", [0, 1])
    def test_greedy_matches_lp(self, seed):
        rng = np.random.default_rng(seed)
        ch = rayleigh(3, 3, seed=seed)
        P = 50.0
        c = all_capacity_terms(ch, P)
        rows = []
        for mask in range(1, 8):
            rows.append(([1.0 if mask >> j & 1 else 0.0 for j in range(3)], c[mask]))
        for _ in range(5):
            w = rng.uniform(0, 2, size=3)
            lp_val = maximize(LinearProgram.from_rows(w, rows)).value
            assert mac_weighted_max(ch, P, w) == pytest.approx(lp_val, abs=1e-8)

    def test_negative_weights_rejected(self):
        with pytest.raises(PreconditionError):
            mac_weighted_max(rayleigh(2, 2, seed=0), 10.0, [-1, 1])


class TestDualityGapBound:
    def test_values(self):
        assert duality_gap_bound(4, 1) == 0.0
        assert duality_gap_bound(2, 2) == pytest.approx(2.0)
        assert duality_gap_bound(6, 5) == pytest.approx(6 * np.log2(5))

    def test_domain(self):
        with pytest.raises(PreconditionError):
            duality_gap_bound(0, 1)


@settings(derandomize=True, max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_constraint_export_round_trip(seed):
    ch = rayleigh(2, 2, seed=seed % 50)
    cons = rs_constraints(ch, 10.0)
    for c in cons:
        d = c.as_json_dict()
        assert set(d) == {"pivot", "streams", "rhs_bits", "provenance"}
        assert all(users_of(s) for s in d["streams"])
