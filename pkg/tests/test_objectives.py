"""Objectives: value oracles, marginal gains, multilinear extension tools."""

import itertools

import numpy as np
import pytest

from conftest import small_objective
from osbm.objectives import (
    BudgetAdditiveObjective,
    CoverageObjective,
    LinearObjective,
    PerUserCoverageObjective,
    multilinear_exact,
    multilinear_mc,
    partial_derivative,
)


def brute_multilinear(objective, x):
    """Independent oracle: direct sum over all subsets via itertools."""
    m = len(x)
    total = 0.0
    for size in range(m + 1):
        for subset in itertools.combinations(range(m), size):
            p = 1.0
            for e in range(m):
                p *= x[e] if e in subset else (1.0 - x[e])
            total += p * objective.value(subset)
    return total


class TestValueOracles:
    def test_empty_set_is_zero_for_every_kind(self, rng):
        for kind in ("linear", "coverage", "budget_additive"):
            obj = small_objective(kind, 5, rng)
            assert obj.value([]) == 0.0

    def test_budget_clamp(self):
        obj = BudgetAdditiveObjective([3.0, 4.0], budget=5.0)
        assert obj.value([0, 1]) == 5.0

    def test_coverage_union(self):
        obj = CoverageObjective([frozenset({0, 1}), frozenset({1, 2})],
                                [1.0, 1.0, 1.0])
        assert obj.value([0, 1]) == 3.0

    def test_duplicate_edges_do_not_double_count(self):
        obj = LinearObjective([2.0, 5.0])
        assert obj.value([1, 1, 1]) == 5.0

    def test_unknown_edge_rejected(self):
        obj = LinearObjective([1.0])
        with pytest.raises(ValueError, match="unknown edge"):
            obj.value([3])


class TestMarginalGain:
    def test_linear_gain_independent_of_set(self):
        obj = LinearObjective([2.0, 7.0, 1.0])
        assert obj.gain([], 1) == 7.0
        assert obj.gain([0, 2], 1) == 7.0

    def test_saturated_budget_gain_zero(self):
        obj = BudgetAdditiveObjective([3.0, 4.0, 2.0], budget=5.0)
        assert obj.gain([0, 1], 2) == 0.0

    def test_coverage_overlap_gain(self):
        obj = CoverageObjective([frozenset({0, 1}), frozenset({1, 2})],
                                [1.0, 1.0, 1.0])
        assert obj.gain([0], 1) == 1.0

    def test_member_edge_rejected(self):
        obj = LinearObjective([1.0, 1.0])
        with pytest.raises(ValueError, match="already in"):
            obj.gain([0], 0)

    def test_gain_nonnegative_everywhere(self, rng):
        for kind in ("linear", "coverage", "budget_additive"):
            obj = small_objective(kind, 6, rng)
            for _ in range(50):
                size = int(rng.integers(0, 6))
                s = set(rng.choice(6, size=size, replace=False).tolist())
                e = int(rng.integers(0, 6))
                if e in s:
                    continue
                assert obj.gain(s, e) >= -1e-12


class TestSubmodularityAudit:
    def test_diminishing_returns_on_random_triples(self, rng):
        # 1000 random (S, S', e) with S subset of S' for each built-in kind
        for kind in ("linear", "coverage", "budget_additive"):
            obj = small_objective(kind, 7, rng)
            checked = 0
            while checked < 1000:
                big = set(rng.choice(7, size=int(rng.integers(1, 7)),
                                     replace=False).tolist())
                small = {e for e in big if rng.random() < 0.6}
                e = int(rng.integers(0, 7))
                if e in big:
                    continue
                assert obj.gain(small, e) >= obj.gain(big, e) - 1e-12
                checked += 1


class TestMultilinearExact:
    def test_matches_independent_enumeration(self, rng):
        for kind in ("linear", "coverage", "budget_additive"):
            obj = small_objective(kind, 5, rng)
            x = rng.random(5)
            assert multilinear_exact(obj, x) == pytest.approx(
                brute_multilinear(obj, x), rel=1e-12)

    def test_hand_computed_coverage_point(self):
        obj = CoverageObjective([frozenset({0, 1}), frozenset({1, 2})],
                                [1.0, 1.0, 1.0])
        # subsets: {}, {e1}->2, {e2}->2, {e1,e2}->3, each weight 1/4
        assert multilinear_exact(obj, [0.5, 0.5]) == pytest.approx(1.75)

    def test_integral_point_equals_set_value(self, rng):
        for kind in ("linear", "coverage", "budget_additive"):
            obj = small_objective(kind, 6, rng)
            x = (rng.random(6) < 0.5).astype(float)
            support = np.flatnonzero(x)
            assert multilinear_exact(obj, x) == pytest.approx(
                obj.value(support), rel=1e-12)

    def test_linear_case_is_dot_product(self, rng):
        w = rng.random(8)
        x = rng.random(8)
        assert multilinear_exact(LinearObjective(w), x) == pytest.approx(
            float(w @ x))

    def test_too_large_ground_set_rejected(self):
        obj = LinearObjective(np.ones(21))
        with pytest.raises(ValueError, match="enumeration"):
            multilinear_exact(obj, np.full(21, 0.5))

    def test_monotone_in_each_coordinate(self, rng):
        obj = small_objective("coverage", 5, rng)
        x = 0.2 + 0.5 * rng.random(5)
        base = multilinear_exact(obj, x)
        for e in range(5):
            bumped = x.copy()
            bumped[e] = min(1.0, bumped[e] + 0.25)
            assert multilinear_exact(obj, bumped) >= base - 1e-12


class TestMultilinearMonteCarlo:
    def test_integral_point_has_zero_error(self, rng):
        obj = small_objective("coverage", 6, rng)
        x = (rng.random(6) < 0.5).astype(float)
        est, se = multilinear_mc(obj, x, samples=50, seed=1)
        assert se == 0.0
        assert est == pytest.approx(obj.value(np.flatnonzero(x)))

    def test_single_sample_is_one_draw(self, rng):
        obj = small_objective("linear", 4, rng)
        est, se = multilinear_mc(obj, rng.random(4), samples=1, seed=2)
        assert se == 0.0
        values = {obj.value(s) for s in itertools.chain.from_iterable(
            itertools.combinations(range(4), k) for k in range(5))}
        assert any(abs(est - v) < 1e-12 for v in values)

    def test_tracks_exact_value_within_three_se(self, rng):
        obj = CoverageObjective([frozenset({0, 1}), frozenset({1, 2})],
                                [1.0, 1.0, 1.0])
        est, se = multilinear_mc(obj, [0.5, 0.5], samples=100_000, seed=3)
        assert abs(est - 1.75) <= 3 * se

    def test_repeated_estimates_stay_calibrated(self, rng):
        # 100 independent estimates: at least 99 inside their own 3-se band
        obj = small_objective("budget_additive", 8, rng)
        x = rng.random(8)
        exact = multilinear_exact(obj, x)
        hits = 0
        for s in range(100):
            est, se = multilinear_mc(obj, x, samples=600, seed=500 + s)
            if abs(est - exact) <= 3 * se:
                hits += 1
        assert hits >= 99


class TestPartialDerivative:
    def test_linear_has_zero_variance(self):
        obj = LinearObjective([2.0, 7.0])
        est, se = partial_derivative(obj, [0.4, 0.9], 0, samples=64, seed=0)
        assert est == pytest.approx(2.0)
        assert se == 0.0

    def test_matches_exact_finite_difference(self, rng):
        for kind in ("coverage", "budget_additive"):
            obj = small_objective(kind, 6, rng)
            x = rng.random(6)
            for e in (0, 3):
                hi, lo = x.copy(), x.copy()
                hi[e], lo[e] = 1.0, 0.0
                exact = multilinear_exact(obj, hi) - multilinear_exact(obj, lo)
                est, se = partial_derivative(obj, x, e, samples=4000,
                                             seed=11 + e)
                assert abs(est - exact) <= 3 * se + 1e-12

    def test_unsaturated_singleton_budget(self):
        obj = BudgetAdditiveObjective([3.0, 4.0], budget=10.0)
        est, se = partial_derivative(obj, [0.0, 0.0], 0, samples=32, seed=5)
        assert est == pytest.approx(3.0)


class TestEvaluators:
    def test_incremental_matches_recompute(self, rng):
        for kind in ("linear", "coverage", "budget_additive"):
            obj = small_objective(kind, 8, rng)
            ev = obj.evaluator()
            members = []
            order = rng.permutation(8)
            for e in order[:6]:
                e = int(e)
                expected_gain = obj.value(set(members) | {e}) - obj.value(members)
                assert ev.gain(e) == pytest.approx(expected_gain, abs=1e-12)
                ev.add(e)
                members.append(e)
                assert ev.value == pytest.approx(obj.value(members), abs=1e-12)

    def test_re_adding_member_gains_nothing(self, rng):
        obj = small_objective("coverage", 4, rng)
        ev = obj.evaluator()
        ev.add(2)
        assert ev.gain(2) == 0.0
        before = ev.value
        ev.add(2)
        assert ev.value == before


class TestPerUserCoverage:
    def test_sums_independent_user_coverages(self):
        # two users; user 0 weighs genre 0 at 2, user 1 weighs both at 1, 3
        obj = PerUserCoverageObjective(
            edge_online=[0, 1, 1],
            genre_sets=[frozenset({0}), frozenset({0}), frozenset({1})],
            user_weights=np.array([[2.0, 0.0], [1.0, 3.0]]),
        )
        assert obj.value([0]) == 2.0
        assert obj.value([1]) == 1.0
        assert obj.value([1, 2]) == 4.0
        assert obj.value([0, 1, 2]) == 6.0

    def test_cover_fractions(self):
        obj = PerUserCoverageObjective(
            edge_online=[0, 1],
            genre_sets=[frozenset({0}), frozenset({0})],
            user_weights=np.array([[2.0, 2.0], [5.0, 0.0]]),
        )
        fr = obj.user_cover_fractions([0, 1])
        assert fr[0] == pytest.approx(0.5)
        assert fr[1] == pytest.approx(1.0)

    def test_coordinate_gains_match_generic(self, rng):
        obj = PerUserCoverageObjective(
            edge_online=rng.integers(0, 3, size=7),
            genre_sets=[frozenset(rng.choice(4, size=2, replace=False).tolist())
                        for _ in range(7)],
            user_weights=rng.random((3, 4)),
        )
        mask = rng.random(7) < 0.5
        fast = obj.coordinate_gains(mask)
        base = set(np.flatnonzero(mask).tolist())
        slow = [obj.value(base | {e}) - obj.value(base - {e}) for e in range(7)]
        np.testing.assert_allclose(fast, slow, atol=1e-12)
