"""Online policies: behavior, distributional laws, simulator contracts."""

import math

import numpy as np
import pytest

from conftest import small_instance, small_objective
from osbm.instances import ArrivalSequence, build_instance, sample_arrivals
from osbm.lp import solve_offline_lp
from osbm.objectives import BudgetAdditiveObjective, LinearObjective
from osbm.offline import expected_opt
from osbm.online import (
    MatchState,
    make_policy,
    run_trial,
    simulate,
)
from osbm.rounding import SampledSupport, select_per_star


def perfect_matching_instance(T):
    return build_instance(
        offline=[(f"u{i}", 1) for i in range(T)],
        online=[(f"v{i}", 1.0) for i in range(T)],
        edges=[(f"e{i}", f"u{i}", f"v{i}") for i in range(T)],
        horizon=T,
    )


def binom_sigma(p, n):
    return math.sqrt(max(p * (1 - p), 1e-12) / n)


class TestMarginalSampling:
    def test_zero_mass_never_matches(self, rng):
        inst = small_instance(rng)
        obj = small_objective("linear", inst.n_edges, rng)
        m = simulate(inst, obj, "marginal-sampling",
                     x_star=np.zeros(inst.n_edges), trials=50, seed=0)
        assert m.mean == 0.0

    def test_forced_single_draw_matches(self):
        inst = build_instance([("u0", 1)], [("v0", 1.0)],
                              [("e0", "u0", "v0")], horizon=1)
        obj = LinearObjective([1.0])
        m = simulate(inst, obj, "marginal-sampling", x_star=np.array([1.0]),
                     trials=200, seed=1, benchmark=("brute", 1.0))
        assert m.mean == 1.0 and m.ratio == 1.0

    def test_infeasible_marginals_rejected(self):
        inst = build_instance([("u0", 1)], [("v0", 0.4)],
                              [("e0", "u0", "v0")], horizon=2)
        obj = LinearObjective([1.0])
        with pytest.raises(ValueError, match="infeasible"):
            make_policy("marginal-sampling", inst, obj, np.array([0.9]))

    def test_tight_instance_ratio(self):
        # perfect matching with full marginals: each type matched on first
        # arrival, so the ratio approaches 1 - (1 - 1/T)^T
        T = 20
        inst = perfect_matching_instance(T)
        obj = LinearObjective(np.ones(T))
        m = simulate(inst, obj, "marginal-sampling", x_star=np.ones(T),
                     trials=4000, seed=2, benchmark=("lp", float(T)))
        target = 1 - (1 - 1 / T) ** T
        assert abs(m.ratio - target) <= 4 * m.ratio_std_error

    def test_coupon_instance_reaches_expected_opt(self):
        # one edge with rate 1 over T=2: policy matches iff the type arrives
        inst = build_instance([("u0", 1)], [("v0", 1.0)],
                              [("e0", "u0", "v0")], horizon=2)
        obj = LinearObjective([1.0])
        e_opt, _ = expected_opt(inst, obj, mode="exact")
        m = simulate(inst, obj, "marginal-sampling", x_star=np.array([1.0]),
                     trials=30_000, seed=3, benchmark=("brute", e_opt))
        assert abs(m.ratio - 1.0) <= 3 * m.ratio_std_error

    def test_eta_splits_draws(self):
        # eta=2 with two disjoint offline slots: both can match on one arrival
        inst = build_instance(
            [("u0", 1), ("u1", 1)], [("v0", 1.0)],
            [("e0", "u0", "v0"), ("e1", "u1", "v0")], horizon=1, eta=2)
        obj = LinearObjective([1.0, 1.0])
        m = simulate(inst, obj, "marginal-sampling",
                     x_star=np.array([1.0, 1.0]), trials=4000, seed=4)
        # two draws over {e0: 1/2, e1: 1/2}; distinct-u dedupes repeats, so
        # the expected matched count is 0.5 * 1 + 0.5 * 2
        assert abs(m.mean - 1.5) <= 3 * m.std_error

    def test_single_star_unmatched_frequency(self):
        # one offline vertex, several types: unmatched prob ~ exp(-total mass)
        T = 300
        rates = [0.9, 0.8, 0.7]
        x = np.array([0.45, 0.3, 0.15])
        inst = build_instance(
            [("u0", 1)],
            [(f"v{j}", r) for j, r in enumerate(rates)],
            [(f"e{j}", "u0", f"v{j}") for j in range(3)],
            horizon=T)
        obj = LinearObjective(np.ones(3))
        policy = make_policy("marginal-sampling", inst, obj, x)
        n = 8000
        unmatched = 0
        edge_hits = np.zeros(3)
        for s in range(n):
            seq = sample_arrivals(inst, s)
            rng = np.random.default_rng((s, 1))
            _, matched = run_trial(policy, inst, obj, seq, rng)
            if not matched:
                unmatched += 1
            else:
                edge_hits[matched[0]] += 1
        x_u = x.sum()
        p0 = math.exp(-x_u)
        assert abs(unmatched / n - p0) <= 3 * binom_sigma(p0, n)
        # conditional on matched, the edge law is proportional to x
        matched_total = n - unmatched
        for e in range(3):
            share = x[e] / x_u
            sd = binom_sigma(share, matched_total)
            assert abs(edge_hits[e] / matched_total - share) <= 3 * sd

    def test_distant_stars_nearly_independent(self):
        T = 300
        inst = build_instance(
            [("u0", 1), ("u1", 1)],
            [("v0", 0.8), ("v1", 0.8)],
            [("e0", "u0", "v0"), ("e1", "u1", "v1")],
            horizon=T)
        obj = LinearObjective(np.ones(2))
        policy = make_policy("marginal-sampling", inst, obj,
                             np.array([0.7, 0.7]))
        n = 8000
        hits = np.zeros((n, 2))
        for s in range(n):
            seq = sample_arrivals(inst, s)
            rng = np.random.default_rng((s, 1))
            _, matched = run_trial(policy, inst, obj, seq, rng)
            for e in matched:
                hits[s, e] = 1.0
        cov = np.cov(hits[:, 0], hits[:, 1])[0, 1]
        assert abs(cov) <= 3 * 0.25 / math.sqrt(n) + 5.0 / T


class TestContentionResolution:
    def test_requires_integral_rates(self, rng):
        inst = small_instance(rng, integral=False)
        obj = small_objective("linear", inst.n_edges, rng)
        with pytest.raises(ValueError, match="integral"):
            make_policy("contention-resolution", inst, obj,
                        np.zeros(inst.n_edges))
        make_policy("contention-resolution", inst, obj,
                    np.zeros(inst.n_edges), allow_fractional_cr=True)

    def test_single_edge_full_mass_always_matches(self):
        inst = perfect_matching_instance(1)
        obj = LinearObjective([1.0])
        m = simulate(inst, obj, "contention-resolution", x_star=np.ones(1),
                     trials=300, seed=5)
        assert m.mean == 1.0

    def test_empty_sampled_neighborhood_skips(self):
        inst = perfect_matching_instance(2)
        obj = LinearObjective(np.ones(2))
        m = simulate(inst, obj, "contention-resolution", x_star=np.zeros(2),
                     trials=100, seed=6)
        assert m.mean == 0.0

    def test_conditional_marginal_audit(self, rng):
        # survival probability of a sampled edge stays above the
        # half-times-(1 - e^{-1/2}) floor
        floor = 0.5 * (1 - math.exp(-0.5))
        inst = small_instance(rng, n_offline=4, n_online=4, integral=True)
        obj = small_objective("linear", inst.n_edges, rng)
        x, _, _ = solve_offline_lp(inst, obj)
        policy = make_policy("contention-resolution", inst, obj, x)
        n = 12_000
        sampled = np.zeros(inst.n_edges)
        matched_given_sampled = np.zeros(inst.n_edges)
        for s in range(n):
            seq = sample_arrivals(inst, s)
            rng_t = np.random.default_rng((s, 1))
            trial = policy.start_trial(rng_t)
            support = trial[0]
            match = MatchState(inst)
            for t, v in seq.arrivals:
                for e in policy.on_arrival(trial, match, v, t):
                    match.commit(e, int(inst.edge_u[e]))
            sampled += support.X
            for e in match.matched_set:
                matched_given_sampled[e] += 1
        for e in range(inst.n_edges):
            if sampled[e] < 500:
                continue
            rate = matched_given_sampled[e] / sampled[e]
            assert rate >= floor - 3 * binom_sigma(floor, int(sampled[e]))

    def test_tight_instance_clears_theory_floor(self):
        # perfect matching with full marginals: empirical ratio far above the
        # half-(1 - e^{-1/2})-(1 - 1/e) guarantee
        floor = 0.5 * (1 - math.exp(-0.5)) * (1 - 1 / math.e)
        T = 20
        inst = perfect_matching_instance(T)
        obj = LinearObjective(np.ones(T))
        m = simulate(inst, obj, "contention-resolution", x_star=np.ones(T),
                     trials=2000, seed=17, benchmark=("lp", float(T)))
        assert m.ratio - 3 * m.ratio_std_error >= floor

    def test_monotonicity_in_the_sampled_support(self, rng):
        # shrinking the support never lowers a surviving edge's match rate
        inst = perfect_matching_instance(4)
        extra = [("x0", "u0", "v1"), ("x1", "u0", "v2"), ("x2", "u1", "v2")]
        inst = build_instance(
            offline=[(u, 1) for u in inst.offline_ids],
            online=[(v, 1.0) for v in inst.online_ids],
            edges=[(e, u, v) for e, u, v in zip(
                inst.edge_ids, inst.edge_offline, inst.edge_online)] + extra,
            horizon=4)
        obj = LinearObjective(np.ones(inst.n_edges))
        x = np.full(inst.n_edges, 0.5)
        policy = make_policy("contention-resolution", inst, obj, x)

        small_support = np.zeros(inst.n_edges, dtype=bool)
        small_support[0] = True
        big = small_support.copy()
        big[4] = big[5] = big[6] = True  # superset

        def match_rate(X, n=6000):
            hits = 0
            for s in range(n):
                rng_t = np.random.default_rng((s, 7))
                Y = select_per_star(X, inst, rng_t)
                trial = (SampledSupport(X=X, Y=Y), rng_t)
                match = MatchState(inst)
                seq = sample_arrivals(inst, s)
                for t, v in seq.arrivals:
                    for e in policy.on_arrival(trial, match, v, t):
                        match.commit(e, int(inst.edge_u[e]))
                hits += int(0 in match.matched_set)
            return hits / n

        lo, hi = match_rate(big), match_rate(small_support)
        assert lo <= hi + 3 * binom_sigma(0.5, 6000) * 2


class TestGreedy:
    def test_picks_largest_gain(self):
        inst = build_instance([("u0", 1), ("u1", 1)], [("v0", 1.0)],
                              [("e0", "u0", "v0"), ("e1", "u1", "v0")],
                              horizon=1)
        obj = LinearObjective([3.0, 2.0])
        _, matched = run_trial(make_policy("greedy", inst, obj), inst, obj,
                               ArrivalSequence(np.array([0])),
                               np.random.default_rng(0))
        assert matched == [0]

    def test_skips_when_exhausted(self):
        inst = build_instance([("u0", 1)], [("v0", 1.0)],
                              [("e0", "u0", "v0")], horizon=2)
        obj = LinearObjective([1.0])
        value, matched = run_trial(make_policy("greedy", inst, obj), inst, obj,
                                   ArrivalSequence(np.array([0, 0])),
                                   np.random.default_rng(0))
        assert value == 1.0 and matched == [0]

    def test_saturated_budget_still_matches_lowest_index(self):
        inst = build_instance(
            [("u0", 1), ("u1", 1), ("u2", 1)],
            [("v0", 1.0), ("v1", 1.0)],
            [("e0", "u0", "v0"), ("e1", "u1", "v1"), ("e2", "u2", "v1")],
            horizon=2)
        obj = BudgetAdditiveObjective([5.0, 4.0, 3.0], budget=5.0)
        _, matched = run_trial(make_policy("greedy", inst, obj), inst, obj,
                               ArrivalSequence(np.array([0, 1])),
                               np.random.default_rng(0))
        # budget saturated after e0; ties at zero gain break to lowest u index
        assert matched == [0, 1]

    def test_eta_fills_distinct_vertices(self):
        inst = build_instance(
            [("u0", 2), ("u1", 1)], [("v0", 1.0)],
            [("e0", "u0", "v0"), ("e1", "u1", "v0")], horizon=1, eta=3)
        obj = LinearObjective([1.0, 2.0])
        _, matched = run_trial(make_policy("greedy", inst, obj), inst, obj,
                               ArrivalSequence(np.array([0])),
                               np.random.default_rng(0))
        # distinct offline vertices only: one use of each, despite eta=3
        assert sorted(matched) == [0, 1]


class TestDependentRoundingPolicy:
    def test_empty_menu_skips(self):
        inst = perfect_matching_instance(2)
        obj = LinearObjective(np.ones(2))
        m = simulate(inst, obj, "dependent-rounding", x_star=np.zeros(2),
                     trials=100, seed=7)
        assert m.mean == 0.0

    def test_single_menu_edge_matches_deterministically(self):
        inst = perfect_matching_instance(1)
        obj = LinearObjective([1.0])
        m = simulate(inst, obj, "dependent-rounding", x_star=np.ones(1),
                     trials=200, seed=8)
        assert m.mean == 1.0

    def test_reproducible_across_batches(self, rng):
        inst = small_instance(rng, integral=True)
        obj = small_objective("coverage", inst.n_edges, rng)
        x, lp_value, _ = solve_offline_lp(inst, obj)
        a = simulate(inst, obj, "dependent-rounding", x_star=x, trials=2500,
                     seed=100, benchmark=("lp", lp_value))
        b = simulate(inst, obj, "dependent-rounding", x_star=x, trials=2500,
                     seed=4200, benchmark=("lp", lp_value))
        gap = 3 * math.hypot(a.ratio_std_error, b.ratio_std_error)
        assert abs(a.ratio - b.ratio) <= gap


class TestSimulator:
    def test_matched_sets_feasible_every_trial(self, rng):
        for name in ("marginal-sampling", "contention-resolution", "greedy",
                     "dependent-rounding"):
            inst = small_instance(rng, integral=True)
            obj = small_objective("coverage", inst.n_edges, rng)
            x, _, _ = solve_offline_lp(inst, obj)
            m = simulate(inst, obj, name, x_star=x, trials=200, seed=11,
                         keep_matches=True)
            for matched in m.matches:
                used = np.zeros(inst.n_offline, dtype=int)
                for e in matched:
                    used[inst.edge_u[e]] += 1
                assert np.all(used <= inst.capacity_array)

    def test_match_state_rejects_overcommit(self):
        inst = perfect_matching_instance(1)
        state = MatchState(inst)
        state.commit(0, 0)
        with pytest.raises(RuntimeError, match="saturated"):
            state.commit(0, 0)

    def test_greedy_single_edge_ratio_one(self):
        inst = build_instance([("u0", 1)], [("v0", 1.0)],
                              [("e0", "u0", "v0")], horizon=1)
        obj = LinearObjective([1.0])
        e_opt, _ = expected_opt(inst, obj, mode="exact")
        m = simulate(inst, obj, "greedy", trials=64, seed=12,
                     benchmark=("brute", e_opt))
        assert m.ratio == 1.0

    def test_identical_seed_identical_metrics(self, rng):
        inst = small_instance(rng, integral=True)
        obj = small_objective("budget_additive", inst.n_edges, rng)
        x, _, _ = solve_offline_lp(inst, obj)
        a = simulate(inst, obj, "contention-resolution", x_star=x, trials=300,
                     seed=13)
        b = simulate(inst, obj, "contention-resolution", x_star=x, trials=300,
                     seed=13)
        assert np.array_equal(a.values, b.values)

    def test_worker_count_does_not_change_results(self, rng):
        inst = small_instance(rng, integral=True)
        obj = small_objective("coverage", inst.n_edges, rng)
        x, _, _ = solve_offline_lp(inst, obj)
        serial = simulate(inst, obj, "marginal-sampling", x_star=x,
                          trials=120, seed=14)
        parallel = simulate(inst, obj, "marginal-sampling", x_star=x,
                            trials=120, seed=14, workers=3)
        assert np.array_equal(serial.values, parallel.values)

    def test_benchmark_kinds(self, rng):
        inst = small_instance(rng, n_offline=3, n_online=2, horizon=3)
        obj = small_objective("coverage", inst.n_edges, rng)
        x, lp_value, _ = solve_offline_lp(inst, obj)
        by_lp = simulate(inst, obj, "greedy", trials=400, seed=15,
                         benchmark="lp")
        assert by_lp.benchmark_value == pytest.approx(lp_value)
        by_brute = simulate(inst, obj, "greedy", trials=400, seed=15,
                            benchmark="brute")
        assert by_brute.benchmark_value <= lp_value + 1e-9
        scaled = simulate(inst, obj, "marginal-sampling", x_star=x, trials=50,
                          seed=15, benchmark="guide-scaled")
        assert scaled.benchmark_value > 0

    def test_ratio_never_exceeds_one_plus_noise(self, rng):
        for _ in range(5):
            inst = small_instance(rng, n_offline=3, n_online=2, horizon=3)
            obj = small_objective("linear", inst.n_edges, rng)
            m = simulate(inst, obj, "greedy", trials=500, seed=16,
                         benchmark="brute")
            assert m.ratio <= 1.0 + 3 * m.ratio_std_error / max(m.ratio, 1e-9)
