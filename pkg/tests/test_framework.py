import math

import numpy as np
import pytest

from bulktree.aggregation import atomic_cost
from bulktree.exact import exact_lp_optimum, exact_oblivious_ratio, exact_optima
from bulktree.framework import (
    ConstraintSet,
    DualPoint,
    EllipsoidResult,
    SolveConfig,
    TreeConstraint,
    ellipsoid_feasibility,
    separation_oracle,
    solve_oblivious,
    solve_small_primal,
)
from bulktree.instance import demand_profile, generate_instance
from bulktree.subroutines import rob_lower_bounds

from conftest import make_instance


def tilde_for(inst, seed=7):
    return tuple(v for _, v, _ in rob_lower_bounds(inst, seed))


class TestSeparationOracle:
    def test_zero_point_reported(self, two_cluster6):
        tilde = tilde_for(two_cluster6)
        point = DualPoint(alpha=(0.0,) * len(tilde), beta=1.0)
        res = separation_oracle(point, tilde, 1.0, two_cluster6, 0.25, seed=1)
        assert res.kind == "feasible_at_zero"

    def test_budget_violation_immediate(self, two_cluster6):
        tilde = tilde_for(two_cluster6)
        m = len(tilde)
        point = DualPoint(alpha=(2.0 / m,) * m, beta=1.0)
        res = separation_oracle(point, tilde, 1.0, two_cluster6, 0.25, seed=1)
        assert res.kind == "rob_cut"

    def test_tree_cut_when_beta_large(self, two_cluster6):
        tilde = tilde_for(two_cluster6)
        m = len(tilde)
        point = DualPoint(alpha=(0.5 / m,) * m, beta=1e9)
        res = separation_oracle(point, tilde, 4.0, two_cluster6, 0.25, seed=1)
        assert res.kind == "tree_cut"
        assert res.cost < 1e9
        assert len(res.level_costs) == m

    def test_feasible_when_beta_zero(self, two_cluster6):
        tilde = tilde_for(two_cluster6)
        m = len(tilde)
        point = DualPoint(alpha=(0.5 / m,) * m, beta=0.0)
        res = separation_oracle(point, tilde, 4.0, two_cluster6, 0.25, seed=1)
        assert res.kind == "feasible"

    def test_markov_retry_terminates_quickly(self, two_cluster6):
        # Calibrate an empirical oracle constant, then check the retry loop
        # exits within 2*log2(n+2) attempts in at least 95% of trials.
        tilde = tilde_for(two_cluster6)
        m = len(tilde)
        rng = np.random.default_rng(123)
        pilot = []
        for _ in range(10):
            y = rng.random(m)
            y = 0.9 * y / y.sum()
            point = DualPoint(alpha=tuple(y), beta=1e9)
            res = separation_oracle(point, tilde, 1e9, two_cluster6, 0.25, seed=int(rng.integers(1 << 30)))
            pilot.append(res.cost / y.sum())
        c_cal = max(pilot)
        budget = 2 * math.ceil(math.log2(len(two_cluster6.nodes) + 2))
        ok = 0
        trials = 100
        for t in range(trials):
            y = rng.random(m)
            y = 0.9 * y / y.sum()
            point = DualPoint(alpha=tuple(y), beta=1e9)
            res = separation_oracle(
                point, tilde, c_cal, two_cluster6, 0.25, seed=t, break_on_violation=False
            )
            if res.threshold_met and res.attempts <= budget:
                ok += 1
        assert ok >= 0.95 * trials


class TestSmallPrimal:
    def test_single_tree(self, path3):
        from bulktree.aggregation import route_demands

        tree = route_demands(path3, [("r", "a"), ("a", "b")])
        tilde = tilde_for(path3)
        costs = tuple(atomic_cost(tree, i, path3.lengths) for i in range(len(tilde)))
        cs = ConstraintSet(tilde=tilde, tree_constraints=[TreeConstraint(tree, costs)], beta=2.0)
        dist = solve_small_primal(cs)
        assert len(dist.support) == 1
        assert dist.support[0][1] == pytest.approx(1.0)
        assert dist.theta == pytest.approx(max(c / t for c, t in zip(costs, tilde)))

    def test_dominated_tree_gets_no_weight(self):
        # a-b is longer than either direct edge, so the direct-star tree
        # strictly dominates the path tree at every level
        inst = make_instance(
            {("r", "a"): 1.0, ("r", "b"): 1.0, ("a", "b"): 1.2}, {"a": 1, "b": 1}, "r"
        )
        from bulktree.aggregation import route_demands

        good = route_demands(inst, [("r", "a"), ("r", "b")])
        bad = route_demands(inst, [("r", "a"), ("a", "b")])
        tilde = tilde_for(inst)
        levels = len(tilde)
        cost = lambda t: tuple(atomic_cost(t, i, inst.lengths) for i in range(levels))
        cg, cb = cost(good), cost(bad)
        if all(a <= b for a, b in zip(cg, cb)):
            cs = ConstraintSet(
                tilde=tilde,
                tree_constraints=[TreeConstraint(bad, cb), TreeConstraint(good, cg)],
                beta=2.0,
            )
            dist = solve_small_primal(cs)
            assert len(dist.support) == 1
            assert dist.support[0][0].sorted_edges() == good.sorted_edges()

    def test_matches_vertex_enumeration(self):
        # Independent oracle: enumerate every basic solution of the small
        # primal's standard form and take the best feasible vertex.
        from bulktree.exact import enumerate_candidate_trees
        from test_simplex import brute_vertex_optimum

        inst = make_instance(
            {("r", "a"): 1.0, ("r", "b"): 1.0, ("a", "b"): 0.5}, {"a": 1, "b": 1}, "r"
        )
        opt = exact_optima(inst)
        levels = len(opt.per_level)
        tilde = tuple(opt.value(i) for i in range(levels))
        trees = list(enumerate_candidate_trees(inst))
        cs = ConstraintSet(
            tilde=tilde,
            tree_constraints=[
                TreeConstraint(t, tuple(atomic_cost(t, i, inst.lengths) for i in range(levels)))
                for t in trees
            ],
            beta=2.0,
        )
        dist = solve_small_primal(cs)
        n = len(trees)
        A = np.zeros((1 + levels, 1 + n))
        b = np.zeros(1 + levels)
        A[0, 1:] = 1.0
        b[0] = 1.0
        for i in range(levels):
            A[1 + i, 0] = tilde[i]
            for j, tc in enumerate(cs.tree_constraints):
                A[1 + i, 1 + j] = -tc.level_costs[i]
        c = np.zeros(1 + n)
        c[0] = 1.0
        brute_obj, _ = brute_vertex_optimum(c, A, b)
        assert dist.theta == pytest.approx(brute_obj, abs=1e-7)
        theta_full, _ = exact_lp_optimum(inst)
        assert dist.theta == pytest.approx(theta_full, abs=1e-7)


class TestEllipsoid:
    def test_box_bound_infeasible_quickly(self, two_cluster6):
        tilde = tilde_for(two_cluster6)
        # Any scaled point in the box has tree cost at most max_i A_i(T)/tilde_i
        # over the shortest-path tree; a beta above that bound is infeasible.
        from bulktree.subroutines import shortest_path_tree

        spt = shortest_path_tree(two_cluster6, sorted(two_cluster6.demands), "r")
        bound = sum(
            atomic_cost(spt, i, two_cluster6.lengths) / tilde[i] for i in range(len(tilde))
        )
        res = ellipsoid_feasibility(
            two_cluster6, beta=2 * bound + 5, c=None, gamma=0.25, seed=3, tilde=tilde, bit_budget=4
        )
        assert res.status == "infeasible"
        assert res.theta is not None and res.theta < 2 * bound + 5

    def test_beta_zero_feasible(self, two_cluster6):
        tilde = tilde_for(two_cluster6)
        res = ellipsoid_feasibility(
            two_cluster6, beta=0.0, c=None, gamma=0.25, seed=3, tilde=tilde, bit_budget=4
        )
        assert res.status == "feasible"

    def test_harvest_bounded_by_iterations(self, two_cluster6):
        tilde = tilde_for(two_cluster6)
        res = ellipsoid_feasibility(
            two_cluster6, beta=3.0, c=None, gamma=0.25, seed=3, tilde=tilde, bit_budget=4
        )
        assert len(res.constraint_set.tree_constraints) <= res.iterations


class TestSolveOblivious:
    def test_unique_tree_instance(self, path3):
        dist, report = solve_oblivious(path3, SolveConfig(seed=2, bit_budget=4))
        assert len(dist.support) == 1
        assert dist.theta == pytest.approx(1.0, abs=1e-6)
        assert all(r["ratio"] <= 1.0 + 1e-9 for r in report.levels)

    def test_star_support_bound_and_consistency(self, star4):
        dist, report = solve_oblivious(star4, SolveConfig(seed=5, bit_budget=4))
        D = demand_profile(star4).D
        assert len(dist.support) <= 1 + int(math.log2(D))
        worst = max(r["ratio"] for r in report.levels)
        assert worst <= dist.theta + 1e-7

    def test_deterministic(self, two_cluster6):
        cfg = SolveConfig(seed=11, bit_budget=4)
        d1, r1 = solve_oblivious(two_cluster6, cfg)
        d2, r2 = solve_oblivious(two_cluster6, cfg)
        assert [(t.sorted_edges(), w) for t, w in d1.support] == [
            (t.sorted_edges(), w) for t, w in d2.support
        ]
        assert r1.beta_final == r2.beta_final

    def test_theta_within_certified_beta(self, two_cluster6):
        dist, report = solve_oblivious(two_cluster6, SolveConfig(seed=11, bit_budget=4))
        assert dist.theta <= report.beta_final + 1e-7

    @pytest.mark.parametrize("seed", range(4))
    def test_guarantee_chain_random_instances(self, seed):
        inst = generate_instance("random-geometric", 6, 3, seed=seed)
        dist, report = solve_oblivious(inst, SolveConfig(seed=seed, bit_budget=4))
        opt = exact_optima(inst)
        ratio, _ = exact_oblivious_ratio(inst, dist, optima=opt)
        slack = max(report.tilde[i] / opt.value(i) for i in range(len(report.tilde)))
        assert 1.0 - 1e-9 <= ratio <= dist.theta * slack + 1e-7
