import numpy as np
import pytest

from conftest import random_regular_discrete
from kwrob import (
    AnonymousReserve,
    DiscretePMF,
    DomainError,
    Myerson,
    ProductPrior,
    build_polytope,
    discretize,
    lb1,
    lb2,
    minimize_event_prob,
    minimize_revenue,
    revenue_exact,
    verify_kwise,
)

BINARY = ([0.0, 1.0], [0.5, 0.5])


class TestBuildPolytope:
    def test_two_binary_bidders_singleton(self):
        poly = build_polytope([BINARY] * 2, 2)
        sol = minimize_revenue(poly, AnonymousReserve(0.5))
        # pairwise = mutual for n = 2: the only feasible point is the product
        assert np.allclose(sol.table.pmf, 0.25, atol=1e-9)
        assert sol.objective == pytest.approx(0.25 * 1.0 + 0.5 * 0.5, abs=1e-9)

    def test_three_binary_one_dimensional_family(self):
        poly = build_polytope([BINARY] * 3, 2)
        assert poly.n_cells == 8
        assert poly.A_red.shape[0] == 7  # one degree of freedom left
        # the parity (xor) distribution is an extreme point of that family
        xor = np.zeros((2, 2, 2))
        for i in (0, 1):
            for j in (0, 1):
                xor[i, j, i ^ j] = 0.25
        assert np.allclose(poly.A @ xor.ravel(), poly.b, atol=1e-12)

    def test_ten_binary_k1_constraint_count(self):
        poly = build_polytope([BINARY] * 10, 1)
        assert poly.n_cells == 1024
        # 20 single-bidder rows describe the set; rank is 10 + 1 (total mass)
        assert poly.A_red.shape[0] == 11

    def test_product_always_feasible(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 5))
            tables = []
            for _ in range(n):
                m = random_regular_discrete(rng, max_pts=3)
                tables.append((list(m.points), list(m.masses)))
            k = int(rng.integers(1, n + 1))
            poly = build_polytope(tables, k)
            x = poly.product_pmf()
            assert np.max(np.abs(poly.A @ x - poly.b)) < 1e-12

    def test_degenerate_bidder_conditioned_out(self):
        tables = [BINARY, ([3.0], [1.0]), BINARY]
        poly = build_polytope(tables, 2)
        assert poly.fixed == {1: 3.0}
        sol = minimize_revenue(poly, AnonymousReserve(2.0))
        # the fixed bidder always clears the reserve; others never do
        assert sol.objective == pytest.approx(2.0, abs=1e-9)
        assert sol.table.supports[1] == (3.0,)

    def test_cell_cap(self):
        big = (list(range(100)), [0.01] * 100)
        with pytest.raises(DomainError):
            build_polytope([big] * 3, 2)


class TestMinimizeRevenue:
    def test_k_equals_n_gives_product_revenue(self):
        tables = [BINARY] * 3
        poly = build_polytope(tables, 3)
        sol = minimize_revenue(poly, AnonymousReserve(0.5))
        marginals = [DiscretePMF(*BINARY)] * 3
        exact = revenue_exact(discretize(ProductPrior(marginals)), AnonymousReserve(0.5)).mean
        assert sol.objective == pytest.approx(exact, abs=1e-9)

    def test_monotone_in_k(self, rng):
        tables = []
        for _ in range(4):
            m = random_regular_discrete(rng, max_pts=3)
            tables.append((list(m.points), list(m.masses)))
        marginals = [DiscretePMF(*t) for t in tables]
        mech = Myerson(marginals)
        objs = []
        for k in [4, 3, 2, 1]:
            objs.append(minimize_revenue(build_polytope(tables, k), mech).objective)
        assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:]))

    def test_solution_reverified(self, rng):
        tables = [(list(m.points), list(m.masses)) for m in
                  [random_regular_discrete(rng, max_pts=3) for _ in range(3)]]
        poly = build_polytope(tables, 2)
        mech = Myerson([DiscretePMF(*t) for t in tables])
        sol = minimize_revenue(poly, mech)
        assert sol.feasibility_residual <= 1e-9
        assert sol.duality_gap <= 1e-7 * max(1.0, abs(sol.objective))
        # recompute the objective from the returned table
        recomputed = revenue_exact(sol.table, mech).mean
        assert recomputed == pytest.approx(sol.objective, abs=1e-8)

    def test_counterexample_marginals_k2_collapse(self):
        # discretized adversarial marginals at small n: the pairwise-worst
        # prior drives the optimal mechanism's revenue down to O(1)
        n, eps = 3, 1e-6
        from kwrob import myerson_counterexample

        prior = myerson_counterexample(n, eps)
        table = discretize(prior)
        tables = [
            (list(table.supports[i]), list(table.marginal_masses(i)))
            for i in range(table.n_bidders)
        ]
        mech = Myerson(list(prior.marginals))
        adversarial = revenue_exact(prior, mech).mean
        sol2 = minimize_revenue(build_polytope(tables, 2), mech)
        assert sol2.objective <= adversarial + 1e-9  # LP is at least as adversarial
        ind = revenue_exact(ProductPrior(prior.marginals), mech).mean
        sol3 = minimize_revenue(build_polytope(tables, 3), mech)
        assert 64.0 * sol3.objective >= ind - 1e-9  # 3-wise robustness kicks in

    def test_worst_table_is_kwise(self, rng):
        tables = [(list(m.points), list(m.masses)) for m in
                  [random_regular_discrete(rng, max_pts=3) for _ in range(3)]]
        sol = minimize_revenue(build_polytope(tables, 2), AnonymousReserve(1.0))
        rep = verify_kwise(sol.table, 2)
        assert rep.max_deviation <= 1e-8


class TestMinimizeEventProb:
    def test_three_binary_q1(self):
        poly = build_polytope([BINARY] * 3, 2)
        sol = minimize_event_prob(poly, 1.0, 1)
        assert sol.objective >= lb1(1.5) - 1e-9

    def test_four_binary_q2_at_s2(self):
        poly = build_polytope([BINARY] * 4, 2)
        sol = minimize_event_prob(poly, 1.0, 2)
        assert sol.objective >= 1 / 3 - 1e-9  # LB2(2)

    def test_k_equals_n_matches_independent(self):
        poly = build_polytope([BINARY] * 3, 3)
        sol = minimize_event_prob(poly, 1.0, 2)
        from conftest import q1q2_enumerate

        q1, q2 = q1q2_enumerate([0.5] * 3)
        assert sol.objective == pytest.approx(q2, abs=1e-9)

    def test_pairwise_lower_bound_dominance_sample(self, rng):
        # the closed-form pairwise lower bounds never exceed the LP optimum
        grid = np.arange(0.1, 1.0, 0.1)
        for _ in range(30):
            n = int(rng.integers(2, 5))
            qs = rng.choice(grid, size=n)
            tables = [([0.0, 1.0], [1.0 - q, q]) for q in qs]
            poly = build_polytope(tables, 2)
            s = float(qs.sum())
            q1_min = minimize_event_prob(poly, 1.0, 1).objective
            assert q1_min >= lb1(s) - 1e-9
            if s > 1.0:
                q2_min = minimize_event_prob(poly, 1.0, 2).objective
                assert q2_min >= lb2(s) - 1e-9

    def test_count_validation(self):
        poly = build_polytope([BINARY] * 2, 2)
        with pytest.raises(DomainError):
            minimize_event_prob(poly, 1.0, 3)
