import numpy as np
import pytest

from kwrob import (
    DiscretePMF,
    DomainError,
    EqualRevenue,
    ShiftedEqualRevenue,
    Uniform,
    check_regular,
    iron_discrete,
    regular_quantile_bound,
    revenue_curve,
)
from kwrob.marginals import revenue_at_quantile


class TestCdf:
    def test_uniform(self):
        assert Uniform(0, 1).cdf(0.3) == pytest.approx(0.3, abs=1e-15)

    def test_equal_revenue_interior(self):
        assert EqualRevenue(0.5, 1.0).cdf(0.75) == pytest.approx(1 - 0.5 / 0.75, abs=1e-15)

    def test_equal_revenue_top_atom(self):
        assert EqualRevenue(0.5, 1.0).cdf(1.0) == 1.0

    def test_right_continuity_at_atom(self):
        m = EqualRevenue(0.5, 1.0)
        assert m.cdf(1.0) - m.cdf(1.0 - 1e-12) == pytest.approx(0.5, abs=1e-9)


class TestQuantile:
    def test_equal_revenue(self):
        assert EqualRevenue(0.5, 1.0).quantile_q(0.75) == pytest.approx(2 / 3, abs=1e-15)

    def test_uniform_top(self):
        assert Uniform(0, 1).quantile_q(1.0) == 0.0

    def test_shifted_er_bottom(self):
        n, eps = 2, 1e-6
        m = ShiftedEqualRevenue(n, n * n, eps)
        assert m.quantile_q(n + eps) == 1.0

    def test_q_plus_left_cdf_is_one(self):
        # the left limit of the CDF is cdf(tau) - atom(tau) exactly, so the
        # complementarity identity can be checked at full precision
        for m in [EqualRevenue(0.5, 2.0), Uniform(0.2, 3.0), DiscretePMF([1, 2, 5], [0.2, 0.5, 0.3])]:
            lo, hi = m.support
            taus = set(np.linspace(lo - 0.5, hi + 0.5, 101)) | set(m.atoms())
            for tau in taus:
                left_cdf = m.cdf(tau) - m.atom_mass(tau)
                assert m.quantile_q(tau) + left_cdf == pytest.approx(1.0, abs=1e-12)


class TestQInverse:
    def test_uniform(self):
        assert Uniform(0, 1).q_inverse(0.25) == pytest.approx(0.75)

    def test_equal_revenue(self):
        assert EqualRevenue(0.5, 1.0).q_inverse(2 / 3) == pytest.approx(0.75)

    def test_p_zero_gives_top(self):
        for m in [EqualRevenue(0.5, 1.0), Uniform(0, 1), DiscretePMF([1, 3], [0.5, 0.5])]:
            assert m.q_inverse(0.0) == m.support[1]

    def test_domain_error(self):
        with pytest.raises(DomainError):
            Uniform(0, 1).q_inverse(1.5)


class TestVirtualValue:
    def test_equal_revenue_interior_zero(self):
        assert EqualRevenue(0.5, 1.0).virtual_value(0.75) == 0.0

    def test_equal_revenue_top(self):
        assert EqualRevenue(0.5, 1.0).virtual_value(1.0) == 1.0

    def test_uniform(self):
        assert Uniform(0, 1).virtual_value(0.8) == pytest.approx(0.6)

    def test_outside_support(self):
        with pytest.raises(DomainError):
            Uniform(0, 1).virtual_value(1.5)

    def test_interior_atom_directs_to_ironing(self):
        m = DiscretePMF([1, 4, 10], [0.8, 0.1, 0.1])
        with pytest.raises(DomainError, match="ironed"):
            m.virtual_value(4)

    def test_monotone_for_regular_parametrics(self):
        for m in [Uniform(0.3, 2.0), EqualRevenue(0.5, 4.0), ShiftedEqualRevenue(1.0, 9.0, 0.01)]:
            lo, hi = m.support
            grid = np.linspace(lo, hi, 1000)
            phis = [m.virtual_value(v) for v in grid]
            assert all(b >= a - 1e-12 for a, b in zip(phis, phis[1:]))


class TestMonopolyReserve:
    def test_uniform(self):
        assert Uniform(0, 1).monopoly_reserve() == pytest.approx(0.5)

    def test_equal_revenue_bottom(self):
        assert EqualRevenue(1, 10).monopoly_reserve() == 1

    def test_shifted(self):
        n, eps = 3, 1e-6
        assert ShiftedEqualRevenue(n, n * n, eps).monopoly_reserve() == n + eps


class TestRevenueCurve:
    def test_equal_revenue_plateau(self):
        c = revenue_curve(EqualRevenue(0.5, 1.0), 101)
        for q, r in zip(c.qs, c.revs):
            if q >= 0.5:
                assert r == pytest.approx(0.5, abs=1e-12)

    def test_uniform_grid3(self):
        c = revenue_curve(Uniform(0, 1), 3)
        assert (0.0, 0.0) in set(zip(c.qs, c.revs))
        assert any(q == 0.5 and r == pytest.approx(0.25) for q, r in zip(c.qs, c.revs))
        assert any(q == 1.0 and abs(r) < 1e-15 for q, r in zip(c.qs, c.revs))

    def test_point_mass(self):
        c = revenue_curve(DiscretePMF([1], [1.0]), 2)
        assert list(zip(c.qs, c.revs)) == [(0.0, 0.0), (1.0, 1.0)]


class TestRegularity:
    def test_uniform_regular(self):
        assert check_regular(Uniform(0, 1))

    def test_equal_revenue_regular(self):
        assert check_regular(EqualRevenue(0.5, 1.0))

    def test_irregular_discrete(self):
        assert not check_regular(DiscretePMF([1, 4, 10], [0.8, 0.1, 0.1]))

    def test_grid_size_validation(self):
        with pytest.raises(DomainError):
            check_regular(Uniform(0, 1), 2)


class TestIroning:
    def test_hull_vertices(self):
        ic = iron_discrete(DiscretePMF([1, 4, 10], [0.8, 0.1, 0.1]))
        assert list(zip(ic.hull_q, ic.hull_rev)) == [(0.0, 0.0), (0.1, 1.0), (1.0, 1.0)]
        assert ic.phi[1] == pytest.approx(0.0, abs=1e-12)  # v=4 ironed flat

    def test_regular_two_point_hull_equals_curve(self):
        m = DiscretePMF([1, 2], [0.5, 0.5])
        ic = iron_discrete(m)
        c = revenue_curve(m, 2)
        assert list(zip(ic.hull_q, ic.hull_rev)) == list(zip(c.qs, c.revs))

    def test_point_mass(self):
        ic = iron_discrete(DiscretePMF([1], [1.0]))
        assert list(zip(ic.hull_q, ic.hull_rev)) == [(0.0, 0.0), (1.0, 1.0)]
        assert ic.phi == (1.0,)

    def test_hull_dominates_and_phi_monotone(self, rng):
        from conftest import random_discrete

        for _ in range(50):
            m = random_discrete(rng, max_pts=6)
            ic = iron_discrete(m)
            c = revenue_curve(m, 2)
            for q, r in zip(c.qs, c.revs):
                assert ic.hull_value(q) >= r - 1e-12
            hull_revs = list(ic.hull_rev)
            # concavity of the hull polyline
            for (q1, r1), (q2, r2), (q3, r3) in zip(
                zip(ic.hull_q, hull_revs), zip(ic.hull_q[1:], hull_revs[1:]), zip(ic.hull_q[2:], hull_revs[2:])
            ):
                assert (r2 - r1) * (q3 - q2) >= (r3 - r2) * (q2 - q1) - 1e-9
            assert all(b >= a - 1e-12 for a, b in zip(ic.phi, ic.phi[1:]))


class TestRegularQuantileBound:
    def test_tight_at_one(self):
        assert regular_quantile_bound(0.5, 1.0) == pytest.approx(0.5)

    def test_upper_bound_scaled_uniform(self):
        # Uniform(0, 2) has q(1) = 0.5; the envelope dominates above 1
        assert regular_quantile_bound(0.5, 3.0) == pytest.approx(0.25)
        assert Uniform(0, 2).quantile_q(3.0) <= 0.25

    def test_range_split_value(self):
        p = 0.674
        tau = 1 + (1 - p) / p**2
        val = regular_quantile_bound(p, tau)
        assert val == pytest.approx(p / ((1 - p) * tau + p), abs=1e-15)
        assert val == pytest.approx(0.5463, abs=5e-4)

    def test_envelope_for_regular_marginals(self):
        # marginals with q(1) = p in (0, 1): bound above for tau >= 1,
        # below for tau <= 1
        cases = [Uniform(0, 2), EqualRevenue(0.5, 2.0), ShiftedEqualRevenue(0.5, 1.5, 0.2)]
        for m in cases:
            p = m.quantile_q(1.0)
            assert 0 < p < 1
            lo, hi = m.support
            for tau in np.linspace(1.0, 10 * hi, 200):
                assert m.quantile_q(tau) <= regular_quantile_bound(p, tau) + 1e-10
            for tau in np.linspace(lo, 1.0, 200):
                assert m.quantile_q(tau) >= regular_quantile_bound(p, tau) - 1e-10

    def test_convexity_switch(self):
        # g(p) = p/((1-p)tau + p) convex in p for tau >= 1, concave for tau <= 1
        ps = np.linspace(0.01, 0.99, 99)
        for tau, sign in [(2.0, 1.0), (0.5, -1.0)]:
            g = np.array([regular_quantile_bound(p, tau) for p in ps])
            second = g[2:] - 2 * g[1:-1] + g[:-2]
            assert np.all(sign * second >= -1e-12)


class TestRevenueAtQuantile:
    def test_uniform(self):
        assert revenue_at_quantile(Uniform(0, 1), 0.25) == pytest.approx(0.1875)

    def test_discrete_chord(self):
        # between the vertices the hull prices the two-point lottery
        m = DiscretePMF([1, 10], [0.9, 0.1])
        assert revenue_at_quantile(m, 0.1) == pytest.approx(1.0)
        assert revenue_at_quantile(m, 1.0) == pytest.approx(1.0)
        assert revenue_at_quantile(m, 0.55) == pytest.approx(1.0)


class TestValidation:
    def test_masses_must_sum(self):
        with pytest.raises(DomainError):
            DiscretePMF([1, 2], [0.5, 0.6])

    def test_points_ascending(self):
        with pytest.raises(DomainError):
            DiscretePMF([2, 1], [0.5, 0.5])

    def test_er_invariant_constant_revenue(self):
        m = EqualRevenue(0.3, 7.0)
        for s in np.linspace(0.3, 7.0, 50):
            assert s * m.quantile_q(s) == pytest.approx(0.3, abs=1e-12)
