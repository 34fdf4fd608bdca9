import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degdispatch.cyclegraph import decision_margin
from degdispatch.degradation import (
    DegradationParams,
    DomainError,
    PowerLawStress,
    cycling_cost_depths,
    cycling_cost_profile,
    cycling_cost_quadratic,
    cycling_cost_subgradient,
    naive_enumeration_cost,
    stress,
)
from oracles import reference_cost

ALPHA = 5.24e-4


def params(alpha=ALPHA, beta=2.03, BE=1.0):
    # B is per kWh and E in MWh, so B = BE / 1000 with E = 1 gives B*E = BE currency units
    return DegradationParams(alpha_b=alpha, beta_b=beta, B=BE / 1000.0, E=1.0)


def closed_profiles(max_T=20):
    return st.integers(2, max_T).flatmap(
        lambda T: st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=T, max_size=T)
    ).map(lambda v: np.array(v + [v[0]]))


def profile_pairs(max_T=20):
    """Two profiles of the same horizon sharing their common endpoint value."""
    def build(T):
        row = st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=T - 1, max_size=T - 1)
        return st.tuples(st.floats(0.0, 1.0), row, row).map(
            lambda a: (np.array([a[0], *a[1], a[0]]), np.array([a[0], *a[2], a[0]])))
    return st.integers(2, max_T).flatmap(build)


class TestParams:
    def test_units(self):
        p = DegradationParams(ALPHA, 2.03, B=200.0, E=500.0)
        assert p.replacement_cost == pytest.approx(200.0 * 1000 * 500.0)
        assert p.cost_scale == pytest.approx(ALPHA / 2 * 200.0 * 1000 * 500.0)

    @pytest.mark.parametrize("kw", [dict(alpha_b=0.0), dict(beta_b=1.0), dict(B=-1.0), dict(E=0.0)])
    def test_invalid(self, kw):
        base = dict(alpha_b=ALPHA, beta_b=2.0, B=1.0, E=1.0)
        with pytest.raises(DomainError):
            DegradationParams(**{**base, **kw})


class TestStress:
    def test_values(self):
        p = params()
        assert stress(0.0, p) == 0.0
        assert stress(1.0, p) == pytest.approx(2.62e-4, rel=1e-12)
        assert stress(0.5, p) == pytest.approx(ALPHA / 2 * 0.5**2.03, rel=1e-12)
        assert stress(0.5, p) == pytest.approx(6.4148e-5, rel=1e-4)

    def test_domain(self):
        with pytest.raises(DomainError):
            stress(1.5, params())
        with pytest.raises(DomainError):
            stress(-0.1, params())

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 1.0), st.floats(1e-6, 1.0), st.sampled_from([1.1, 2.0, 2.03, 3.0]))
    def test_homogeneity(self, d, k, beta):
        phi = PowerLawStress(ALPHA, beta)
        assert phi(k * d) == pytest.approx(k**beta * phi(d), rel=1e-12, abs=1e-300)


class TestCost:
    def test_depth_form(self):
        assert cycling_cost_depths(np.zeros(4), params()) == 0.0
        assert cycling_cost_depths([1.0, 1.0], params(BE=1000.0)) == pytest.approx(0.524, rel=1e-12)
        assert cycling_cost_depths([1.0, 0.5], params()) == pytest.approx(3.2615e-4, rel=1e-4)

    def test_profile_form(self):
        assert cycling_cost_profile([0.4, 0.4, 0.4], params()) == 0.0
        assert cycling_cost_profile([0.0, 1.0, 0.0], params(beta=2.0, BE=1000.0)) == pytest.approx(0.524, rel=1e-12)
        assert cycling_cost_profile([0.1, 0.8, 0.3, 0.9], params(alpha=2.0, beta=2.0)) == pytest.approx(1.14, rel=1e-12)

    def test_naive_enumeration(self):
        p = params(alpha=2.0, beta=2.0)
        assert naive_enumeration_cost([0.1, 0.8, 0.3, 0.9], p) == pytest.approx(1.10, rel=1e-12)
        assert naive_enumeration_cost([0.3, 0.3, 0.3], p) == 0.0
        x = [0.1, 0.3, 0.35, 0.9]
        assert naive_enumeration_cost(x, p) == pytest.approx(cycling_cost_profile(x, p), rel=1e-14)

    @settings(max_examples=300, deadline=None)
    @given(closed_profiles(), st.sampled_from([1.1, 2.0, 2.03, 3.0]))
    def test_matches_reference(self, x, beta):
        p = params(beta=beta, BE=1e3)
        assert cycling_cost_profile(x, p) == pytest.approx(reference_cost(x, ALPHA, beta, 1e3), rel=1e-12, abs=1e-15)

    @settings(max_examples=300, deadline=None)
    @given(closed_profiles())
    def test_quadratic_form(self, x):
        p = params(beta=2.0, BE=1e3)
        assert cycling_cost_quadratic(x, p) == pytest.approx(cycling_cost_profile(x, p), rel=1e-12, abs=1e-15)

    @settings(max_examples=300, deadline=None)
    @given(closed_profiles(), st.sampled_from([1.1, 2.0, 2.03, 3.0]))
    def test_at_least_naive(self, x, beta):
        p = params(beta=beta)
        assert cycling_cost_profile(x, p) >= naive_enumeration_cost(x, p) - 1e-12

    @settings(max_examples=300, deadline=None)
    @given(profile_pairs(), st.floats(0.0, 1.0), st.sampled_from([1.1, 2.0, 2.03, 3.0]))
    def test_convex_along_segments(self, xy, lam, beta):
        x, y = xy
        p = params(beta=beta)
        z = lam * x + (1 - lam) * y
        lhs = cycling_cost_profile(z, p)
        rhs = lam * cycling_cost_profile(x, p) + (1 - lam) * cycling_cost_profile(y, p)
        assert lhs <= rhs + 1e-9 * max(1.0, abs(rhs))


class TestSubgradient:
    def test_flat(self):
        assert not cycling_cost_subgradient([0.5, 0.5, 0.5], params()).any()

    def test_sawtooth(self):
        # alpha_b * B * E = 2
        p = DegradationParams(alpha_b=2.0, beta_b=2.0, B=0.001, E=1.0)
        assert np.allclose(cycling_cost_subgradient([0.0, 1.0, 0.0], p), [-2.0, 4.0, -2.0])

    def test_finite_differences(self):
        rng = np.random.default_rng(7)
        p = params(beta=2.03, BE=1e3)
        checked = 0
        while checked < 50:
            x = rng.uniform(0.05, 0.95, 7)
            x[-1] = x[0]
            if decision_margin(x) < 1e-4:
                continue
            g = cycling_cost_subgradient(x, p)
            h = 1e-6
            fd = np.array([(cycling_cost_profile(x + h * e, p) - cycling_cost_profile(x - h * e, p)) / (2 * h)
                           for e in np.eye(x.size)])
            assert np.allclose(g, fd, rtol=1e-5, atol=1e-5 * np.max(np.abs(fd)))
            checked += 1

    @settings(max_examples=300, deadline=None)
    @given(profile_pairs(12), st.sampled_from([1.1, 2.0, 2.03, 3.0]))
    def test_supporting_hyperplane(self, xy, beta):
        x, y = xy
        p = params(beta=beta)
        g = cycling_cost_subgradient(x, p)
        assert cycling_cost_profile(y, p) >= cycling_cost_profile(x, p) + g @ (y - x) - 1e-9
