import json

import numpy as np
import pytest

from degdispatch.dispatch import DispatchSolution, assemble_problem, solve_gd, solve_sdad
from degdispatch.market import (
    PriceVector,
    UnconvergedSolutionError,
    extract_prices,
    generator_best_response,
    generator_profit,
    storage_best_response,
    storage_profit,
    uniqueness_certificate,
    verify_incentive_compatibility,
)

NESTED = [0.1, 0.9, 0.4, 0.6, 0.3, 1.0]


@pytest.fixture(scope="module")
def solved():
    t = np.arange(24)
    D = 1500 + 500 * np.cos(2 * np.pi * (t - 18) / 24)
    prob = assemble_problem({}, D)
    return prob, solve_sdad(prob)


class TestPrices:
    def test_interior_generator(self):
        prob = assemble_problem({"g_max": 100.0}, [50.0, 50.0])
        g = np.array([50.0, 50.0])
        sol = DispatchSolution("GD", g, np.zeros(2), np.full(3, 0.5), 0, 0, 0, converged=True)
        assert np.allclose(extract_prices(sol, prob).lam, [30.0, 30.0])

    def test_gd(self):
        prob = assemble_problem({"g_max": 20.0}, [10.0, 2.0])
        assert np.allclose(extract_prices(solve_gd(prob), prob).lam, [22.0, 20.4])

    def test_generator_at_upper_limit(self):
        prob = assemble_problem({}, [10.0, 2.0])  # g_max defaults to the demand peak
        lam = extract_prices(solve_gd(prob), prob).lam
        assert lam[0] >= 2 * 0.1 * 10.0 + 20.0 - 1e-12

    def test_unconverged(self):
        prob = assemble_problem({}, [10.0, 2.0])
        sol = DispatchSolution("SDAD", np.array([10.0, 2.0]), np.zeros(2), np.full(3, 0.5), 0, 0, 0, converged=False)
        with pytest.raises(UnconvergedSolutionError):
            extract_prices(sol, prob)

    def test_price_vector_validation(self):
        with pytest.raises(ValueError):
            PriceVector([1.0, np.inf])


class TestBestResponses:
    def test_generator_closed_form(self):
        prob = assemble_problem({"g_max": 100.0}, [50.0, 50.0, 50.0])
        g = generator_best_response(np.array([30.0, 10.0, 1e6]), prob)
        assert np.allclose(g, [50.0, 0.0, 100.0])

    def test_generator_against_grid(self):
        prob = assemble_problem({"g_max": 100.0}, [50.0])
        grid = np.arange(0.0, 100.0 + 1e-9, 1e-4)
        for p in (15.0, 27.3, 41.0):
            profit = p * grid - 0.1 * grid**2 - 20.0 * grid
            g = generator_best_response(np.array([p]), prob)[0]
            assert abs(g - grid[np.argmax(profit)]) <= 1e-4

    def test_storage_flat_prices(self):
        prob = assemble_problem({"E": 10.0}, [10.0, 12.0, 9.0, 11.0])
        u, x = storage_best_response(np.full(4, 25.0), prob)
        assert np.max(np.abs(u)) <= 1e-9
        assert storage_profit(np.full(4, 25.0), u, x, prob) == pytest.approx(0.0, abs=1e-9)


class TestIncentiveCompatibility:
    def test_sdad_passes(self, solved):
        prob, sol = solved
        p = extract_prices(sol, prob)
        rep = verify_incentive_compatibility(sol, p, prob)
        assert rep.passed
        assert rep.generator_gap <= 1e-4 and rep.storage_gap <= 1e-3
        doc = json.loads(rep.to_json())
        assert {"generator_gap", "storage_gap", "pass", "lambda"} <= set(doc)

    def test_price_perturbation_detected(self, solved):
        prob, sol = solved
        lam = extract_prices(sol, prob).lam.copy()
        lam[3] += 1.0
        assert verify_incentive_compatibility(sol, lam, prob).generator_gap > 0

    def test_gd(self):
        prob = assemble_problem({"g_max": 20.0}, [10.0, 2.0, 7.0])
        sol = solve_gd(prob)
        rep = verify_incentive_compatibility(sol, extract_prices(sol, prob), prob)
        assert rep.generator_gap <= 1e-10

    def test_cost_decomposition(self, solved):
        prob, sol = solved
        lam = extract_prices(sol, prob).lam
        gen = generator_profit(lam, sol.g, prob)
        sto = storage_profit(lam, sol.u, sol.x, prob)
        rebuilt = (lam @ sol.g - gen) + (-lam @ sol.u - sto)
        assert rebuilt == pytest.approx(sol.total_cost, rel=1e-6)
        assert lam @ (sol.g - sol.u) == pytest.approx(lam @ prob.D, rel=1e-9)


class TestCertificate:
    def test_sawtooth(self):
        c = uniqueness_certificate([0.5, 0.8, 0.2, 0.5])
        assert (c.rank, c.T, c.unique) == (3, 3, True)
        assert c.unverified  # hypotheses needing the problem are listed, not assumed

    def test_nested(self):
        c = uniqueness_certificate(NESTED)
        assert (c.rank, c.T, c.unique) == (3, 5, False)

    def test_flat(self):
        c = uniqueness_certificate([0.5, 0.5, 0.5])
        assert c.rank <= 1 and not c.unique and not c.applicable

    def test_hypothesis_violation(self):
        prob = assemble_problem({"beta_b": 2.03, "E": 20.0, "B": 0.5}, [10.0, 14.0, 10.0])
        c = uniqueness_certificate([0.5, 0.6, 0.4, 0.5], prob)
        assert not c.applicable and not c.unique

    def test_stacked_rank_within_bounds(self):
        for x in ([0.5, 0.8, 0.2, 0.5], NESTED):
            c = uniqueness_certificate(x)
            assert min(c.rank + 1, c.T + 1) <= c.stacked_rank <= min(c.rank + 2, c.T + 1)
