import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from naive_mv import (DomainError, SimConfig, TimeGrid, convergence_metric,
                      convert_target, expected_terminal_naive_closed,
                      frontier_variance, inefficiency_report, naive_policy,
                      pre_committed_policy, precommit_equivalence_check,
                      second_moment_bound_check)
from naive_mv.analysis import increment_bound, write_convergence_csv


class TestFrontier:
    def test_matches_oracle(self, model):
        E = 1.3
        want = float(oracles.frontier_variance(oracles.mp.mpf("1.3")))
        assert frontier_variance(model, 0.0, 1.0, E) == pytest.approx(want, rel=1e-13)

    def test_zero_at_risk_free_mean(self, model):
        assert frontier_variance(model, 0.0, 1.0, math.exp(0.02)) == \
            pytest.approx(0.0, abs=1e-18)

    @settings(max_examples=40, deadline=None)
    @given(lam=st.floats(0.1, 10.0), E=st.floats(1.1, 3.0), y=st.floats(0.2, 5.0))
    def test_homogeneous_of_degree_two(self, model, lam, E, y):
        base = frontier_variance(model, 0.0, y, E)
        scaled = frontier_variance(model, 0.0, lam * y, lam * E)
        assert scaled == pytest.approx(lam ** 2 * base, rel=1e-10)

    def test_degenerate_market_raises(self):
        from naive_mv import BlackScholesParams
        flat = BlackScholesParams(r=0.02, b=0.02, sigma=0.2, horizon=1.0)
        with pytest.raises(DomainError):
            frontier_variance(flat.to_market_model(), 0.0, 1.0, 1.5)


class TestNaiveClosedForm:
    def test_matches_oracle(self, params):
        want = float(oracles.naive_terminal_mean())
        got = expected_terminal_naive_closed(params, 1.0, 1.0)
        assert abs(got - want) / want < 1e-14

    def test_rho_equals_r_limit_branch(self):
        from naive_mv import BlackScholesParams
        # sigma chosen so rho = ((b-r)/sigma)^2 = r exactly
        r, b = 0.04, 0.08
        sigma = (b - r) / math.sqrt(r)
        p = BlackScholesParams(r=r, b=b, sigma=sigma, horizon=1.0)
        got = expected_terminal_naive_closed(p, 2.0, 1.0)
        want = math.exp(r) * math.exp(r / 2.0)  # exponent rho T / alpha
        assert got == pytest.approx(want, rel=1e-12)

    def test_continuity_across_the_limit(self):
        from naive_mv import BlackScholesParams
        r = 0.04
        vals = []
        for eps in (0.0, 1e-9):
            sigma = 0.04 / math.sqrt(r + eps)
            p = BlackScholesParams(r=r, b=0.08, sigma=sigma, horizon=1.0)
            vals.append(expected_terminal_naive_closed(p, 1.0, 1.0))
        assert vals[0] == pytest.approx(vals[1], rel=1e-7)

    def test_rejects_nonpositive_alpha(self, params):
        with pytest.raises(DomainError):
            expected_terminal_naive_closed(params, 0.0, 1.0)


class TestIncrementBound:
    def test_halves_with_each_n(self, model, case1):
        ts = np.linspace(0, 1, 257)
        b3 = increment_bound(model, case1, 3, ts, 1.0)
        b4 = increment_bound(model, case1, 4, ts, 1.0)
        assert b3 > 0
        assert b4 == pytest.approx(b3 / 2, rel=1e-12)


@pytest.fixture(scope="module")
def rows(model, case1):
    cfg = SimConfig(TimeGrid(0, 1, 256), n_paths=8192, seed=42)
    return convergence_metric(range(2, 7), model, case1, cfg)


class TestConvergence:
    def test_distance_strictly_decreasing(self, rows):
        d = [r.d_n for r in rows]
        assert all(a > b for a, b in zip(d, d[1:]))

    def test_increments_within_bound(self, rows):
        for r in rows:
            assert r.increment_mc <= r.increment_bound + 3 * r.increment_se

    def test_mean_curves_close(self, rows):
        # common-driver means of X_n and the naive process agree to O(2^-n)
        assert rows[-1].mean_curve_dist < rows[0].mean_curve_dist

    def test_csv_schema(self, rows, tmp_path):
        out = tmp_path / "conv.csv"
        write_convergence_csv(out, rows)
        lines = out.read_text().splitlines()
        assert lines[0] == "n,d_n,increment_mc,increment_bound"
        assert len(lines) == len(rows) + 1
        first = lines[1].split(",")
        assert int(first[0]) == rows[0].n
        assert float(first[1]) == pytest.approx(rows[0].d_n, rel=1e-10)


class TestSecondMomentBound:
    def test_bound_holds_for_n4(self, model, case1):
        cfg = SimConfig(TimeGrid(0, 1, 256), n_paths=16384, seed=1)
        rep = second_moment_bound_check(4, model, case1, cfg)
        assert rep.holds_everywhere


class TestInefficiency:
    def test_naive_strictly_inefficient(self, model, case1):
        na = naive_policy(model, case1)
        cfg = SimConfig(TimeGrid(0, 1, 256), n_paths=30_000, seed=3)
        rep = inefficiency_report(na, model, cfg)
        assert rep.gap > 0
        assert rep.z_score > 2.5

    def test_precommit_on_frontier(self, model, case1):
        pc = pre_committed_policy(model, case1, 0.0, 1.0)
        cfg = SimConfig(TimeGrid(0, 1, 256), n_paths=30_000, seed=3)
        rep = inefficiency_report(pc, model, cfg)
        assert abs(rep.gap) <= 3 * rep.gap_se


class TestEquivalence:
    def test_case1_conversion_identity(self, model, case1):
        lspec = convert_target(case1, model)
        rep = precommit_equivalence_check(
            model, case1, lspec, np.linspace(0, 0.99, 15), np.linspace(0.1, 10, 15))
        assert rep.max_abs_diff < 1e-12

    def test_case2_conversion_identity(self, model, case2):
        aspec = convert_target(case2, model)
        rep = precommit_equivalence_check(
            model, aspec, case2, np.linspace(0, 0.99, 15), np.linspace(0.1, 10, 15))
        assert rep.max_abs_diff < 1e-12
