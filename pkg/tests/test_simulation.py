import math

import numpy as np
import pytest

import oracles
from naive_mv import (AlignmentError, ConfigError, DomainError, PathEnsemble,
                      SimConfig, TimeGrid, bound_curve_Y, moment_odes,
                      naive_policy, pre_committed_policy,
                      simulate_committed_2n, simulate_policy_paths,
                      simulate_policy_summary)
from naive_mv.policies import WeightPolicy, ZeroPolicy
from naive_mv.simulation import (CHUNK_PATHS, chunk_ranges,
                                 committed_step_layout, thread_count)


class TestTimeGrid:
    def test_basic_properties(self):
        g = TimeGrid(0.0, 1.0, 4)
        assert g.step == 0.25
        assert np.allclose(g.times, [0, 0.25, 0.5, 0.75, 1.0])

    def test_dyadic_alignment(self):
        g = TimeGrid(0.0, 1.0, 64)
        assert g.is_dyadic_aligned(0)
        assert g.is_dyadic_aligned(6)
        assert not g.is_dyadic_aligned(7)

    def test_invalid(self):
        with pytest.raises(DomainError):
            TimeGrid(0.0, 0.0, 4)
        with pytest.raises(DomainError):
            TimeGrid(0.0, 1.0, 0)

    def test_committed_layout_errors(self):
        cfg = SimConfig(TimeGrid(0.0, 1.0, 48), n_paths=8, seed=0)
        with pytest.raises(AlignmentError):
            committed_step_layout(cfg, 5)  # 48 not a multiple of 32
        cfg2 = SimConfig(TimeGrid(0.5, 1.0, 32), n_paths=8, seed=0)
        with pytest.raises(AlignmentError):
            committed_step_layout(cfg2, 2)  # must start at t = 0


class TestConfig:
    def test_unknown_scheme_rejected(self):
        with pytest.raises(ConfigError):
            SimConfig(TimeGrid(0, 1, 4), n_paths=4, seed=0, scheme="milstein")

    def test_chunk_ranges_cover_paths(self):
        total = 2 * CHUNK_PATHS + 17
        ranges = chunk_ranges(total)
        assert sum(c for _, c in ranges) == total
        assert ranges[0] == (0, CHUNK_PATHS)
        assert ranges[-1][1] == 17

    def test_thread_count_env(self, monkeypatch):
        monkeypatch.delenv("NAIVE_MV_THREADS", raising=False)
        assert thread_count() == 1
        monkeypatch.setenv("NAIVE_MV_THREADS", "4")
        assert thread_count() == 4
        monkeypatch.setenv("NAIVE_MV_THREADS", "zero")
        with pytest.raises(ConfigError):
            thread_count()


class TestSchemes:
    def test_zero_policy_is_deterministic_growth(self, model):
        cfg = SimConfig(TimeGrid(0, 1, 128), n_paths=16, seed=1)
        ens = simulate_policy_paths(ZeroPolicy(model), model, 0.0, 1.0, cfg)
        # Euler compounding of the risk-free rate: prod (1 + r h) [TRIVIAL]
        want = (1 + 0.02 / 128) ** 128
        assert np.allclose(ens.terminal(), want, rtol=1e-12)

    def test_exact_log_constant_weight_matches_lognormal(self, params, model):
        # pi = c x with constant c: X(T) is exactly lognormal.
        c = 0.7
        pol = WeightPolicy(params, lambda t: c, kind="const")
        cfg = SimConfig(TimeGrid(0, 1, 8), n_paths=20_000, seed=5,
                        scheme="exact_log")
        ens = simulate_policy_paths(pol, model, 0.0, 1.0, cfg)
        xT = ens.terminal()
        a = 0.02 + c * 0.06
        v = c * 0.2
        mean = math.exp(a)
        assert abs(xT.mean() - mean) < 4 * xT.std() / math.sqrt(len(xT))
        # log X(T) must be exactly Gaussian with the stated parameters:
        logs = np.log(xT)
        assert abs(logs.mean() - (a - v * v / 2)) < 4 * v / math.sqrt(len(xT))
        assert abs(logs.std() - v) < 0.01

    def test_exact_log_step_count_invariance_in_distribution(self, params, model):
        # For constant coefficients the exact scheme has no time-step bias.
        pol = WeightPolicy(params, lambda t: 1.0, kind="const")
        means = []
        for steps in (2, 64):
            cfg = SimConfig(TimeGrid(0, 1, steps), n_paths=30_000, seed=9,
                            scheme="exact_log")
            means.append(simulate_policy_paths(pol, model, 0.0, 1.0,
                                               cfg).terminal().mean())
        assert abs(means[0] - means[1]) < 0.01

    def test_exact_log_rejects_nonlinear_policy(self, model, case1):
        pc = pre_committed_policy(model, case1, 0.0, 1.0)
        cfg = SimConfig(TimeGrid(0, 1, 8), n_paths=8, seed=0, scheme="exact_log")
        with pytest.raises(ConfigError):
            simulate_policy_paths(pc, model, 0.0, 1.0, cfg)

    def test_euler_vs_exact_log_weak_agreement(self, model, case1):
        na = naive_policy(model, case1)
        cfg_e = SimConfig(TimeGrid(0, 1, 512), n_paths=20_000, seed=11)
        cfg_x = SimConfig(TimeGrid(0, 1, 512), n_paths=20_000, seed=11,
                          scheme="exact_log")
        m_e = simulate_policy_paths(na, model, 0.0, 1.0, cfg_e).terminal().mean()
        m_x = simulate_policy_paths(na, model, 0.0, 1.0, cfg_x).terminal().mean()
        assert abs(m_e - m_x) < 0.01


class TestDeterminism:
    def test_serial_parallel_identical(self, model, case1, monkeypatch):
        na = naive_policy(model, case1)
        cfg = SimConfig(TimeGrid(0, 1, 32), n_paths=3 * CHUNK_PATHS + 5, seed=42)
        monkeypatch.setenv("NAIVE_MV_THREADS", "1")
        serial = simulate_policy_paths(na, model, 0.0, 1.0, cfg)
        monkeypatch.setenv("NAIVE_MV_THREADS", "4")
        parallel = simulate_policy_paths(na, model, 0.0, 1.0, cfg)
        assert np.array_equal(serial.paths, parallel.paths)

    def test_summary_matches_full_paths(self, model, case1):
        na = naive_policy(model, case1)
        cfg = SimConfig(TimeGrid(0, 1, 32), n_paths=CHUNK_PATHS + 100, seed=3)
        full = simulate_policy_paths(na, model, 0.0, 1.0, cfg).summary()
        streamed = simulate_policy_summary(na, model, 0.0, 1.0, cfg)
        # same paths; moments may differ by summation order across chunks
        assert np.allclose(full.mean, streamed.mean, rtol=1e-13, atol=0)
        assert np.allclose(full.second_moment, streamed.second_moment,
                           rtol=1e-13, atol=0)
        assert np.array_equal(full.terminal, streamed.terminal)

    def test_seed_changes_paths(self, model, case1):
        na = naive_policy(model, case1)
        a = simulate_policy_paths(na, model, 0.0, 1.0,
                                  SimConfig(TimeGrid(0, 1, 16), 64, seed=1))
        b = simulate_policy_paths(na, model, 0.0, 1.0,
                                  SimConfig(TimeGrid(0, 1, 16), 64, seed=2))
        assert not np.array_equal(a.paths, b.paths)


class TestBinaryDump:
    def test_round_trip(self, model, case1, tmp_path):
        na = naive_policy(model, case1)
        cfg = SimConfig(TimeGrid(0, 1, 16), n_paths=32, seed=4)
        ens = simulate_policy_paths(na, model, 0.0, 1.0, cfg)
        f = tmp_path / "paths.bin"
        ens.dump_binary(f)
        back = PathEnsemble.load_binary(f, cfg.grid, seed=4)
        assert np.array_equal(ens.paths, back.paths)

    def test_header_layout(self, model, tmp_path):
        cfg = SimConfig(TimeGrid(0, 1, 3), n_paths=5, seed=0)
        ens = simulate_policy_paths(ZeroPolicy(model), model, 0.0, 1.0, cfg)
        f = tmp_path / "paths.bin"
        ens.dump_binary(f)
        raw = f.read_bytes()
        assert raw[:8] == b"NMVPATH1"
        n_times = int.from_bytes(raw[8:16], "little")
        n_paths = int.from_bytes(raw[16:24], "little")
        assert (n_times, n_paths) == (4, 5)
        assert len(raw) == 24 + 8 * 4 * 5
        first = np.frombuffer(raw[24:32], dtype="<f8")[0]
        assert first == 1.0  # X(0) = initial wealth

    def test_bad_magic_rejected(self, tmp_path):
        f = tmp_path / "junk.bin"
        f.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(ConfigError):
            PathEnsemble.load_binary(f, TimeGrid(0, 1, 1))


class TestCommittedProcess:
    def test_n0_equals_precommitted(self, model, case1):
        cfg = SimConfig(TimeGrid(0, 1, 64), n_paths=256, seed=7)
        pc = pre_committed_policy(model, case1, 0.0, 1.0)
        a = simulate_policy_paths(pc, model, 0.0, 1.0, cfg)
        b = simulate_committed_2n(0, model, case1, cfg)
        assert np.array_equal(a.paths, b.paths)

    def test_anchors_refresh_at_dyadic_times(self, model, case1):
        """n=1 and n=2 share the anchor at t=0, so on the same driver their
        paths coincide on the first quarter and split at the first extra
        re-commitment time t = 1/4."""
        cfg = SimConfig(TimeGrid(0, 1, 64), n_paths=512, seed=8)
        x1 = simulate_committed_2n(1, model, case1, cfg)
        x2 = simulate_committed_2n(2, model, case1, cfg)
        q = 16  # index of t = 1/4 on a 64-step grid
        assert np.array_equal(x1.paths[:, :q + 1], x2.paths[:, :q + 1])
        assert not np.array_equal(x1.paths[:, q + 1], x2.paths[:, q + 1])

    def test_larger_n_closer_to_naive(self, model, case1):
        cfg = SimConfig(TimeGrid(0, 1, 64), n_paths=4096, seed=9)
        na = naive_policy(model, case1)
        base = simulate_policy_paths(na, model, 0.0, 1.0, cfg)
        dist = []
        for n in (1, 3, 5):
            xn = simulate_committed_2n(n, model, case1, cfg)
            dist.append(float(np.mean((xn.paths - base.paths) ** 2)))
        assert dist[0] > dist[1] > dist[2]


class TestMomentODEs:
    def test_naive_mean_matches_closed_form(self, model, case1):
        na = naive_policy(model, case1)
        E, _ = moment_odes(na, model, 0.0, 1.0, np.linspace(0, 1, 4001))
        want = float(oracles.naive_terminal_mean())
        assert abs(E[-1] - want) < 1e-10

    def test_precommit_moments_match_closed_form(self, model, case1):
        pc = pre_committed_policy(model, case1, 0.0, 1.0)
        E, M = moment_odes(pc, model, 0.0, 1.0, np.linspace(0, 1, 4001))
        assert abs(E[-1] - float(oracles.growth_factor_case1(0))) < 1e-10
        want_var = float(oracles.precommit_terminal_variance())
        assert abs((M[-1] - E[-1] ** 2) - want_var) < 1e-9

    def test_zero_policy_moments(self, model):
        z = ZeroPolicy(model)
        E, M = moment_odes(z, model, 0.0, 1.0, np.linspace(0, 1, 1001))
        assert E[-1] == pytest.approx(math.exp(0.02), rel=1e-10)
        assert M[-1] == pytest.approx(math.exp(0.04), rel=1e-10)

    def test_bound_curve_initial_and_monotone(self, model, case1):
        ts = np.linspace(0, 1, 257)
        Y = bound_curve_Y(model, case1, ts, 1.0)
        assert Y[0] == 1.0  # x0^2
        assert np.all(np.diff(Y) > 0)
