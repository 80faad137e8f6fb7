"""Frontier values, closed-form means, convergence diagnostics and
efficiency checks.

The convergence experiment couples each 2^-n re-committed process to the
naive process on a common Brownian driver and reports the grid-L2 distance

    d_n = sqrt( E int_0^T |X_n(t) - X(t)|^2 dt ),

the largest within-interval increment second moment, and its theoretical
envelope (4T/2^n)(A* + g* C* + g* D* + F*) Y(T) where the starred constants
are grid maxima of the squared SDE coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .market import BlackScholesParams, MarketModel, TargetSpec
from .policies import Policy, naive_policy
from .simulation import (SimConfig, affine_coefficients, bound_curve_Y,
                         committed_step_layout, iter_chunk_increments,
                         simulate_chunk, simulate_committed_chunk,
                         simulate_policy_summary)


# ---------------------------------------------------------------------------
# Efficient frontier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrontierPoint:
    s: float
    y: float
    expected_terminal: float
    variance: float


def frontier_variance(model: MarketModel, s: float, y: float, E: float) -> float:
    """Minimal terminal-wealth variance achievable from (s, y) at mean E:

        V = (E - y e^{int_s^T r})^2 / (e^{int_s^T rho} - 1).
    """
    T = model.horizon
    int_rho = model.int_rho(s, T)
    denom = math.exp(int_rho) - 1.0
    if denom <= 0.0:
        raise DomainError("int_s^T rho must be positive (excluded by (A2))")
    gap = E - y * math.exp(model.int_r(s, T))
    return gap * gap / denom


def expected_terminal_naive_closed(params: BlackScholesParams, alpha: float,
                                   x0: float) -> float:
    """Closed-form terminal mean of the naive policy, risk aversion alpha / y:

        x0 e^{rT} exp[(1/alpha) rho/(rho - r) (e^{(rho - r) T} - 1)]

    with the limit exponent (1/alpha) rho T when rho = r.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    r, rho, T = params.r, params.rho, params.horizon
    if abs(rho - r) < 1e-12:
        expo = rho * T / alpha
    else:
        expo = (rho / (rho - r)) * (math.exp((rho - r) * T) - 1.0) / alpha
    return x0 * math.exp(r * T) * math.exp(expo)


# ---------------------------------------------------------------------------
# Convergence of the dyadic re-commitment to the naive process
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    d_n: float                 # common-driver grid-L2 distance to the naive process
    d_n_se: float
    increment_mc: float        # max_s E|X_n(s) - X_n(anchor(s))|^2
    increment_se: float        # standard error at the maximizing grid point
    increment_bound: float     # theoretical envelope
    mean_curve_dist: float     # sup_t |E[X_n(t)] - E[X(t)]|


def increment_bound(model: MarketModel, target: TargetSpec, n: int,
                    times: np.ndarray, initial_wealth: float) -> float:
    """Envelope (4T/2^n)(A* + g* C* + g* D* + F*) Y(T) with the starred
    constants the grid maxima of |A|^2, |C|^2, ||D||^2, ||F||^2 and gamma."""
    from .market import gamma as gamma_fn
    coeffs = affine_coefficients(model, times)
    A_star = float(np.max(coeffs.A ** 2))
    C_star = float(np.max(coeffs.C ** 2))
    D_star = float(np.max(np.sum(coeffs.D ** 2, axis=1)))
    F_star = float(np.max(np.sum(coeffs.F ** 2, axis=1)))
    g_star = max(gamma_fn(model, target, float(t)) for t in times)
    Y_T = bound_curve_Y(model, target, times, initial_wealth)[-1]
    T = model.horizon
    return (4.0 * T / 2 ** n) * (A_star + g_star * C_star + g_star * D_star
                                 + F_star) * Y_T


def convergence_metric(n_range: Sequence[int], model: MarketModel,
                       target: TargetSpec, config: SimConfig) -> list[ConvergenceRow]:
    """Common-driver comparison of X_n against the naive process for each n.

    Streams over path chunks: the naive process is simulated once per chunk
    and every X_n re-uses the same increments, so distances are pathwise.
    """
    n_range = list(n_range)
    for n in n_range:
        committed_step_layout(config, n)  # raises AlignmentError early
    times = config.grid.times
    n_times = len(times)
    T = model.horizon
    x0 = config.initial_wealth
    pol = naive_policy(model, target)
    cache: dict = {}

    # accumulators per n
    sum_d2 = {n: 0.0 for n in n_range}       # per-path int |X_n - X|^2 dt
    sum_d2_sq = {n: 0.0 for n in n_range}
    sum_inc2 = {n: np.zeros(n_times) for n in n_range}
    sum_inc4 = {n: np.zeros(n_times) for n in n_range}
    sum_xn = {n: np.zeros(n_times) for n in n_range}
    sum_x = np.zeros(n_times)
    weights = np.full(n_times, config.grid.step)  # trapezoid weights in time
    weights[0] *= 0.5
    weights[-1] *= 0.5

    anchor_idx = {}
    for n in n_range:
        spi = config.grid.n_steps // 2 ** n
        anchor_idx[n] = (np.arange(n_times) // spi) * spi
        anchor_idx[n][-1] = n_times - 1 - spi  # t = T belongs to the last interval

    for _, dZ in iter_chunk_increments(config, model.asset_count):
        x_naive = simulate_chunk(pol, model, 0.0, x0, config, dZ, cache)
        sum_x += x_naive.sum(axis=0)
        for n in n_range:
            x_n = simulate_committed_chunk(model, target, n, config, dZ, cache)
            diff2 = (x_n - x_naive) ** 2
            per_path = diff2 @ weights
            sum_d2[n] += float(per_path.sum())
            sum_d2_sq[n] += float((per_path ** 2).sum())
            inc2 = (x_n - x_n[:, anchor_idx[n]]) ** 2
            sum_inc2[n] += inc2.sum(axis=0)
            sum_inc4[n] += (inc2 ** 2).sum(axis=0)
            sum_xn[n] += x_n.sum(axis=0)

    P = config.n_paths
    mean_naive = sum_x / P
    rows = []
    for n in n_range:
        d2_mean = sum_d2[n] / P
        d2_var = max(sum_d2_sq[n] / P - d2_mean ** 2, 0.0)
        d_n = math.sqrt(max(d2_mean, 0.0))
        # delta method for sqrt of the mean
        d_n_se = (math.sqrt(d2_var / P) / (2 * d_n)) if d_n > 0 else 0.0
        inc_mean = sum_inc2[n] / P
        j = int(np.argmax(inc_mean))
        inc_var = max(sum_inc4[n][j] / P - inc_mean[j] ** 2, 0.0)
        rows.append(ConvergenceRow(
            n=n,
            d_n=d_n,
            d_n_se=d_n_se,
            increment_mc=float(inc_mean[j]),
            increment_se=math.sqrt(inc_var / P),
            increment_bound=increment_bound(model, target, n, times, x0),
            mean_curve_dist=float(np.max(np.abs(sum_xn[n] / P - mean_naive))),
        ))
    return rows


def write_convergence_csv(path, rows: Sequence[ConvergenceRow]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("n,d_n,increment_mc,increment_bound\n")
        for row in rows:
            fh.write(f"{row.n},{row.d_n:.12g},{row.increment_mc:.12g},"
                     f"{row.increment_bound:.12g}\n")


@dataclass(frozen=True)
class SecondMomentBoundReport:
    """Grid comparison of the MC second moment of X_n against the envelope Y."""

    times: np.ndarray
    second_moment: np.ndarray
    stderr: np.ndarray          # of the second-moment estimate
    bound: np.ndarray

    @property
    def holds_everywhere(self) -> bool:
        return bool(np.all(self.second_moment <= self.bound + 3 * self.stderr))

    @property
    def max_excess(self) -> float:
        return float(np.max(self.second_moment - self.bound))


def second_moment_bound_check(n: int, model: MarketModel, target: TargetSpec,
                              config: SimConfig) -> SecondMomentBoundReport:
    """Estimate E[X_n(t)^2] on the grid (streaming) and compare against Y(t)."""
    times = config.grid.times
    n_times = len(times)
    sum_x2 = np.zeros(n_times)
    sum_x4 = np.zeros(n_times)
    cache: dict = {}
    for _, dZ in iter_chunk_increments(config, model.asset_count):
        x_n = simulate_committed_chunk(model, target, n, config, dZ, cache)
        sq = x_n ** 2
        sum_x2 += sq.sum(axis=0)
        sum_x4 += (sq ** 2).sum(axis=0)
    P = config.n_paths
    m2 = sum_x2 / P
    var = np.maximum(sum_x4 / P - m2 ** 2, 0.0)
    return SecondMomentBoundReport(
        times=times,
        second_moment=m2,
        stderr=np.sqrt(var / P),
        bound=bound_curve_Y(model, target, times, config.initial_wealth),
    )


# ---------------------------------------------------------------------------
# Mean-variance inefficiency
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InefficiencyReport:
    policy_kind: str
    mean: float
    mean_se: float
    variance: float
    frontier_var: float     # frontier variance at the achieved mean
    gap: float              # variance - frontier_var
    gap_se: float

    @property
    def z_score(self) -> float:
        return self.gap / self.gap_se if self.gap_se > 0 else math.inf


def inefficiency_report(policy: Policy, model: MarketModel, config: SimConfig,
                        summary=None) -> InefficiencyReport:
    """Simulate a policy from (0, x0), estimate (mean, variance) of X(T) and
    compare the variance with the frontier variance at the achieved mean.

    The gap's standard error uses the per-path influence function of
    V_hat - g(E_hat), g being the frontier variance as a function of the mean.
    A precomputed ``summary`` for the same policy and config skips the run.
    """
    x0 = config.initial_wealth
    if summary is None:
        summary = simulate_policy_summary(policy, model, 0.0, x0, config)
    xT = summary.terminal
    P = len(xT)
    mean = float(xT.mean())
    var = float(xT.var(ddof=1))
    T = model.horizon
    denom = math.exp(model.int_rho(0.0, T)) - 1.0
    riskfree = x0 * math.exp(model.int_r(0.0, T))
    v_star = (mean - riskfree) ** 2 / denom
    g_prime = 2.0 * (mean - riskfree) / denom
    centered = xT - mean
    influence = (centered ** 2 - var) - g_prime * centered
    gap_se = float(influence.std(ddof=1) / math.sqrt(P))
    return InefficiencyReport(
        policy_kind=policy.kind,
        mean=mean,
        mean_se=float(xT.std(ddof=1) / math.sqrt(P)),
        variance=var,
        frontier_var=v_star,
        gap=var - v_star,
        gap_se=gap_se,
    )


# ---------------------------------------------------------------------------
# Target-conversion identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EquivalenceReport:
    max_abs_diff: float
    where: tuple[float, float]


def precommit_equivalence_check(model: MarketModel, alpha_spec: TargetSpec,
                                L_spec: TargetSpec, s_grid: np.ndarray,
                                y_grid: np.ndarray) -> EquivalenceReport:
    """Compare the two anchored target levels

        (1/alpha(s,y)) e^{int rho} + y e^{int r}
        (L(s,y) - y e^{int (r - rho)}) / (1 - e^{-int rho})

    over an (s, y) grid; they agree exactly when the specs are linked by the
    conversion identity."""
    T = model.horizon
    worst = -1.0
    where = (float(s_grid[0]), float(y_grid[0]))
    for s in s_grid:
        P = model.int_rho(float(s), T)
        R = model.int_r(float(s), T)
        for y in y_grid:
            lv_alpha = math.exp(P) / alpha_spec.risk_aversion(float(s), float(y)) \
                + float(y) * math.exp(R)
            lv_L = (L_spec.wealth_target(float(s), float(y))
                    - float(y) * math.exp(R - P)) / (1.0 - math.exp(-P))
            diff = abs(lv_alpha - lv_L)
            if diff > worst:
                worst = diff
                where = (float(s), float(y))
    return EquivalenceReport(max_abs_diff=worst, where=where)
