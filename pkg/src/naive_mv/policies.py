"""Portfolio policy families and their risky-weight curves.

Four families: the pre-committed optimum anchored at a fixed (s, y); the
naive policy obtained by continuously re-anchoring; and the two consistent
planners' equilibrium policies (weak and regular).  All except the
pre-committed one are time-consistent and linear in wealth, so in the
single-stock market they are fully described by a risky weight curve c(t)
with portfolio c(t) * x.

The weak-equilibrium weight has no closed form; it solves an integral
fixed-point equation handled by :func:`weak_weight_solve` via damped Picard
iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError
from .market import (BlackScholesParams, CASE1_ALPHA, CASE2_K, GAMMA_LIMIT_EPS,
                     MarketModel, TargetSpec, gamma)


def _outer(vec: np.ndarray, x) -> np.ndarray:
    """pi = vec * x for scalar or vector wealth; shape (m,) or (m, n)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return vec * float(x)
    return np.multiply.outer(vec, x)


class Policy:
    """A deterministic map (t, x) -> portfolio vector of dollar amounts."""

    kind: str
    is_linear: bool = False

    def portfolio(self, t: float, x) -> np.ndarray:
        raise NotImplementedError

    def weight(self, t: float) -> np.ndarray:
        """Weight vector w(t) with portfolio(t, x) = w(t) * x (linear kinds)."""
        raise DomainError(f"policy kind '{self.kind}' is not linear in wealth")

    def drift_vol(self, t: float) -> tuple[float, float]:
        """Log-wealth drift/vol coefficients a(t), v(t) for dX = aX dt + vX dW.

        Only defined for linear policies with scalar noise (m = 1).
        """
        raise DomainError(f"policy kind '{self.kind}' has no scalar log coefficients")


class ZeroPolicy(Policy):
    kind = "zero"
    is_linear = True

    def __init__(self, model: MarketModel):
        self.model = model
        self.m = model.asset_count

    def portfolio(self, t, x):
        x = np.asarray(x, dtype=float)
        shape = (self.m,) if x.ndim == 0 else (self.m,) + x.shape
        return np.zeros(shape)

    def weight(self, t):
        return np.zeros(self.m)

    def drift_vol(self, t):
        return float(np.asarray(self.model.risk_free(t))), 0.0


class PreCommittedPolicy(Policy):
    """Optimal policy anchored at (s, y): shoots at the fixed target level
    gamma(s) discounted to t.  Only defined on [s, T]."""

    kind = "pre_committed"
    is_linear = False

    def __init__(self, model: MarketModel, target: TargetSpec, s: float, y: float):
        T = model.horizon
        if not (0.0 <= s < T):
            raise DomainError(f"anchor time s={s} must lie in [0, T)")
        self.model = model
        self.target = target
        self.s = s
        self.y = y
        self.gamma_s = gamma(model, target, s)

    def portfolio(self, t, x):
        T = self.model.horizon
        if t < self.s - 1e-12:
            raise DomainError(
                f"t={t} precedes the anchor s={self.s}: the pre-committed "
                "policy is only defined from its anchor onward")
        if t > T + 1e-12:
            raise DomainError(f"t={t} beyond the horizon T={T}")
        K = self.model.hedge_vector(t)
        aim = self.gamma_s * self.model.discount(t) * self.y
        x = np.asarray(x, dtype=float)
        return _outer(-K, x - aim)


class NaivePolicy(Policy):
    """Time-consistent limit of ever-finer re-anchored pre-committed policies."""

    kind = "naive"
    is_linear = True

    def __init__(self, model: MarketModel, target: TargetSpec):
        self.model = model
        self.target = target
        self.m = model.asset_count

    def weight(self, t):
        K = self.model.hedge_vector(t)
        g = gamma(self.model, self.target, t)
        return -K * (1.0 - g * self.model.discount(t))

    def portfolio(self, t, x):
        return _outer(self.weight(t), x)

    def drift_vol(self, t):
        if self.m != 1:
            raise DomainError("scalar log coefficients require m = 1")
        w = float(self.weight(t)[0])
        r = float(np.asarray(self.model.risk_free(t)))
        B = float(np.atleast_1d(np.asarray(self.model.excess_return(t)))[0])
        sig = float(np.atleast_2d(np.asarray(self.model.volatility(t)))[0, 0])
        return r + B * w, sig * w


@dataclass(frozen=True)
class RiskyWeightCurve:
    """Discretized t -> c(t), linearly interpolated between grid times."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise DomainError("times and values must have equal length")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("weight curve has non-finite values")

    def __call__(self, t):
        return np.interp(t, self.times, self.values)


class WeightPolicy(Policy):
    """Linear policy pi(t, x) = c(t) x in a single-stock market."""

    is_linear = True
    m = 1

    def __init__(self, params: BlackScholesParams, weight: Callable[[float], float],
                 kind: str = "custom_weight"):
        self.params = params
        self._weight = weight
        self.kind = kind

    def weight(self, t):
        return np.atleast_1d(np.asarray(self._weight(t), dtype=float))

    def portfolio(self, t, x):
        return _outer(self.weight(t), x)

    def drift_vol(self, t):
        c = float(self._weight(t))
        p = self.params
        return p.r + (p.b - p.r) * c, p.sigma * c


# ---------------------------------------------------------------------------
# Policy constructors
# ---------------------------------------------------------------------------

def pre_committed_policy(model: MarketModel, target: TargetSpec,
                         s: float, y: float) -> PreCommittedPolicy:
    return PreCommittedPolicy(model, target, s, y)


def naive_policy(model: MarketModel, target: TargetSpec) -> NaivePolicy:
    return NaivePolicy(model, target)


def weak_equilibrium_policy(params: BlackScholesParams, case: TargetSpec,
                            times: np.ndarray | None = None,
                            tol: float = 1e-10, max_iter: int = 500) -> WeightPolicy:
    if times is None:
        times = np.linspace(0.0, params.horizon, 2001)
    curve = weak_weight_solve(params, case, times, tol=tol, max_iter=max_iter)
    return WeightPolicy(params, curve, kind="weak_equilibrium")


def regular_equilibrium_policy(params: BlackScholesParams, case: TargetSpec) -> WeightPolicy:
    return WeightPolicy(params, lambda t: regular_weight(params, case, t),
                        kind="regular_equilibrium")


def naive_weight_policy(params: BlackScholesParams, case: TargetSpec) -> WeightPolicy:
    return WeightPolicy(params, lambda t: naive_weight(params, case, t), kind="naive")


# ---------------------------------------------------------------------------
# Black-Scholes risky-weight curves
# ---------------------------------------------------------------------------

def _case_kind(case: TargetSpec) -> str:
    if case.kind not in (CASE1_ALPHA, CASE2_K):
        raise DomainError(
            f"weight formulas require a built-in case target, got '{case.kind}'")
    return case.kind


def naive_weight(params: BlackScholesParams, case: TargetSpec, t):
    """Risky weight c_na(t) of the naive policy for the built-in cases."""
    r, b, sig, T, rho = params.r, params.b, params.sigma, params.horizon, params.rho
    t = np.asarray(t, dtype=float)
    tau = T - t
    if _case_kind(case) == CASE1_ALPHA:
        alpha = case.params["alpha"]
        out = (b - r) / (alpha * sig ** 2) * np.exp((rho - r) * tau)
    else:
        k = case.params["k"]
        limit = (k - r) / (b - r)
        near = tau < GAMMA_LIMIT_EPS * T
        safe_tau = np.where(near, 1.0, tau)
        out = np.where(
            near, limit,
            (b - r) / sig ** 2 * (np.exp((k - r) * safe_tau) - 1.0)
            / (1.0 - np.exp(-rho * safe_tau)))
    return float(out) if out.ndim == 0 else out


def regular_weight(params: BlackScholesParams, case: TargetSpec, t):
    """Risky weight c_re(t) of the regular equilibrium policy."""
    r, b, T, rho = params.r, params.b, params.horizon, params.rho
    t = np.asarray(t, dtype=float)
    tau = T - t
    if _case_kind(case) == CASE1_ALPHA:
        alpha = case.params["alpha"]
        psi = (r + (rho - r) * np.exp(rho * tau)) / (
            alpha * np.exp(r * tau) + np.exp(rho * tau) - 1.0)
        out = psi / (b - r)
    else:
        k = case.params["k"]
        out = np.full_like(tau, (k - r) / (b - r))
    return float(out) if out.ndim == 0 else out


def _case_coefficient(params: BlackScholesParams, case: TargetSpec, times: np.ndarray) -> np.ndarray:
    """Coefficient a(t) in the weak-equilibrium equation: alpha or phi(t)."""
    if _case_kind(case) == CASE1_ALPHA:
        return np.full_like(times, case.params["alpha"])
    phi = case.params["phi"]
    return np.array([phi(float(t)) for t in times])


def _backward_trapezoid(times: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """I(t_i) = int_{t_i}^{T} vals dt by the trapezoid rule."""
    seg = 0.5 * (vals[1:] + vals[:-1]) * np.diff(times)
    out = np.zeros_like(vals)
    out[:-1] = np.cumsum(seg[::-1])[::-1]
    return out


def weak_weight_solve(params: BlackScholesParams, case: TargetSpec,
                      times: np.ndarray, tol: float = 1e-10,
                      max_iter: int = 500, damping: float = 0.5) -> RiskyWeightCurve:
    """Solve the weak-equilibrium fixed-point equation

        c(t) = (b-r)/(a(t) sigma^2) [e^{-int_t^T (r + (b-r)c + sigma^2 c^2)}
                                     + a(t) e^{-int_t^T sigma^2 c^2} - a(t)]

    with a(t) the case coefficient, by damped Picard iteration
    c <- (1 - theta) c + theta RHS(c).  Integrals use the trapezoid rule on
    the supplied grid; the terminal value c(T) = (b-r)/(a(T) sigma^2) is
    exact (empty integrals).
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    times = np.asarray(times, dtype=float)
    if times[0] > 1e-12 or times[-1] < params.horizon - 1e-12:
        raise DomainError("grid must cover [0, T]")
    r, b, sig2 = params.r, params.b, params.sigma ** 2
    a = _case_coefficient(params, case, times)

    def rhs(c):
        i1 = _backward_trapezoid(times, r + (b - r) * c + sig2 * c ** 2)
        i2 = _backward_trapezoid(times, sig2 * c ** 2)
        return (b - r) / (a * sig2) * (np.exp(-i1) + a * (np.exp(-i2) - 1.0))

    c = np.full_like(times, (b - r) / (a[-1] * sig2))
    residual = math.inf
    for _ in range(max_iter):
        target = rhs(c)
        residual = float(np.max(np.abs(c - target)))
        if residual < tol:
            return RiskyWeightCurve(times, c)
        c = (1.0 - damping) * c + damping * target
    raise ConvergenceError(
        f"weak-equilibrium fixed point not converged after {max_iter} "
        f"iterations (last residual {residual:.3e})", last_residual=residual)


def weak_weight_residual(params: BlackScholesParams, case: TargetSpec,
                         curve: RiskyWeightCurve) -> float:
    """Sup-norm residual of a candidate weight curve in the fixed-point equation."""
    times, c = curve.times, curve.values
    r, b, sig2 = params.r, params.b, params.sigma ** 2
    a = _case_coefficient(params, case, times)
    i1 = _backward_trapezoid(times, r + (b - r) * c + sig2 * c ** 2)
    i2 = _backward_trapezoid(times, sig2 * c ** 2)
    rhs = (b - r) / (a * sig2) * (np.exp(-i1) + a * (np.exp(-i2) - 1.0))
    return float(np.max(np.abs(c - rhs)))


# ---------------------------------------------------------------------------
# Dominance report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DominanceReport:
    """Pointwise comparison of the naive weight against both equilibrium weights."""

    times: np.ndarray
    c_na: np.ndarray
    c_we: np.ndarray
    c_re: np.ndarray

    @property
    def margin_we(self) -> np.ndarray:
        return self.c_na - self.c_we

    @property
    def margin_re(self) -> np.ndarray:
        return self.c_na - self.c_re

    def interior(self, horizon: float) -> np.ndarray:
        """Boolean mask of grid points strictly before T."""
        return self.times < horizon - 1e-12

    def all_margins_positive(self, horizon: float) -> bool:
        mask = self.interior(horizon)
        return bool(np.all(self.margin_we[mask] > 0) and
                    np.all(self.margin_re[mask] > 0))

    def to_csv(self, path) -> None:
        write_weights_csv(path, self.times, self.c_na, self.c_we, self.c_re)


def dominance_report(params: BlackScholesParams, case: TargetSpec,
                     times: np.ndarray, tol: float = 1e-10,
                     max_iter: int = 500) -> DominanceReport:
    times = np.asarray(times, dtype=float)
    c_we = weak_weight_solve(params, case, times, tol=tol, max_iter=max_iter)
    return DominanceReport(
        times=times,
        c_na=np.atleast_1d(naive_weight(params, case, times)),
        c_we=c_we.values,
        c_re=np.atleast_1d(regular_weight(params, case, times)),
    )


def write_weights_csv(path, times, c_na, c_we, c_re) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t,c_na,c_we,c_re,margin_we,margin_re\n")
        for t, na, we, re_ in zip(times, c_na, c_we, c_re):
            fh.write(f"{t:.12g},{na:.12g},{we:.12g},{re_:.12g},"
                     f"{na - we:.12g},{na - re_:.12g}\n")
