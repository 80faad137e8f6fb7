"""Market coefficients, investment targets, and assumption validation.

The market is an (m+1)-asset frictionless model with deterministic
coefficient curves: risk-free rate r(t), excess return vector B(t) and
volatility matrix sigma(t) on [0, T].  The derived quantity

    rho(t) = B(t) [sigma(t) sigma(t)^T]^{-1} B(t)^T

is the squared market price of risk.  Targets come in three equivalent
flavours -- a growth factor f(u, v), a wealth target L(s, y), or a
state-dependent risk aversion alpha(s, y) -- convertible into each other
whenever the market is fixed (see :func:`convert_target`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AssumptionError, DomainError

# Number of subintervals for composite-Simpson integration of general
# (callable) coefficient curves.
SIMPSON_PANELS = 10_000

# Relative width of the l'Hopital window for gamma near s = T.
GAMMA_LIMIT_EPS = 1e-6


def _simpson(fn: Callable[[np.ndarray], np.ndarray], a: float, b: float,
             panels: int = SIMPSON_PANELS) -> float:
    if b <= a:
        return 0.0
    n = 2 * panels
    t = np.linspace(a, b, n + 1)
    y = np.asarray(fn(t), dtype=float)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((b - a) / (3 * n) * (w @ y))


@dataclass(frozen=True)
class CoefficientCurve:
    """A deterministic coefficient on [0, T].

    One of three representations: a constant value, a piecewise-constant
    function on a partition, or an arbitrary callable.  Values may be
    scalars, vectors or matrices; only scalar-valued curves support
    :meth:`integral`.
    """

    constant: np.ndarray | None = None
    breakpoints: np.ndarray | None = None  # len K+1, covers [0, T]
    pieces: np.ndarray | None = None       # K values
    fn: Callable[[float], np.ndarray] | None = None

    @staticmethod
    def from_constant(value) -> "CoefficientCurve":
        return CoefficientCurve(constant=np.asarray(value, dtype=float))

    @staticmethod
    def piecewise(breakpoints: Sequence[float], values: Sequence) -> "CoefficientCurve":
        bp = np.asarray(breakpoints, dtype=float)
        vals = np.asarray(values, dtype=float)
        if bp.ndim != 1 or len(bp) < 2 or np.any(np.diff(bp) <= 0):
            raise DomainError("breakpoints must be strictly increasing with >= 2 entries")
        if len(vals) != len(bp) - 1:
            raise DomainError("need exactly one value per subinterval")
        return CoefficientCurve(breakpoints=bp, pieces=vals)

    @staticmethod
    def from_function(fn: Callable[[float], np.ndarray]) -> "CoefficientCurve":
        return CoefficientCurve(fn=fn)

    def __call__(self, t: float):
        if self.constant is not None:
            return self.constant
        if self.pieces is not None:
            idx = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
            idx = min(max(idx, 0), len(self.pieces) - 1)
            return self.pieces[idx]
        return np.asarray(self.fn(t), dtype=float)

    def integral(self, a: float, b: float) -> float:
        """Exact integral for constant/piecewise curves, Simpson otherwise."""
        if b < a:
            raise DomainError("integral requires a <= b")
        if self.constant is not None:
            if np.ndim(self.constant) != 0:
                raise DomainError("integral only defined for scalar curves")
            return float(self.constant) * (b - a)
        if self.pieces is not None:
            if self.pieces.ndim != 1:
                raise DomainError("integral only defined for scalar curves")
            lo = np.clip(self.breakpoints[:-1], a, b)
            hi = np.clip(self.breakpoints[1:], a, b)
            return float(np.sum((hi - lo) * self.pieces))
        return _simpson(np.vectorize(lambda s: float(self.fn(s))), a, b)


@dataclass(frozen=True)
class MarketModel:
    """Deterministic-coefficient market on [0, T] with m risky assets."""

    horizon: float
    risk_free: CoefficientCurve
    excess_return: CoefficientCurve
    volatility: CoefficientCurve
    asset_count: int = 1

    def __post_init__(self):
        if self.horizon <= 0:
            raise DomainError("horizon must be positive")
        if self.asset_count < 1:
            raise DomainError("asset_count must be a positive integer")

    # -- pointwise quantities -------------------------------------------------

    def covariance(self, t: float) -> np.ndarray:
        sig = np.atleast_2d(np.asarray(self.volatility(t), dtype=float))
        return sig @ sig.T

    def rho(self, t: float) -> float:
        """Squared market price of risk B (sigma sigma^T)^{-1} B^T at t."""
        self._check_time(t)
        B = np.atleast_1d(np.asarray(self.excess_return(t), dtype=float))
        cov = self.covariance(t)
        try:
            x = np.linalg.solve(cov, B)
        except np.linalg.LinAlgError:
            raise AssumptionError(
                f"(A2) violated: sigma(t) sigma(t)^T singular at t={t}") from None
        val = float(B @ x)
        if not math.isfinite(val):
            raise AssumptionError(f"(A2) violated: rho not finite at t={t}")
        return val

    def sharpe_row(self, t: float) -> np.ndarray:
        """Row vector B (sigma sigma^T)^{-1} sigma at t, shape (m,)."""
        B = np.atleast_1d(np.asarray(self.excess_return(t), dtype=float))
        sig = np.atleast_2d(np.asarray(self.volatility(t), dtype=float))
        return np.linalg.solve(sig @ sig.T, B) @ sig

    def hedge_vector(self, t: float) -> np.ndarray:
        """(sigma sigma^T)^{-1} B at t, shape (m,)."""
        B = np.atleast_1d(np.asarray(self.excess_return(t), dtype=float))
        return np.linalg.solve(self.covariance(t), B)

    # -- integrals ------------------------------------------------------------

    def int_r(self, a: float, b: float) -> float:
        return self.risk_free.integral(a, b)

    def int_rho(self, a: float, b: float) -> float:
        if self._all_constant():
            return self.rho(0.0) * (b - a)
        if self._all_piecewise():
            bp = self._merged_breakpoints()
            mids = 0.5 * (bp[:-1] + bp[1:])
            pieces = np.array([self.rho(tm) for tm in mids])
            return CoefficientCurve.piecewise(bp, pieces).integral(a, b)
        if b < a:
            raise DomainError("integral requires a <= b")
        return _simpson(np.vectorize(self.rho), a, b)

    def discount(self, t: float) -> float:
        """exp(-int_t^T r)."""
        return math.exp(-self.int_r(t, self.horizon))

    def _all_constant(self) -> bool:
        return all(c.constant is not None for c in
                   (self.risk_free, self.excess_return, self.volatility))

    def _all_piecewise(self) -> bool:
        return all(c.constant is not None or c.pieces is not None for c in
                   (self.risk_free, self.excess_return, self.volatility))

    def _merged_breakpoints(self) -> np.ndarray:
        pts = [np.array([0.0, self.horizon])]
        for c in (self.risk_free, self.excess_return, self.volatility):
            if c.breakpoints is not None:
                pts.append(c.breakpoints)
        return np.unique(np.concatenate(pts))

    def _check_time(self, t: float):
        if not (-1e-12 <= t <= self.horizon + 1e-12):
            raise DomainError(f"t={t} outside [0, {self.horizon}]")


@dataclass(frozen=True)
class BlackScholesParams:
    """Single-stock constant-coefficient market."""

    r: float
    b: float
    sigma: float
    horizon: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")
        if self.horizon <= 0:
            raise DomainError("horizon must be positive")

    @property
    def rho(self) -> float:
        return ((self.b - self.r) / self.sigma) ** 2

    def to_market_model(self) -> MarketModel:
        return MarketModel(
            horizon=self.horizon,
            risk_free=CoefficientCurve.from_constant(self.r),
            excess_return=CoefficientCurve.from_constant([self.b - self.r]),
            volatility=CoefficientCurve.from_constant([[self.sigma]]),
            asset_count=1,
        )


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------

GROWTH_FACTOR = "growth_factor"
WEALTH_TARGET = "wealth_target"
RISK_AVERSION = "risk_aversion"
CASE1_ALPHA = "case1_alpha"
CASE2_K = "case2_k"


@dataclass(frozen=True)
class TargetSpec:
    """An investment target in one of three equivalent representations.

    ``kind`` names the primary variant.  The two built-in cases
    (:func:`case1_target`, :func:`case2_target`) carry all three
    representations in closed form; user-supplied specs carry only the one
    they were constructed from.
    """

    kind: str
    f: Callable[[float, float], float] | None = None
    dfds: Callable[[float, float], float] | None = None  # d f(s, v) / d s
    L: Callable[[float, float], float] | None = None
    alpha: Callable[[float, float], float] | None = None
    params: dict = field(default_factory=dict)

    def growth_factor(self, u: float, v: float) -> float:
        if self.f is None:
            raise DomainError(f"target kind '{self.kind}' has no growth factor")
        return self.f(u, v)

    def wealth_target(self, s: float, y: float) -> float:
        if self.L is None:
            raise DomainError(f"target kind '{self.kind}' has no wealth target")
        return self.L(s, y)

    def risk_aversion(self, s: float, y: float) -> float:
        if self.alpha is None:
            raise DomainError(f"target kind '{self.kind}' has no risk aversion")
        return self.alpha(s, y)


def growth_factor_target(f: Callable[[float, float], float],
                         dfds: Callable[[float, float], float] | None = None) -> TargetSpec:
    return TargetSpec(kind=GROWTH_FACTOR, f=f, dfds=dfds)


def wealth_target_spec(L: Callable[[float, float], float]) -> TargetSpec:
    return TargetSpec(kind=WEALTH_TARGET, L=L)


def risk_aversion_target(alpha: Callable[[float, float], float]) -> TargetSpec:
    return TargetSpec(kind=RISK_AVERSION, alpha=alpha)


def case1_target(params: BlackScholesParams, alpha: float) -> TargetSpec:
    """Built-in target with risk aversion alpha(s, y) = alpha / y.

    Equivalently, growth factor
    f(s, T) = (1/alpha) [e^{(T-s) rho} - 1 + alpha e^{(T-s) r}].
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    r, rho, T = params.r, params.rho, params.horizon

    def f(u, v):
        tau = v - u
        return (math.exp(tau * rho) - 1.0 + alpha * math.exp(tau * r)) / alpha

    def dfds(u, v):
        tau = v - u
        return (-rho * math.exp(tau * rho) - alpha * r * math.exp(tau * r)) / alpha

    def L(s, y):
        return y * f(s, T)

    def alpha_fn(s, y):
        return alpha / y

    return TargetSpec(kind=CASE1_ALPHA, f=f, dfds=dfds, L=L, alpha=alpha_fn,
                      params={"alpha": alpha})


def case2_target(params: BlackScholesParams, k: float) -> TargetSpec:
    """Built-in target with wealth target L(s, y) = y e^{k (T-s)}, k > r.

    The equivalent risk aversion is alpha(s, y) = phi(s) / y with
    phi(s) = (e^{rho (T-s)} - 1) / (e^{k (T-s)} - e^{r (T-s)}).
    """
    r, rho, T = params.r, params.rho, params.horizon
    if k <= r:
        raise DomainError("k must exceed the risk-free rate r")

    def f(u, v):
        return math.exp(k * (v - u))

    def dfds(u, v):
        return -k * math.exp(k * (v - u))

    def L(s, y):
        return y * math.exp(k * (T - s))

    def phi(s):
        tau = T - s
        if tau < GAMMA_LIMIT_EPS * T:
            return rho / (k - r)
        return (math.exp(rho * tau) - 1.0) / (math.exp(k * tau) - math.exp(r * tau))

    def alpha_fn(s, y):
        return phi(s) / y

    return TargetSpec(kind=CASE2_K, f=f, dfds=dfds, L=L, alpha=alpha_fn,
                      params={"k": k, "phi": phi})


def risk_free_target(model: MarketModel) -> TargetSpec:
    """Growth target equal to the risk-free growth, f(u, v) = e^{int_u^v r}."""

    def f(u, v):
        return math.exp(model.int_r(u, v))

    def dfds(u, v):
        return -float(np.asarray(model.risk_free(u))) * f(u, v)

    return TargetSpec(kind=GROWTH_FACTOR, f=f, dfds=dfds)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def rho(model: MarketModel, t: float) -> float:
    """Squared market price of risk at t; strictly positive under (A2)."""
    return model.rho(t)


def gamma(model: MarketModel, target: TargetSpec, s: float) -> float:
    """Target wealth level of the mean-variance optimum anchored at s.

    gamma(s) = [f(s,T) - e^{int_s^T (r - rho)}] / [1 - e^{-int_s^T rho}].
    Both numerator and denominator vanish at s = T; within a relative window
    eps of T the limit is evaluated as the ratio of s-derivatives, using the
    closed-form d f/d s when the target provides one and a finite difference
    otherwise.
    """
    T = model.horizon
    if not (-1e-12 <= s <= T + 1e-12):
        raise DomainError(f"s={s} outside [0, {T}]")
    s = min(max(s, 0.0), T)
    if target.f is None:
        raise DomainError("gamma requires a growth-factor target")
    eps = GAMMA_LIMIT_EPS * T
    if T - s < eps:
        return _gamma_limit(model, target, s)
    int_r = model.int_r(s, T)
    int_rho = model.int_rho(s, T)
    num = target.f(s, T) - math.exp(int_r - int_rho)
    den = 1.0 - math.exp(-int_rho)
    return num / den


def _gamma_limit(model: MarketModel, target: TargetSpec, s: float) -> float:
    T = model.horizon
    if target.dfds is not None:
        dfds = target.dfds(s, T)
    else:
        h = GAMMA_LIMIT_EPS * T
        dfds = (target.f(T - h, T) - target.f(T - 2 * h, T)) / h
    r_s = float(np.asarray(model.risk_free(s)))
    rho_s = model.rho(s)
    int_r = model.int_r(s, T)
    int_rho = model.int_rho(s, T)
    num_d = dfds + (r_s - rho_s) * math.exp(int_r - int_rho)
    den_d = -rho_s * math.exp(-int_rho)
    return num_d / den_d


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    detail: str
    where: float | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[AssumptionCheck, ...]
    delta: float  # smallest eigenvalue of sigma sigma^T found on the grid

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            where = "" if c.where is None else f" at t={c.where:.6g}"
            lines.append(f"{status}  {c.name}: {c.detail}{where}")
        lines.append(f"delta (min eigenvalue of sigma sigma^T on grid): {self.delta:.6g}")
        return "\n".join(lines)


def validate_assumptions(model: MarketModel, target: TargetSpec | None = None,
                         grid_points: int = 1001) -> ValidationReport:
    """Check (A1) boundedness, (A2) non-degeneracy, (A3) target admissibility.

    Failures are report entries, never exceptions.  The grid is uniform with
    ``grid_points`` samples on [0, T]; (A3) additionally samples a coarser
    triangular (u, v) grid.
    """
    T = model.horizon
    ts = np.linspace(0.0, T, grid_points)
    checks: list[AssumptionCheck] = []

    # (A1): finiteness/boundedness of r, B, sigma on the grid.
    bad_t = None
    max_abs = 0.0
    for t in ts:
        vals = [np.asarray(model.risk_free(t), dtype=float),
                np.asarray(model.excess_return(t), dtype=float),
                np.asarray(model.volatility(t), dtype=float)]
        if any(not np.all(np.isfinite(v)) for v in vals):
            bad_t = float(t)
            break
        max_abs = max(max_abs, max(float(np.max(np.abs(v))) for v in vals))
    checks.append(AssumptionCheck(
        "(A1)", bad_t is None,
        f"coefficients finite on grid, max |value| = {max_abs:.6g}" if bad_t is None
        else "non-finite coefficient", bad_t))

    # (A2): B(t) != 0 and sigma sigma^T >= delta I.
    delta = math.inf
    bad_B = None
    bad_sig = None
    for t in ts:
        B = np.atleast_1d(np.asarray(model.excess_return(t), dtype=float))
        if np.allclose(B, 0.0) and bad_B is None:
            bad_B = float(t)
        eig_min = float(np.min(np.linalg.eigvalsh(model.covariance(t))))
        delta = min(delta, eig_min)
        if eig_min <= 0.0 and bad_sig is None:
            bad_sig = float(t)
    a2_ok = bad_B is None and bad_sig is None
    detail = f"B nonzero and min eig(sigma sigma^T) = {delta:.6g} > 0" if a2_ok else \
        ("B(t) = 0" if bad_B is not None else "sigma sigma^T not positive definite")
    checks.append(AssumptionCheck("(A2)", a2_ok, detail,
                                  bad_B if bad_B is not None else bad_sig))

    # rho > 0 everywhere (implied by (A2); reported separately for diagnosis).
    if a2_ok:
        rho_min = min(model.rho(t) for t in ts)
        checks.append(AssumptionCheck("rho>0", rho_min > 0,
                                      f"min rho on grid = {rho_min:.6g}",
                                      None))

    # (A3): target admissibility.
    if target is not None:
        checks.append(_check_a3(model, target, ts))

    return ValidationReport(tuple(checks), delta if math.isfinite(delta) else float("nan"))


def _check_a3(model: MarketModel, target: TargetSpec, ts: np.ndarray) -> AssumptionCheck:
    T = model.horizon
    if target.f is not None:
        # f(u, u) = 1 on the diagonal.
        for u in ts:
            if abs(target.f(u, u) - 1.0) > 1e-10:
                return AssumptionCheck("(A3)", False, "f(u, u) != 1", float(u))
        # f(u, v) >= e^{int_u^v r} on a coarser triangle.
        us = np.linspace(0.0, T, min(len(ts), 101))
        for u in us:
            for v in us[us >= u]:
                if target.f(u, v) < math.exp(model.int_r(u, v)) - 1e-12:
                    return AssumptionCheck(
                        "(A3)", False,
                        f"f({u:.4g}, {v:.4g}) below the risk-free growth", float(u))
        # finite slope at the terminal diagonal.
        h = GAMMA_LIMIT_EPS * T
        slope = (target.f(T - h, T) - target.f(T - 2 * h, T)) / h
        if not math.isfinite(slope):
            return AssumptionCheck("(A3)", False, "df/ds not finite at s=T", T)
        return AssumptionCheck("(A3)", True, "growth factor admissible", None)
    if target.alpha is not None:
        for s in ts:
            if target.alpha(s, 1.0) <= 0:
                return AssumptionCheck("(A3)", False, "alpha(s, 1) <= 0", float(s))
        return AssumptionCheck("(A3)", True, "risk aversion positive on grid", None)
    if target.L is not None:
        for s in ts:
            if target.L(s, 1.0) < math.exp(model.int_r(s, T)) - 1e-12:
                return AssumptionCheck(
                    "(A3)", False, "L(s, 1) below the risk-free growth", float(s))
        return AssumptionCheck("(A3)", True, "wealth target above risk-free growth", None)
    return AssumptionCheck("(A3)", False, "target has no representation to check", None)


def convert_target(spec: TargetSpec, model: MarketModel,
                   grid_points: int = 101) -> TargetSpec:
    """Convert a risk-aversion spec to the equivalent wealth-target spec or
    vice versa, so that both induce the same pre-committed policy.

    The conversion equates the anchored target levels
    (1/alpha(s,y)) e^{int rho} + y e^{int r}
    and (L(s,y) - y e^{int (r - rho)}) / (1 - e^{-int rho}).
    """
    T = model.horizon
    if spec.kind in (RISK_AVERSION, CASE1_ALPHA) or (
            spec.alpha is not None and spec.L is None):
        alpha_fn = spec.alpha
        ts = np.linspace(0.0, T * (1 - 1e-9), grid_points)
        for s in ts:
            if alpha_fn(s, 1.0) <= 0:
                raise DomainError(f"alpha(s, 1) <= 0 at s={s}")

        def L(s, y, _a=alpha_fn):
            P = model.int_rho(s, T)
            R = model.int_r(s, T)
            return ((1.0 - math.exp(-P)) *
                    (math.exp(P) / _a(s, y) + y * math.exp(R)) +
                    y * math.exp(R - P))

        return TargetSpec(kind=WEALTH_TARGET, L=L, params=dict(spec.params))
    if spec.kind in (WEALTH_TARGET, CASE2_K) or spec.L is not None:
        L_fn = spec.L

        def alpha_fn(s, y, _L=L_fn):
            P = model.int_rho(s, T)
            R = model.int_r(s, T)
            level = (_L(s, y) - y * math.exp(R - P)) / (1.0 - math.exp(-P))
            return math.exp(P) / (level - y * math.exp(R))

        return TargetSpec(kind=RISK_AVERSION, alpha=alpha_fn, params=dict(spec.params))
    raise DomainError(f"target kind '{spec.kind}' is not convertible")
