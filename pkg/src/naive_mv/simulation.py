"""Seeded Monte Carlo for wealth SDEs and the matching moment ODEs.

The engine simulates in fixed-size path chunks.  Each path owns a
counter-based random stream (see :mod:`naive_mv.rng`), and chunk results
are assembled in path order, so an ensemble is a deterministic function of
(seed, config, policy) regardless of the number of worker threads
(``NAIVE_MV_THREADS`` caps path-parallelism).

Two schemes: plain Euler-Maruyama, and an exact lognormal step for
policies linear in wealth with scalar noise (dX = a(t) X dt + v(t) X dW
stepped through the explicit solution with midpoint coefficients).

The dyadic re-commitment process re-anchors the pre-committed wealth SDE
at the times k T / 2^n while consuming the same Brownian increments as a
plain policy run with the same config, enabling common-driver comparisons.
"""

from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import rng
from .errors import AlignmentError, ConfigError, DomainError
from .market import MarketModel, TargetSpec, gamma
from .policies import Policy, PreCommittedPolicy

# Fixed chunk width: part of the determinism contract (sums are accumulated
# chunk by chunk in path order).
CHUNK_PATHS = 4096

EULER = "euler"
EXACT_LOG = "exact_log"

BINARY_MAGIC = b"NMVPATH1"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of n_steps steps on [start, end]."""

    start: float
    end: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise DomainError("n_steps must be >= 1")
        if self.end <= self.start:
            raise DomainError("end must exceed start")

    @property
    def step(self) -> float:
        return (self.end - self.start) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.start, self.end, self.n_steps + 1)

    def is_dyadic_aligned(self, n: int) -> bool:
        """True when every dyadic point k (end-start)/2^n lies on the grid."""
        return n >= 0 and 2 ** n <= self.n_steps and self.n_steps % (2 ** n) == 0


@dataclass(frozen=True)
class SimConfig:
    grid: TimeGrid
    n_paths: int
    seed: int
    scheme: str = EULER
    initial_wealth: float = 1.0

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError("n_paths must be >= 1")
        if self.scheme not in (EULER, EXACT_LOG):
            raise ConfigError(f"unknown scheme '{self.scheme}'")


@dataclass
class PathEnsemble:
    """Full wealth paths on a grid: paths[i, j] = X_i(t_j)."""

    grid: TimeGrid
    paths: np.ndarray  # (n_paths, n_times)
    seed: int

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def terminal(self) -> np.ndarray:
        return self.paths[:, -1]

    def mean_curve(self) -> np.ndarray:
        return self.paths.mean(axis=0)

    def second_moment_curve(self) -> np.ndarray:
        return np.mean(self.paths ** 2, axis=0)

    def variance_curve(self) -> np.ndarray:
        return self.paths.var(axis=0, ddof=1)

    def summary(self) -> "EnsembleSummary":
        return EnsembleSummary.from_moments(
            self.grid.times, self.paths.sum(axis=0),
            np.sum(self.paths ** 2, axis=0), self.n_paths,
            self.terminal().copy(), self.seed)

    def dump_binary(self, path) -> None:
        """Little-endian dump: 8-byte magic, uint64 n_times, uint64 n_paths,
        then float64 wealth values row-major (one path after another)."""
        n_paths, n_times = self.paths.shape
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(struct.pack("<QQ", n_times, n_paths))
            fh.write(np.ascontiguousarray(self.paths, dtype="<f8").tobytes())

    @staticmethod
    def load_binary(path, grid: TimeGrid, seed: int = 0) -> "PathEnsemble":
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != BINARY_MAGIC:
                raise ConfigError(f"bad magic {magic!r} in binary path dump")
            n_times, n_paths = struct.unpack("<QQ", fh.read(16))
            data = np.frombuffer(fh.read(), dtype="<f8").reshape(n_paths, n_times)
        return PathEnsemble(grid, data.astype(float), seed)


@dataclass
class EnsembleSummary:
    """Per-grid moments plus terminal values; memory-light alternative to
    storing full paths."""

    times: np.ndarray
    mean: np.ndarray
    second_moment: np.ndarray
    n_paths: int
    terminal: np.ndarray
    seed: int

    @staticmethod
    def from_moments(times, sum_x, sum_x2, n_paths, terminal, seed):
        mean = sum_x / n_paths
        second = sum_x2 / n_paths
        return EnsembleSummary(times, mean, second, n_paths, terminal, seed)

    @property
    def variance(self) -> np.ndarray:
        # unbiased, from raw moments
        n = self.n_paths
        return (self.second_moment - self.mean ** 2) * n / (n - 1)

    @property
    def stderr(self) -> np.ndarray:
        """Standard error of the mean curve."""
        return np.sqrt(np.maximum(self.variance, 0.0) / self.n_paths)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,mean,second_moment,variance,stderr\n")
            for t, m, s2, v, se in zip(self.times, self.mean, self.second_moment,
                                       self.variance, self.stderr):
                fh.write(f"{t:.12g},{m:.12g},{s2:.12g},{v:.12g},{se:.12g}\n")


# ---------------------------------------------------------------------------
# Chunk plumbing
# ---------------------------------------------------------------------------

def thread_count() -> int:
    raw = os.environ.get("NAIVE_MV_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"NAIVE_MV_THREADS must be an integer, got {raw!r}")


def chunk_ranges(n_paths: int) -> list[tuple[int, int]]:
    return [(s, min(CHUNK_PATHS, n_paths - s))
            for s in range(0, n_paths, CHUNK_PATHS)]


def iter_chunk_increments(config: SimConfig, m: int = 1) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (path_start, dZ) chunk by chunk; dZ has shape (count, N, m)."""
    for start, count in chunk_ranges(config.n_paths):
        yield start, rng.chunk_increments(config.seed, start, count,
                                          config.grid.n_steps, m)


def _map_chunks(worker: Callable[[int, np.ndarray], object],
                config: SimConfig, m: int) -> list:
    """Run worker(path_start, dZ) over all chunks; results in chunk order.

    Parallelism (threads) never changes results: chunk boundaries and
    per-path streams are fixed, and outputs are collected in chunk order.
    """
    ranges = chunk_ranges(config.n_paths)

    def task(arg):
        start, count = arg
        dZ = rng.chunk_increments(config.seed, start, count, config.grid.n_steps, m)
        return worker(start, dZ)

    workers = thread_count()
    if workers == 1 or len(ranges) == 1:
        return [task(r) for r in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, ranges))


# ---------------------------------------------------------------------------
# Steppers (vectorized across a chunk of paths)
# ---------------------------------------------------------------------------

def _euler_generic_chunk(policy: Policy, model: MarketModel, times: np.ndarray,
                         y: float, dZ: np.ndarray) -> np.ndarray:
    n_paths, n_steps, m = dZ.shape
    r_arr = np.array([float(np.asarray(model.risk_free(t))) for t in times[:-1]])
    B_arr = np.array([np.atleast_1d(np.asarray(model.excess_return(t), dtype=float))
                      for t in times[:-1]])
    S_arr = np.array([np.atleast_2d(np.asarray(model.volatility(t), dtype=float))
                      for t in times[:-1]])
    X = np.full(n_paths, float(y))
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = X
    for i in range(n_steps):
        h = times[i + 1] - times[i]
        pi = policy.portfolio(times[i], X)          # (m, P)
        drift = r_arr[i] * X + B_arr[i] @ pi
        vol = S_arr[i].T @ pi                        # (m, P): (pi^T sigma)^T
        X = X + drift * h + math.sqrt(h) * np.einsum("jp,pj->p", vol, dZ[:, i, :])
        out[:, i + 1] = X
    return out


def _linear_coeff_arrays(policy: Policy, times: np.ndarray,
                         midpoint: bool) -> tuple[np.ndarray, np.ndarray]:
    pts = 0.5 * (times[:-1] + times[1:]) if midpoint else times[:-1]
    a = np.empty(len(pts))
    v = np.empty(len(pts))
    for i, t in enumerate(pts):
        a[i], v[i] = policy.drift_vol(float(t))
    return a, v


def _euler_linear_chunk(a: np.ndarray, v: np.ndarray, times: np.ndarray,
                        y: float, dZ: np.ndarray) -> np.ndarray:
    n_paths, n_steps, _ = dZ.shape
    X = np.full(n_paths, float(y))
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = X
    for i in range(n_steps):
        h = times[i + 1] - times[i]
        X = X * (1.0 + a[i] * h + v[i] * math.sqrt(h) * dZ[:, i, 0])
        out[:, i + 1] = X
    return out


def _exact_log_chunk(a_mid: np.ndarray, v_mid: np.ndarray, times: np.ndarray,
                     y: float, dZ: np.ndarray) -> np.ndarray:
    n_paths, n_steps, _ = dZ.shape
    X = np.full(n_paths, float(y))
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = X
    for i in range(n_steps):
        h = times[i + 1] - times[i]
        X = X * np.exp((a_mid[i] - 0.5 * v_mid[i] ** 2) * h
                       + v_mid[i] * math.sqrt(h) * dZ[:, i, 0])
        out[:, i + 1] = X
    return out


@dataclass(frozen=True)
class AffineCoeffs:
    """Per-step coefficients of the re-anchored pre-committed wealth SDE

        dX = [A(t) X + g C(t) Z] dt + sum_j [-F_j(t) X + g D_j(t) Z] dW_j

    where Z is the wealth frozen at the current anchor and g the anchored
    target level."""

    A: np.ndarray   # (N,)
    C: np.ndarray   # (N,)
    F: np.ndarray   # (N, m)
    D: np.ndarray   # (N, m)


def affine_coefficients(model: MarketModel, times: np.ndarray) -> AffineCoeffs:
    N = len(times) - 1
    m = model.asset_count
    A = np.empty(N)
    C = np.empty(N)
    F = np.empty((N, m))
    D = np.empty((N, m))
    for i, t in enumerate(times[:-1]):
        t = float(t)
        r = float(np.asarray(model.risk_free(t)))
        rho_t = model.rho(t)
        disc = model.discount(t)
        A[i] = r - rho_t
        C[i] = rho_t * disc
        F[i] = model.sharpe_row(t)
        D[i] = F[i] * disc
    return AffineCoeffs(A, C, F, D)


def _affine_chunk(coeffs: AffineCoeffs, gam_steps: np.ndarray,
                  refresh: np.ndarray, times: np.ndarray, y: float,
                  dZ: np.ndarray, anchor_value: float | None = None) -> np.ndarray:
    """Euler steps of the anchored affine SDE.

    ``refresh[i]`` True re-anchors Z to the current wealth before step i;
    with no refresh and anchor_value fixed this is the pre-committed SDE.
    """
    n_paths, n_steps, m = dZ.shape
    X = np.full(n_paths, float(y))
    Z = np.full(n_paths, float(y if anchor_value is None else anchor_value))
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = X
    for i in range(n_steps):
        if refresh[i]:
            Z = X.copy()
        h = times[i + 1] - times[i]
        g = gam_steps[i]
        drift = coeffs.A[i] * X + g * coeffs.C[i] * Z
        # diffusion row: -F X + g D Z, contracted against dW
        noise = (np.multiply.outer(-X, coeffs.F[i])
                 + np.multiply.outer(g * Z, coeffs.D[i]))
        X = X + drift * h + math.sqrt(h) * np.einsum("pj,pj->p", noise, dZ[:, i, :])
        out[:, i + 1] = X
    return out


def simulate_chunk(policy: Policy, model: MarketModel, s: float, y: float,
                   config: SimConfig, dZ: np.ndarray,
                   _cache: dict | None = None) -> np.ndarray:
    """Simulate one chunk of paths under a policy; X(s) = y.

    Scheme dispatch: exact_log needs a linear policy with scalar noise;
    Euler uses a specialized affine stepper for the pre-committed policy and
    a linear stepper for weight policies, falling back to the generic one.
    """
    times = config.grid.times
    cache = _cache if _cache is not None else {}
    if config.scheme == EXACT_LOG:
        if not policy.is_linear:
            raise ConfigError(
                "exact_log scheme requires a policy linear in wealth")
        if "exact" not in cache:
            cache["exact"] = _linear_coeff_arrays(policy, times, midpoint=True)
        a, v = cache["exact"]
        return _exact_log_chunk(a, v, times, y, dZ)
    if isinstance(policy, PreCommittedPolicy):
        if "affine" not in cache:
            cache["affine"] = affine_coefficients(model, times)
        coeffs = cache["affine"]
        n_steps = config.grid.n_steps
        gam_steps = np.full(n_steps, policy.gamma_s)
        refresh = np.zeros(n_steps, dtype=bool)
        return _affine_chunk(coeffs, gam_steps, refresh, times, y, dZ,
                             anchor_value=policy.y)
    if policy.is_linear and model.asset_count == 1:
        if "linear" not in cache:
            cache["linear"] = _linear_coeff_arrays(policy, times, midpoint=False)
        a, v = cache["linear"]
        return _euler_linear_chunk(a, v, times, y, dZ)
    return _euler_generic_chunk(policy, model, times, y, dZ)


# ---------------------------------------------------------------------------
# Ensemble-level operations
# ---------------------------------------------------------------------------

def simulate_policy_paths(policy: Policy, model: MarketModel, s: float,
                          y: float, config: SimConfig) -> PathEnsemble:
    """Full-path ensemble under a policy.  Memory is n_paths x (n_steps+1)
    doubles; large experiments should use :func:`simulate_policy_summary`."""
    if abs(config.grid.start - s) > 1e-12:
        raise ConfigError("config grid must start at the initial time s")
    cache: dict = {}
    chunks = _map_chunks(
        lambda start, dZ: simulate_chunk(policy, model, s, y, config, dZ, cache),
        config, model.asset_count)
    return PathEnsemble(config.grid, np.vstack(chunks), config.seed)


def simulate_policy_summary(policy: Policy, model: MarketModel, s: float,
                            y: float, config: SimConfig) -> EnsembleSummary:
    """Streaming counterpart of :func:`simulate_policy_paths`: identical
    numerics, but only per-grid moments and terminal values are kept."""
    if abs(config.grid.start - s) > 1e-12:
        raise ConfigError("config grid must start at the initial time s")
    cache: dict = {}

    def worker(start, dZ):
        paths = simulate_chunk(policy, model, s, y, config, dZ, cache)
        return paths.sum(axis=0), np.sum(paths ** 2, axis=0), paths[:, -1].copy()

    results = _map_chunks(worker, config, model.asset_count)
    n_times = config.grid.n_steps + 1
    sum_x = np.zeros(n_times)
    sum_x2 = np.zeros(n_times)
    terminal = np.empty(config.n_paths)
    pos = 0
    for sx, sx2, term in results:
        sum_x += sx
        sum_x2 += sx2
        terminal[pos:pos + len(term)] = term
        pos += len(term)
    return EnsembleSummary.from_moments(config.grid.times, sum_x, sum_x2,
                                        config.n_paths, terminal, config.seed)


def committed_gammas(model: MarketModel, target: TargetSpec, n: int) -> np.ndarray:
    """Anchored target levels at the dyadic times k T / 2^n, k = 0..2^n - 1."""
    T = model.horizon
    return np.array([gamma(model, target, k * T / 2 ** n) for k in range(2 ** n)])


def committed_step_layout(config: SimConfig, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-step anchor levels and refresh flags for the 2^-n re-commitment."""
    if abs(config.grid.start) > 1e-12:
        raise AlignmentError("dyadic experiments must start at t = 0")
    if not config.grid.is_dyadic_aligned(n):
        raise AlignmentError(
            f"grid with {config.grid.n_steps} steps is not aligned to 2^{n} "
            "dyadic intervals (need n_steps a multiple of 2^n and 2^n <= n_steps)")
    spi = config.grid.n_steps // 2 ** n  # steps per dyadic interval
    refresh = np.zeros(config.grid.n_steps, dtype=bool)
    refresh[spi::spi] = True
    return spi, refresh


def simulate_committed_chunk(model: MarketModel, target: TargetSpec, n: int,
                             config: SimConfig, dZ: np.ndarray,
                             _cache: dict | None = None) -> np.ndarray:
    """One chunk of the 2^-n re-committed wealth process (Euler steps).

    Consumes the increments dZ exactly as a plain policy run would,
    enabling common-driver coupling against a policy simulation.
    """
    cache = _cache if _cache is not None else {}
    if "affine" not in cache:
        cache["affine"] = affine_coefficients(model, config.grid.times)
    if ("gam", n) not in cache:
        spi, refresh = committed_step_layout(config, n)
        gam = np.repeat(committed_gammas(model, target, n), spi)
        cache[("gam", n)] = (gam, refresh)
    gam, refresh = cache[("gam", n)]
    return _affine_chunk(cache["affine"], gam, refresh, config.grid.times,
                         config.initial_wealth, dZ)


def simulate_committed_2n(n: int, model: MarketModel, target: TargetSpec,
                          config: SimConfig) -> PathEnsemble:
    """Full-path ensemble of the 2^-n re-committed wealth process."""
    cache: dict = {}
    chunks = _map_chunks(
        lambda start, dZ: simulate_committed_chunk(model, target, n, config, dZ, cache),
        config, model.asset_count)
    return PathEnsemble(config.grid, np.vstack(chunks), config.seed)


# ---------------------------------------------------------------------------
# Moment ODEs
# ---------------------------------------------------------------------------

def _rk4(fn, y0: np.ndarray, times: np.ndarray) -> np.ndarray:
    y = np.asarray(y0, dtype=float)
    out = np.empty((len(times), len(y)))
    out[0] = y
    for i in range(len(times) - 1):
        t, h = times[i], times[i + 1] - times[i]
        k1 = fn(t, y)
        k2 = fn(t + h / 2, y + h / 2 * k1)
        k3 = fn(t + h / 2, y + h / 2 * k2)
        k4 = fn(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = y
    return out


def _linear_moment_coeffs(policy: Policy, model: MarketModel,
                          t: float) -> tuple[float, float]:
    """Drift a(t) and squared vol v2(t) of a linear policy's wealth SDE."""
    from .policies import NaivePolicy  # local import to avoid a cycle
    if isinstance(policy, NaivePolicy) and model.asset_count > 1:
        r = float(np.asarray(model.risk_free(t)))
        rho_t = model.rho(t)
        g = gamma(model, policy.target, t)
        d = model.discount(t)
        lever = 1.0 - g * d
        return r - rho_t * lever, rho_t * lever ** 2
    a, v = policy.drift_vol(t)
    return a, v * v


def moment_odes(policy: Policy, model: MarketModel, s: float, y: float,
                times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve the deterministic ODEs for E[X(t)] and E[X(t)^2] on ``times``.

    Supported: policies linear in wealth, and the pre-committed (affine)
    policy.  Returns (mean curve, second-moment curve).
    """
    times = np.asarray(times, dtype=float)
    if isinstance(policy, PreCommittedPolicy):
        g, y0 = policy.gamma_s, policy.y

        def fn(t, state):
            E, M = state
            r = float(np.asarray(model.risk_free(t)))
            rho_t = model.rho(t)
            d = model.discount(t)
            A = r - rho_t
            q = g * rho_t * d * y0           # drift inhomogeneity
            fp = g * rho_t * d * y0          # F . p with p = g D y0
            p2 = g * g * rho_t * d * d * y0 * y0
            return np.array([A * E + q,
                             (2 * A + rho_t) * M + 2 * (q - fp) * E + p2])

        out = _rk4(fn, np.array([y, y * y]), times)
        return out[:, 0], out[:, 1]
    if policy.is_linear:
        def fn(t, state):
            E, M = state
            a, v2 = _linear_moment_coeffs(policy, model, t)
            return np.array([a * E, (2 * a + v2) * M])

        out = _rk4(fn, np.array([y, y * y]), times)
        return out[:, 0], out[:, 1]
    raise DomainError(
        f"moment ODEs unsupported for policy kind '{policy.kind}'")


def mean_ode(policy: Policy, model: MarketModel, s: float, y: float,
             times: np.ndarray) -> np.ndarray:
    return moment_odes(policy, model, s, y, times)[0]


def second_moment_ode(policy: Policy, model: MarketModel, s: float, y: float,
                      times: np.ndarray) -> np.ndarray:
    return moment_odes(policy, model, s, y, times)[1]


def bound_curve_Y(model: MarketModel, target: TargetSpec, times: np.ndarray,
                  initial_wealth: float = 1.0) -> np.ndarray:
    """Deterministic envelope Y(t) dominating the second moment of every
    re-committed wealth process:

        dY = [R* + (g*)^2 e^{-2 int_t^T r} rho(t)] Y dt,   Y(0) = x0^2

    with R* = max |2r - rho| and g* = max gamma over the grid.  The initial
    value is the squared initial wealth so that Y(0) >= E[X(0)^2].
    """
    times = np.asarray(times, dtype=float)
    if target.f is None:
        raise DomainError("bound curve requires a growth-factor target")
    r_vals = np.array([float(np.asarray(model.risk_free(t))) for t in times])
    rho_vals = np.array([model.rho(float(t)) for t in times])
    R_star = float(np.max(np.abs(2 * r_vals - rho_vals)))
    g_star = max(gamma(model, target, float(t)) for t in times)

    def fn(t, state):
        rate = R_star + g_star ** 2 * model.discount(t) ** 2 * model.rho(float(t))
        return rate * state

    return _rk4(fn, np.array([initial_wealth ** 2]), times)[:, 0]
