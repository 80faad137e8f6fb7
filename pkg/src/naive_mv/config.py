"""Run-configuration files: flat `key = value` text with dotted keys.

Example::

    # single-stock market
    horizon       = 1.0
    risk_free     = 0.02
    drift         = 0.08
    volatility    = 0.2
    asset_count   = 1
    target.kind   = case1_alpha
    target.alpha  = 1.0
    seed          = 42
    paths         = 100000
    steps         = 4096
    initial_wealth = 1.0
    scheme        = euler

Vector markets use comma-separated ``drift`` entries and semicolon-separated
volatility rows, e.g. ``volatility = 0.2, 0.0; 0.05, 0.3``.  Unknown keys are
rejected with the offending line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .market import (BlackScholesParams, CASE1_ALPHA, CASE2_K, CoefficientCurve,
                     GROWTH_FACTOR, MarketModel, RISK_AVERSION, TargetSpec,
                     WEALTH_TARGET, case1_target, case2_target,
                     growth_factor_target, risk_aversion_target,
                     wealth_target_spec)
from .simulation import EULER, EXACT_LOG, SimConfig, TimeGrid

KNOWN_KEYS = {
    "horizon", "risk_free", "drift", "volatility", "asset_count",
    "target.kind", "target.alpha", "target.k", "target.rate",
    "seed", "paths", "steps", "initial_wealth", "scheme",
}

TARGET_KINDS = {CASE1_ALPHA, CASE2_K, GROWTH_FACTOR, WEALTH_TARGET, RISK_AVERSION}


@dataclass(frozen=True)
class RunConfig:
    model: MarketModel
    target: TargetSpec
    params: BlackScholesParams | None  # set when the market is single-stock constant
    seed: int
    paths: int
    steps: int
    initial_wealth: float
    scheme: str

    def sim_config(self, paths: int | None = None, steps: int | None = None,
                   seed: int | None = None, scheme: str | None = None) -> SimConfig:
        return SimConfig(
            grid=TimeGrid(0.0, self.model.horizon, steps or self.steps),
            n_paths=paths or self.paths,
            seed=self.seed if seed is None else seed,
            scheme=scheme or self.scheme,
            initial_wealth=self.initial_wealth,
        )


def parse_key_values(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", line=lineno)
        out[key] = value
    return out


def _get_float(kv: dict, key: str, default: float | None = None) -> float:
    if key not in kv:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(kv[key])
    except ValueError:
        raise ConfigError(f"key {key!r} must be a number, got {kv[key]!r}")


def _get_int(kv: dict, key: str, default: int | None = None) -> int:
    if key not in kv:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(kv[key])
    except ValueError:
        raise ConfigError(f"key {key!r} must be an integer, got {kv[key]!r}")


def _parse_vector(raw: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in raw.split(",")])
    except ValueError:
        raise ConfigError(f"could not parse vector {raw!r}")


def _parse_matrix(raw: str) -> np.ndarray:
    rows = [_parse_vector(row) for row in raw.split(";")]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError("volatility rows have unequal lengths")
    return np.vstack(rows)


def build_run_config(kv: dict[str, str]) -> RunConfig:
    horizon = _get_float(kv, "horizon")
    m = _get_int(kv, "asset_count", 1)
    r = _get_float(kv, "risk_free")
    if "drift" not in kv:
        raise ConfigError("missing required key 'drift'")
    if "volatility" not in kv:
        raise ConfigError("missing required key 'volatility'")
    drift = _parse_vector(kv["drift"])
    vol = _parse_matrix(kv["volatility"])
    if len(drift) != m or vol.shape != (m, m):
        raise ConfigError(
            f"drift/volatility shapes {len(drift)}/{vol.shape} do not match "
            f"asset_count {m}")

    params = None
    if m == 1:
        params = BlackScholesParams(r=r, b=float(drift[0]),
                                    sigma=float(vol[0, 0]), horizon=horizon)
        model = params.to_market_model()
    else:
        model = MarketModel(
            horizon=horizon,
            risk_free=CoefficientCurve.from_constant(r),
            excess_return=CoefficientCurve.from_constant(drift - r),
            volatility=CoefficientCurve.from_constant(vol),
            asset_count=m,
        )

    target = _build_target(kv, model, params, r, horizon)

    scheme = kv.get("scheme", EULER)
    if scheme not in (EULER, EXACT_LOG):
        raise ConfigError(f"scheme must be euler or exact_log, got {scheme!r}")
    return RunConfig(
        model=model,
        target=target,
        params=params,
        seed=_get_int(kv, "seed", 42),
        paths=_get_int(kv, "paths", 100_000),
        steps=_get_int(kv, "steps", 4096),
        initial_wealth=_get_float(kv, "initial_wealth", 1.0),
        scheme=scheme,
    )


def _build_target(kv, model, params, r, horizon) -> TargetSpec:
    kind = kv.get("target.kind", CASE1_ALPHA)
    if kind not in TARGET_KINDS:
        raise ConfigError(f"target.kind must be one of {sorted(TARGET_KINDS)}, "
                          f"got {kind!r}")
    if kind in (CASE1_ALPHA, CASE2_K) and params is None:
        raise ConfigError(f"target.kind {kind!r} requires a single-stock market")
    if kind == CASE1_ALPHA:
        return case1_target(params, _get_float(kv, "target.alpha", 1.0))
    if kind == CASE2_K:
        return case2_target(params, _get_float(kv, "target.k"))
    if kind == GROWTH_FACTOR:
        rate = _get_float(kv, "target.rate", r)
        return growth_factor_target(
            lambda u, v: math.exp(rate * (v - u)),
            lambda u, v: -rate * math.exp(rate * (v - u)))
    if kind == WEALTH_TARGET:
        k = _get_float(kv, "target.k")
        return wealth_target_spec(lambda s, y: y * math.exp(k * (horizon - s)))
    # risk_aversion: alpha(s, y) = alpha / y
    alpha = _get_float(kv, "target.alpha")
    if alpha <= 0:
        raise DomainError("target.alpha must be positive")
    return risk_aversion_target(lambda s, y: alpha / y)


def load_run_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    return build_run_config(parse_key_values(text))
