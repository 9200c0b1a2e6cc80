"""Run configuration: defaults, JSON parsing, and dotted-key overrides.

A single JSON document configures every command.  Unknown keys are
rejected so typos fail loudly instead of silently falling back to
defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Union

from .errors import InvalidConfig

BinRule = Union[str, int]  # "sqrt", "fd", or a fixed bin count


@dataclass(frozen=True)
class EstimatorConfig:
    bin_rule: BinRule = "sqrt"
    standardize: bool = False
    min_obs: int = 2

    def __post_init__(self):
        if isinstance(self.bin_rule, bool) or (
            isinstance(self.bin_rule, int) and self.bin_rule < 1
        ):
            raise InvalidConfig(f"fixed bin count must be >= 1, got {self.bin_rule}")
        if isinstance(self.bin_rule, str) and self.bin_rule not in ("sqrt", "fd"):
            raise InvalidConfig(f"unknown bin rule {self.bin_rule!r}")
        if self.min_obs < 2:
            raise InvalidConfig("min_obs must be >= 2")


@dataclass(frozen=True)
class ObvConfig:
    """Objective-value transform settings.

    mode "identity" passes raw statistics through; "obv" replaces them
    with the covariance and means of the normalized objective values.
    """

    mode: str = "obv"
    d: float = 1.0
    target: float = 1.0

    def __post_init__(self):
        if self.mode not in ("identity", "obv"):
            raise InvalidConfig(f"obv mode must be 'identity' or 'obv', got {self.mode!r}")
        if self.d <= 0:
            raise InvalidConfig("obv scale d must be positive")
        if self.target <= 0:
            raise InvalidConfig("obv normalization target must be positive")


@dataclass(frozen=True)
class AlphaConfig:
    """Temperature handling: fixed value or self-consistent calibration."""

    mode: str = "fixed"
    value: float = 0.0
    eta: float = 0.5
    tol: float = 1e-8
    max_iter: int = 500
    init: float = 0.0
    qr_tol: float = 1e-6
    solver: str = "damped"  # "damped" fixed point, or "bisection" fallback

    def __post_init__(self):
        if self.mode not in ("fixed", "self_consistent"):
            raise InvalidConfig(
                f"alpha mode must be 'fixed' or 'self_consistent', got {self.mode!r}"
            )
        if self.solver not in ("damped", "bisection"):
            raise InvalidConfig(
                f"alpha solver must be 'damped' or 'bisection', got {self.solver!r}"
            )
        if not 0.0 < self.eta <= 1.0:
            raise InvalidConfig("alpha damping eta must be in (0, 1]")
        if self.tol <= 0 or self.qr_tol <= 0:
            raise InvalidConfig("alpha tolerances must be positive")
        if self.max_iter < 1:
            raise InvalidConfig("alpha max_iter must be >= 1")


@dataclass(frozen=True)
class OptimizerConfig:
    m_c_annual: float = 0.20
    alpha: AlphaConfig = field(default_factory=AlphaConfig)
    market_weights: Any = "equal"  # "equal" or {"file": path}
    cond_bound: float = 1e12

    def __post_init__(self):
        if self.cond_bound <= 1:
            raise InvalidConfig("cond_bound must exceed 1")
        mw = self.market_weights
        if mw != "equal" and not (isinstance(mw, dict) and set(mw) == {"file"}):
            raise InvalidConfig(
                "market_weights must be 'equal' or {'file': <path>}, got " + repr(mw)
            )


@dataclass(frozen=True)
class BacktestConfig:
    window: int = 75
    rebalance_every: int = 1
    strategies: tuple = ("equal", "markowitz_ridge", "entropy_full")
    on_error: str = "abort"

    def __post_init__(self):
        if self.window < 2:
            raise InvalidConfig("backtest window must be >= 2")
        if self.rebalance_every < 1:
            raise InvalidConfig("rebalance_every must be >= 1")
        known = {"equal", "markowitz_ridge", "entropy_full"}
        bad = [s for s in self.strategies if s not in known]
        if bad:
            raise InvalidConfig(f"unknown strategies {bad}; choose from {sorted(known)}")
        if not self.strategies:
            raise InvalidConfig("at least one strategy required")
        if self.on_error not in ("abort", "skip_and_hold"):
            raise InvalidConfig("on_error must be 'abort' or 'skip_and_hold'")


@dataclass(frozen=True)
class RunConfig:
    periods_per_year: int = 252
    returns: str = "simple"
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    obv: ObvConfig = field(default_factory=ObvConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)
    sweep: Any = None  # {"alpha": [...]} or {"mc": [...]} when set

    def __post_init__(self):
        if self.periods_per_year < 1:
            raise InvalidConfig("periods_per_year must be >= 1")
        if self.returns not in ("simple", "log"):
            raise InvalidConfig("returns must be 'simple' or 'log'")
        if self.sweep is not None:
            if not isinstance(self.sweep, dict) or set(self.sweep) not in ({"alpha"}, {"mc"}):
                raise InvalidConfig("sweep must be {'alpha': grid} or {'mc': grid}")
            grid = next(iter(self.sweep.values()))
            if not isinstance(grid, (list, tuple)) or not grid:
                raise InvalidConfig("sweep grid must be a nonempty list")


_SECTIONS = {
    "estimator": EstimatorConfig,
    "obv": ObvConfig,
    "optimizer": OptimizerConfig,
    "backtest": BacktestConfig,
}


def _build(cls, data: dict, path: str):
    fields = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    unknown = set(data) - fields
    if unknown:
        raise InvalidConfig(f"unknown key(s) {sorted(unknown)} under '{path}'")
    kwargs = dict(data)
    if cls is OptimizerConfig and isinstance(kwargs.get("alpha"), dict):
        kwargs["alpha"] = _build(AlphaConfig, kwargs["alpha"], path + ".alpha")
    if cls is EstimatorConfig and isinstance(kwargs.get("bin_rule"), dict):
        rule = kwargs["bin_rule"]
        if set(rule) != {"fixed"}:
            raise InvalidConfig(f"bin_rule object must be {{'fixed': k}}, got {rule}")
        kwargs["bin_rule"] = int(rule["fixed"])
    if cls is BacktestConfig and isinstance(kwargs.get("strategies"), list):
        kwargs["strategies"] = tuple(kwargs["strategies"])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise InvalidConfig(f"bad value under '{path}': {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from a (possibly partial) plain dict."""
    if not isinstance(data, dict):
        raise InvalidConfig("config root must be a JSON object")
    unknown = set(data) - {f.name for f in RunConfig.__dataclass_fields__.values()}
    if unknown:
        raise InvalidConfig(f"unknown top-level config key(s) {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise InvalidConfig(f"config section '{key}' must be an object")
            kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InvalidConfig(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    """Materialize every default into a plain JSON-ready dict."""
    est = cfg.estimator
    bin_rule = {"fixed": est.bin_rule} if isinstance(est.bin_rule, int) else est.bin_rule
    out = {
        "periods_per_year": cfg.periods_per_year,
        "returns": cfg.returns,
        "estimator": {
            "bin_rule": bin_rule,
            "standardize": est.standardize,
            "min_obs": est.min_obs,
        },
        "obv": {"mode": cfg.obv.mode, "d": cfg.obv.d, "target": cfg.obv.target},
        "optimizer": {
            "m_c_annual": cfg.optimizer.m_c_annual,
            "alpha": {
                "mode": cfg.optimizer.alpha.mode,
                "value": cfg.optimizer.alpha.value,
                "eta": cfg.optimizer.alpha.eta,
                "tol": cfg.optimizer.alpha.tol,
                "max_iter": cfg.optimizer.alpha.max_iter,
                "init": cfg.optimizer.alpha.init,
                "qr_tol": cfg.optimizer.alpha.qr_tol,
                "solver": cfg.optimizer.alpha.solver,
            },
            "market_weights": cfg.optimizer.market_weights,
            "cond_bound": cfg.optimizer.cond_bound,
        },
        "backtest": {
            "window": cfg.backtest.window,
            "rebalance_every": cfg.backtest.rebalance_every,
            "strategies": list(cfg.backtest.strategies),
            "on_error": cfg.backtest.on_error,
        },
    }
    if cfg.sweep is not None:
        out["sweep"] = cfg.sweep
    return out


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply repeatable ``key.path=json_value`` overrides to a config dict.

    Values are parsed as JSON when possible, otherwise taken as strings,
    so ``--set obv.mode=obv`` and ``--set sweep.alpha=[0,0.1]`` both work.
    """
    out = json.loads(json.dumps(data))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise InvalidConfig(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise InvalidConfig(f"cannot descend into non-object at {part!r} in {dotted!r}")
        node[parts[-1]] = value
    return out
