"""Rolling-window backtests and parameter sweeps.

Walks a return panel one period at a time: at each rebalance the
strategies re-estimate statistics on the trailing window (strictly
before the evaluated period — no lookahead), solve for weights, and the
portfolio value compounds with the realized next-period return.  All
strategies share windows and data so their value curves are directly
comparable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .config import AlphaConfig, RunConfig, config_to_dict
from .errors import (
    DomainError,
    EntroportError,
    InsufficientData,
    InvalidConfig,
    NoConvergence,
)
from .estimators import AssetStats, estimate_stats
from .market_data import ReturnSeries
from .objective_value import ObjectiveView, build_view
from .optimizer import OptimizerProblem, quality_ratio, solve_alpha, solve_weights

SOLVING_STRATEGIES = ("markowitz_ridge", "entropy_full")


@dataclass(frozen=True)
class StrategyResult:
    """One strategy's full evaluation timeline.

    ``weights[s]`` is the portfolio held while return row ``start_period
    + s`` realizes; diagnostics (``alpha``, ``qr``, ``qr_market``,
    ``converged``) are aligned with the report's rebalance steps and are
    NaN for strategies that do not solve (equal weights).
    """

    name: str
    weights: np.ndarray
    period_returns: np.ndarray
    value_curve: np.ndarray
    realized_annual_profit: float
    qr_series: Tuple[float, ...]
    alpha_series: Tuple[float, ...]
    qr_market_series: Tuple[float, ...]
    converged_series: Tuple[bool, ...]
    failed_steps: Tuple[int, ...]


@dataclass(frozen=True)
class BacktestReport:
    strategies: Tuple[StrategyResult, ...]
    window: int
    rebalance_every: int
    start_period: int
    rebalance_steps: Tuple[int, ...]
    config_hash: str
    data_fingerprint: str
    seed: Optional[int] = None

    def result(self, name: str) -> StrategyResult:
        for res in self.strategies:
            if res.name == name:
                return res
        raise KeyError(name)


def annualize(per_period_profit: float, periods_per_year: int) -> float:
    """Compound a per-period profit rate into its annual equivalent."""
    if periods_per_year <= 0:
        raise DomainError("periods_per_year must be positive")
    if per_period_profit <= -1:
        raise DomainError("per-period profit must exceed -1 to compound")
    return (1.0 + per_period_profit) ** periods_per_year - 1.0


def fingerprint_returns(series: ReturnSeries) -> str:
    """Content hash of a return panel (ids, layout, and values)."""
    digest = hashlib.sha256()
    digest.update(",".join(series.asset_ids).encode())
    digest.update(str(series.periods_per_year).encode())
    digest.update(str(series.returns.shape).encode())
    digest.update(np.ascontiguousarray(series.returns, dtype=float).tobytes())
    return digest.hexdigest()


def hash_config(config: RunConfig) -> str:
    payload = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _equal_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


class _WindowContext:
    """Shared per-rebalance estimation state (paired evaluation)."""

    def __init__(self, stats: AssetStats, view: ObjectiveView):
        self.stats = stats
        self.view = view


def _solve_for(
    strategy: str,
    ctx: _WindowContext,
    config: RunConfig,
    market_weights: np.ndarray,
    m_c: Optional[float],
) -> tuple[np.ndarray, float, float, float, bool]:
    """Solve one strategy on one window.

    Returns (weights, alpha, qr, qr_market, converged).  The ridge
    strategy is the identical pipeline with every entropy replaced by 1,
    so it coincides with the full strategy exactly when the estimated
    entropies are all 1.
    """
    if strategy == "markowitz_ridge":
        entropies = np.ones(len(ctx.stats.mean))
    else:
        entropies = ctx.stats.entropy
    problem = OptimizerProblem(
        cov=ctx.stats.covariance,
        means=ctx.stats.mean,
        entropies=entropies,
        m_c=m_c,
        market_weights=market_weights,
        view=ctx.view,
        cond_bound=config.optimizer.cond_bound,
    )
    alpha_cfg = config.optimizer.alpha
    if alpha_cfg.mode == "fixed":
        port = solve_weights(problem, alpha_cfg.value)
        qr_market = quality_ratio(
            market_weights, port.beta, ctx.view, port.alpha, entropies
        )
        return port.weights, port.alpha, port.qr, qr_market, True
    port, report = solve_alpha(problem, alpha_cfg)
    return port.weights, report.alpha, port.qr, report.trace[-1][2], report.converged


def _annotate(exc: EntroportError, period: int) -> EntroportError:
    message = f"window ending at period {period}: {exc}"
    if isinstance(exc, NoConvergence):
        return NoConvergence(message, trace=exc.trace)
    return type(exc)(message)


def run_backtest(
    series: ReturnSeries,
    config: Optional[RunConfig] = None,
    market_weights: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
) -> BacktestReport:
    """Evaluate the configured strategies over a rolling window.

    At evaluation step ``s`` (return row ``t = window + s``) weights come
    from statistics of rows ``[t - window, t)`` only, are held until the
    next rebalance, and the value curve compounds as
    ``V[s+1] = V[s] * (1 + weights @ returns[t])`` starting from 1.

    Failure policy: ``on_error="abort"`` re-raises the first estimation
    or solver error annotated with the offending period;
    ``"skip_and_hold"`` records the step and keeps the previous weights
    (equal weights before the first success).
    """
    config = config or RunConfig()
    bt = config.backtest
    n_assets = series.n_assets
    if bt.window < n_assets + 2:
        raise InvalidConfig(
            f"window {bt.window} is too short for {n_assets} assets; "
            f"need at least {n_assets + 2} periods for a full-rank covariance"
        )
    if series.n_periods <= bt.window + 1:
        raise InsufficientData(
            f"need more than {bt.window + 1} periods, got {series.n_periods}"
        )
    if market_weights is None:
        market_weights = _equal_weights(n_assets)
    market_weights = np.asarray(market_weights, dtype=float)
    m_c = (
        None
        if config.optimizer.m_c_annual is None
        else config.optimizer.m_c_annual / config.periods_per_year
    )

    n_steps = series.n_periods - bt.window
    needs_stats = any(s in SOLVING_STRATEGIES for s in bt.strategies)
    rebalance_steps: list[int] = []

    held = {name: None for name in bt.strategies}
    weights_out = {name: np.empty((n_steps, n_assets)) for name in bt.strategies}
    returns_out = {name: np.empty(n_steps) for name in bt.strategies}
    diags = {name: {"qr": [], "alpha": [], "qr_market": [], "converged": [],
                    "failed": []} for name in bt.strategies}

    # Single asset: both constraints force the whole budget onto it, so
    # skip the solver and let every strategy hold the asset outright.
    single_asset = n_assets == 1

    for s in range(n_steps):
        t = bt.window + s
        if s % bt.rebalance_every == 0:
            rebalance_steps.append(s)
            ctx = None
            ctx_error: Optional[EntroportError] = None
            if needs_stats and not single_asset:
                window_series = ReturnSeries(
                    series.asset_ids,
                    series.returns[s:t],
                    series.periods_per_year,
                )
                try:
                    stats = estimate_stats(window_series, config.estimator)
                    view = build_view(
                        window_series, stats, config.obv, config.estimator.bin_rule
                    )
                    ctx = _WindowContext(stats, view)
                except EntroportError as exc:
                    if bt.on_error == "abort":
                        raise _annotate(exc, t) from exc
                    ctx_error = exc
            for name in bt.strategies:
                d = diags[name]
                if name == "equal" or single_asset:
                    held[name] = _equal_weights(n_assets)
                    d["qr"].append(math.nan)
                    d["alpha"].append(math.nan)
                    d["qr_market"].append(math.nan)
                    d["converged"].append(True)
                    continue
                try:
                    if ctx is None:
                        raise ctx_error  # estimation already failed
                    w, alpha, qr, qr_market, conv = _solve_for(
                        name, ctx, config, market_weights, m_c
                    )
                except EntroportError as exc:
                    if bt.on_error == "abort":
                        raise _annotate(exc, t) from exc
                    if held[name] is None:
                        held[name] = _equal_weights(n_assets)
                    d["failed"].append(s)
                    d["qr"].append(math.nan)
                    d["alpha"].append(math.nan)
                    d["qr_market"].append(math.nan)
                    d["converged"].append(False)
                else:
                    held[name] = w
                    d["qr"].append(qr)
                    d["alpha"].append(alpha)
                    d["qr_market"].append(qr_market)
                    d["converged"].append(conv)
        realized = series.returns[t]
        for name in bt.strategies:
            weights_out[name][s] = held[name]
            returns_out[name][s] = float(held[name] @ realized)

    results = []
    for name in bt.strategies:
        rets = returns_out[name]
        curve = np.empty(n_steps + 1)
        curve[0] = 1.0
        np.cumprod(1.0 + rets, out=curve[1:])
        final = curve[-1]
        if final > 0:
            profit = final ** (config.periods_per_year / n_steps) - 1.0
        else:
            profit = math.nan  # portfolio wiped out; annualization undefined
        d = diags[name]
        results.append(
            StrategyResult(
                name=name,
                weights=weights_out[name],
                period_returns=rets,
                value_curve=curve,
                realized_annual_profit=profit,
                qr_series=tuple(d["qr"]),
                alpha_series=tuple(d["alpha"]),
                qr_market_series=tuple(d["qr_market"]),
                converged_series=tuple(d["converged"]),
                failed_steps=tuple(d["failed"]),
            )
        )
    return BacktestReport(
        strategies=tuple(results),
        window=bt.window,
        rebalance_every=bt.rebalance_every,
        start_period=bt.window,
        rebalance_steps=tuple(rebalance_steps),
        config_hash=hash_config(config),
        data_fingerprint=fingerprint_returns(series),
        seed=seed,
    )


@dataclass(frozen=True)
class SweepTable:
    """Plot-ready table: one row per grid point, None marks a gap."""

    columns: Tuple[str, ...]
    rows: Tuple[tuple, ...]


ALPHA_SWEEP_COLUMNS = (
    "alpha",
    "mean_profit",
    "profit_variance",
    "realized_annual_profit",
    "mean_qr",
)
MC_SWEEP_COLUMNS = ("m_c_annual", "realized_annual_profit", "profit_variance")


def _entropy_only(config: RunConfig) -> RunConfig:
    return replace(config, backtest=replace(config.backtest,
                                            strategies=("entropy_full",)))


def sweep_alpha(
    series: ReturnSeries,
    config: Optional[RunConfig] = None,
    alphas=(),
    market_weights: Optional[np.ndarray] = None,
) -> SweepTable:
    """Backtest the full-entropy strategy once per fixed temperature.

    Each grid point forces the temperature to that fixed value; a point
    whose backtest fails outright contributes a gap row rather than
    aborting the sweep.  Row order follows the grid.
    """
    config = config or RunConfig()
    if len(alphas) == 0:
        raise InvalidConfig("temperature grid must be nonempty")
    rows = []
    for alpha in alphas:
        alpha = float(alpha)
        point = _entropy_only(config)
        point = replace(
            point,
            optimizer=replace(
                point.optimizer,
                alpha=replace(point.optimizer.alpha, mode="fixed", value=alpha),
            ),
        )
        try:
            report = run_backtest(series, point, market_weights)
        except EntroportError:
            rows.append((alpha, None, None, None, None))
            continue
        res = report.result("entropy_full")
        qr = np.asarray(res.qr_series, dtype=float)
        valid = qr[np.isfinite(qr)]
        rows.append(
            (
                alpha,
                float(res.period_returns.mean()),
                float(res.period_returns.var(ddof=1)),
                res.realized_annual_profit,
                float(valid.mean()) if len(valid) else None,
            )
        )
    return SweepTable(ALPHA_SWEEP_COLUMNS, tuple(rows))


def sweep_mc(
    series: ReturnSeries,
    config: Optional[RunConfig] = None,
    mc_grid=(),
    market_weights: Optional[np.ndarray] = None,
) -> SweepTable:
    """Backtest the full-entropy strategy once per annual return target."""
    config = config or RunConfig()
    if len(mc_grid) == 0:
        raise InvalidConfig("return-target grid must be nonempty")
    rows = []
    for m_c in mc_grid:
        m_c = float(m_c)
        point = _entropy_only(config)
        point = replace(point, optimizer=replace(point.optimizer, m_c_annual=m_c))
        try:
            report = run_backtest(series, point, market_weights)
        except EntroportError:
            rows.append((m_c, None, None))
            continue
        res = report.result("entropy_full")
        rows.append(
            (
                m_c,
                res.realized_annual_profit,
                float(res.period_returns.var(ddof=1)),
            )
        )
    return SweepTable(MC_SWEEP_COLUMNS, tuple(rows))
