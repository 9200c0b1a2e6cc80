"""Command handlers shared by the HTTP endpoints and the CLI.

Each handler is a pure function from a request model to a response
model; the CLI calls them in-process and the FastAPI app exposes them
over HTTP, so both front ends produce identical results.
"""

from __future__ import annotations

import math
from typing import Iterable, List, Optional

import numpy as np

from ..backtest import BacktestReport, run_backtest, sweep_alpha, sweep_mc
from ..config import RunConfig, config_from_dict
from ..errors import InvalidConfig
from ..estimators import estimate_stats
from ..market_data import (
    ReturnSeries,
    generate_synthetic,
    parse_prices,
    prices_from_returns,
    serialize_prices,
    synthetic_spec_from_dict,
    to_returns,
)
from ..objective_value import build_view
from ..optimizer import OptimizerProblem, quality_ratio, solve_alpha, solve_weights
from .models import (
    AlphaReportModel,
    BacktestRequest,
    BacktestResponse,
    OptimizeRequest,
    OptimizeResponse,
    StatsRequest,
    StatsResponse,
    StrategyResultModel,
    SweepRequest,
    SweepResponse,
    SynthRequest,
    SynthResponse,
)


def _load_series(prices_csv: str, config: dict) -> tuple[RunConfig, ReturnSeries]:
    cfg = config_from_dict(config)
    prices = parse_prices(prices_csv)
    series = to_returns(prices, cfg.periods_per_year, cfg.returns)
    return cfg, series


def _market_weights(
    cfg: RunConfig, provided: Optional[List[float]], n_assets: int
) -> Optional[np.ndarray]:
    if provided is not None:
        arr = np.asarray(provided, dtype=float)
        if len(arr) != n_assets:
            raise InvalidConfig(
                f"market weights have {len(arr)} entries for {n_assets} assets"
            )
        return arr
    if cfg.optimizer.market_weights == "equal":
        return None  # downstream defaults to equal weights
    raise InvalidConfig(
        "config requests market weights from a file; the client must load "
        "the file and send the values with the request"
    )


def _nan_to_none(values: Iterable[float]) -> List[Optional[float]]:
    return [None if (isinstance(v, float) and math.isnan(v)) else float(v)
            for v in values]


def handle_stats(request: StatsRequest) -> StatsResponse:
    cfg, series = _load_series(request.prices_csv, request.config)
    stats = estimate_stats(series, cfg.estimator)
    return StatsResponse(
        asset_ids=list(series.asset_ids),
        means=[float(x) for x in stats.mean],
        variances=[float(x) for x in stats.variance],
        entropies=[float(x) for x in stats.entropy],
        covariance=[[float(x) for x in row] for row in stats.covariance],
        n_obs=stats.n_obs,
    )


def handle_optimize(request: OptimizeRequest) -> OptimizeResponse:
    cfg, series = _load_series(request.prices_csv, request.config)
    stats = estimate_stats(series, cfg.estimator)
    view = build_view(series, stats, cfg.obv, cfg.estimator.bin_rule)
    pm = _market_weights(cfg, request.market_weights, series.n_assets)
    if pm is None:
        pm = np.full(series.n_assets, 1.0 / series.n_assets)
    m_c = (
        None
        if cfg.optimizer.m_c_annual is None
        else cfg.optimizer.m_c_annual / cfg.periods_per_year
    )
    problem = OptimizerProblem(
        cov=stats.covariance,
        means=stats.mean,
        entropies=stats.entropy,
        m_c=m_c,
        market_weights=pm,
        view=view,
        cond_bound=cfg.optimizer.cond_bound,
    )
    alpha_cfg = cfg.optimizer.alpha
    report_model = None
    if alpha_cfg.mode == "fixed":
        port = solve_weights(problem, alpha_cfg.value)
        qr_market = quality_ratio(pm, port.beta, view, port.alpha, stats.entropy)
    else:
        port, report = solve_alpha(problem, alpha_cfg)
        qr_market = report.trace[-1][2]
        report_model = AlphaReportModel(
            alpha=report.alpha,
            iterations=report.iterations,
            residual=report.residual,
            converged=report.converged,
            trace=list(report.trace),
        )
    return OptimizeResponse(
        asset_ids=list(series.asset_ids),
        weights=[float(x) for x in port.weights],
        alpha=port.alpha,
        beta=port.beta,
        gamma=port.gamma,
        risk=port.risk,
        qr=port.qr,
        y2=port.y2,
        warnings=[port.condition_warning] if port.condition_warning else [],
        qr_market=float(qr_market),
        alpha_report=report_model,
    )


def _strategy_model(res) -> StrategyResultModel:
    profit = res.realized_annual_profit
    return StrategyResultModel(
        name=res.name,
        realized_annual_profit=None if math.isnan(profit) else profit,
        value_curve=[float(x) for x in res.value_curve],
        period_returns=[float(x) for x in res.period_returns],
        weights=[[float(x) for x in row] for row in res.weights],
        qr_series=_nan_to_none(res.qr_series),
        alpha_series=_nan_to_none(res.alpha_series),
        qr_market_series=_nan_to_none(res.qr_market_series),
        converged_series=list(res.converged_series),
        failed_steps=list(res.failed_steps),
    )


def _backtest_model(report: BacktestReport) -> BacktestResponse:
    return BacktestResponse(
        window=report.window,
        rebalance_every=report.rebalance_every,
        start_period=report.start_period,
        rebalance_steps=list(report.rebalance_steps),
        config_hash=report.config_hash,
        data_fingerprint=report.data_fingerprint,
        seed=report.seed,
        strategies=[_strategy_model(res) for res in report.strategies],
    )


def handle_backtest(request: BacktestRequest) -> BacktestResponse:
    cfg, series = _load_series(request.prices_csv, request.config)
    pm = _market_weights(cfg, request.market_weights, series.n_assets)
    report = run_backtest(series, cfg, market_weights=pm, seed=request.seed)
    return _backtest_model(report)


def handle_sweep(request: SweepRequest) -> SweepResponse:
    cfg, series = _load_series(request.prices_csv, request.config)
    if cfg.sweep is None:
        raise InvalidConfig(
            'sweep requires a config "sweep" section: {"alpha": grid} or {"mc": grid}'
        )
    pm = _market_weights(cfg, request.market_weights, series.n_assets)
    (kind, grid), = cfg.sweep.items()
    if kind == "alpha":
        table = sweep_alpha(series, cfg, grid, market_weights=pm)
    else:
        table = sweep_mc(series, cfg, grid, market_weights=pm)
    return SweepResponse(
        kind=kind,
        columns=list(table.columns),
        rows=[list(row) for row in table.rows],
    )


def _returns_csv(series: ReturnSeries) -> str:
    lines = ["period," + ",".join(series.asset_ids)]
    for idx, row in enumerate(series.returns):
        lines.append(str(idx) + "," + ",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def handle_synth(request: SynthRequest) -> SynthResponse:
    spec = synthetic_spec_from_dict(request.spec)
    series = generate_synthetic(spec)
    prices = prices_from_returns(series)
    return SynthResponse(
        asset_ids=list(prices.asset_ids),
        n_periods=spec.n_periods,
        seed=spec.seed,
        prices_csv=serialize_prices(prices),
        returns_csv=_returns_csv(series),
    )
