"""Request/response schemas for the HTTP service and the in-process CLI path.

Price data travels as the raw CSV text so local and remote runs share
one code path; NaN diagnostics are mapped to null for strict JSON.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict


class StatsRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prices_csv: str
    config: Dict[str, Any] = {}


class StatsResponse(BaseModel):
    asset_ids: List[str]
    means: List[float]
    variances: List[float]
    entropies: List[float]
    covariance: List[List[float]]
    n_obs: int


class OptimizeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prices_csv: str
    config: Dict[str, Any] = {}
    market_weights: Optional[List[float]] = None


class AlphaReportModel(BaseModel):
    alpha: float
    iterations: int
    residual: float
    converged: bool
    trace: List[Tuple[float, float, float]]


class OptimizeResponse(BaseModel):
    asset_ids: List[str]
    weights: List[float]
    alpha: float
    beta: float
    gamma: float
    risk: float
    qr: float
    y2: float
    warnings: List[str]
    qr_market: float
    alpha_report: Optional[AlphaReportModel] = None


class BacktestRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prices_csv: str
    config: Dict[str, Any] = {}
    market_weights: Optional[List[float]] = None
    seed: Optional[int] = None


class StrategyResultModel(BaseModel):
    name: str
    realized_annual_profit: Optional[float]
    value_curve: List[float]
    period_returns: List[float]
    weights: List[List[float]]
    qr_series: List[Optional[float]]
    alpha_series: List[Optional[float]]
    qr_market_series: List[Optional[float]]
    converged_series: List[bool]
    failed_steps: List[int]


class BacktestResponse(BaseModel):
    window: int
    rebalance_every: int
    start_period: int
    rebalance_steps: List[int]
    config_hash: str
    data_fingerprint: str
    seed: Optional[int]
    strategies: List[StrategyResultModel]


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prices_csv: str
    config: Dict[str, Any] = {}
    market_weights: Optional[List[float]] = None


class SweepResponse(BaseModel):
    kind: str  # "alpha" or "mc"
    columns: List[str]
    rows: List[List[Optional[float]]]


class SynthRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    spec: Dict[str, Any]


class SynthResponse(BaseModel):
    asset_ids: List[str]
    n_periods: int
    seed: int
    prices_csv: str
    returns_csv: str
