"""Price ingestion, return derivation, and seeded synthetic markets.

The CSV format is ``date,<id1>,<id2>,...`` with ISO dates and plain
decimal prices.  Missing or malformed cells are rejected outright; no
imputation is attempted because downstream entropy estimates would be
contaminated silently.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm as _norm, t as _student_t

from .errors import (
    DomainError,
    InsufficientData,
    InvalidConfig,
    MalformedInput,
    NotPositiveDefinite,
)

BASE_PRICE = 100.0
_SYNTH_EPOCH = _dt.date(2000, 1, 1)


@dataclass(frozen=True)
class PriceTable:
    """Aligned price history: T dates by M assets, all prices positive."""

    asset_ids: tuple[str, ...]
    dates: tuple[_dt.date, ...]
    prices: np.ndarray  # T x M, float

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "prices", prices)
        t, m = prices.shape
        if len(self.asset_ids) != m:
            raise MalformedInput("asset id count does not match price columns")
        if len(self.dates) != t:
            raise MalformedInput("date count does not match price rows")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise MalformedInput("prices must be finite and strictly positive")
        for i in range(1, t):
            if self.dates[i] <= self.dates[i - 1]:
                raise MalformedInput(f"dates not strictly increasing at row {i + 1}")

    @property
    def n_periods(self) -> int:
        return self.prices.shape[0]

    @property
    def n_assets(self) -> int:
        return self.prices.shape[1]


@dataclass(frozen=True)
class ReturnSeries:
    """Per-asset simple returns with an annualization factor.

    Series derived from a PriceTable always satisfy ``return > -1``;
    directly constructed series (e.g. synthetic statistical tests with
    unit variance) may exceed that bound and are accepted as-is.
    """

    asset_ids: tuple[str, ...]
    returns: np.ndarray  # T x M, dimensionless
    periods_per_year: int = 252

    def __post_init__(self):
        returns = np.asarray(self.returns, dtype=float)
        object.__setattr__(self, "returns", returns)
        if returns.ndim != 2:
            raise MalformedInput("returns must be a T x M matrix")
        t, m = returns.shape
        if t < 2:
            raise InsufficientData(f"need at least 2 return observations, got {t}")
        if m < 1 or len(self.asset_ids) != m:
            raise MalformedInput("asset id count does not match return columns")
        if not np.all(np.isfinite(returns)):
            raise MalformedInput("returns must be finite")
        if self.periods_per_year < 1:
            raise InvalidConfig("periods_per_year must be positive")

    @property
    def n_periods(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a seeded synthetic market.

    ``target_covariance`` is the per-period return covariance; marginal
    tails are Student-t with the given degrees of freedom (``inf`` or
    ``null`` in JSON meaning Gaussian), coupled through a Gaussian
    copula so tail shape and correlation are controlled independently.
    """

    n_assets: int
    n_periods: int
    target_covariance: np.ndarray
    tail_dof: tuple[float, ...]
    drift: tuple[float, ...]
    seed: int
    periods_per_year: int = 252
    asset_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        cov = np.asarray(self.target_covariance, dtype=float)
        object.__setattr__(self, "target_covariance", cov)
        m = self.n_assets
        if m < 1 or self.n_periods < 2:
            raise InvalidConfig("need n_assets >= 1 and n_periods >= 2")
        if cov.shape != (m, m):
            raise InvalidConfig(f"target_covariance must be {m}x{m}, got {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise InvalidConfig("target_covariance must be symmetric within 1e-12")
        if np.any(np.diag(cov) <= 0):
            raise InvalidConfig("target_covariance diagonal must be positive")
        if len(self.tail_dof) != m or len(self.drift) != m:
            raise InvalidConfig("tail_dof and drift must have one entry per asset")
        if any(not d > 2 for d in self.tail_dof):
            raise InvalidConfig("tail_dof entries must exceed 2 (inf for Gaussian)")
        if not self.asset_ids:
            object.__setattr__(
                self, "asset_ids", tuple(f"A{i:02d}" for i in range(m))
            )
        elif len(self.asset_ids) != m:
            raise InvalidConfig("asset_ids must have one entry per asset")


def synthetic_spec_from_dict(data: dict) -> SyntheticSpec:
    """Build a SyntheticSpec from its JSON representation."""
    if not isinstance(data, dict):
        raise InvalidConfig("synthetic spec must be a JSON object")
    required = {"n_assets", "n_periods", "target_covariance", "tail_dof", "drift", "seed"}
    allowed = required | {"periods_per_year", "asset_ids"}
    missing = required - set(data)
    if missing:
        raise InvalidConfig(f"synthetic spec missing key(s) {sorted(missing)}")
    unknown = set(data) - allowed
    if unknown:
        raise InvalidConfig(f"synthetic spec has unknown key(s) {sorted(unknown)}")
    dof = tuple(math.inf if d is None else float(d) for d in data["tail_dof"])
    return SyntheticSpec(
        n_assets=int(data["n_assets"]),
        n_periods=int(data["n_periods"]),
        target_covariance=np.asarray(data["target_covariance"], dtype=float),
        tail_dof=dof,
        drift=tuple(float(d) for d in data["drift"]),
        seed=int(data["seed"]),
        periods_per_year=int(data.get("periods_per_year", 252)),
        asset_ids=tuple(data.get("asset_ids", ())),
    )


def synthetic_spec_to_dict(spec: SyntheticSpec) -> dict:
    """JSON representation of a spec (inverse of synthetic_spec_from_dict)."""
    return {
        "n_assets": spec.n_assets,
        "n_periods": spec.n_periods,
        "target_covariance": [[float(x) for x in row]
                              for row in spec.target_covariance],
        "tail_dof": [None if math.isinf(d) else d for d in spec.tail_dof],
        "drift": list(spec.drift),
        "seed": spec.seed,
        "periods_per_year": spec.periods_per_year,
        "asset_ids": list(spec.asset_ids),
    }


def parse_prices(raw: str) -> PriceTable:
    """Parse the price CSV format into a PriceTable.

    Errors name the offending line and column so bad files can be fixed
    without guesswork.
    """
    lines = [ln for ln in raw.splitlines() if ln.strip() != ""]
    if not lines:
        raise MalformedInput("empty price file")
    header = [h.strip() for h in lines[0].split(",")]
    if len(header) < 2 or header[0] != "date":
        raise MalformedInput("header must be 'date,<id1>,<id2>,...'")
    asset_ids = header[1:]
    if any(a == "" for a in asset_ids):
        raise MalformedInput("empty asset id in header")
    if len(set(asset_ids)) != len(asset_ids):
        raise MalformedInput("duplicate asset id in header")

    dates: list[_dt.date] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise MalformedInput(
                f"line {lineno}: expected {len(header)} fields, got {len(cells)}"
            )
        try:
            date = _dt.date.fromisoformat(cells[0])
        except ValueError as exc:
            raise MalformedInput(f"line {lineno}: bad date {cells[0]!r}") from exc
        if dates and date <= dates[-1]:
            raise MalformedInput(
                f"line {lineno}: date {cells[0]} not after previous row"
            )
        row = []
        for col, cell in zip(asset_ids, cells[1:]):
            try:
                value = float(cell)
            except ValueError as exc:
                raise MalformedInput(
                    f"line {lineno}, column {col!r}: non-numeric price {cell!r}"
                ) from exc
            if not math.isfinite(value) or value <= 0:
                raise MalformedInput(
                    f"line {lineno}, column {col!r}: price must be positive, got {cell}"
                )
            row.append(value)
        dates.append(date)
        rows.append(row)
    if not rows:
        raise MalformedInput("price file has a header but no data rows")
    return PriceTable(tuple(asset_ids), tuple(dates), np.array(rows, dtype=float))


def serialize_prices(table: PriceTable) -> str:
    """Emit the CSV form of a PriceTable with full round-trip precision."""
    out = ["date," + ",".join(table.asset_ids)]
    for date, row in zip(table.dates, table.prices):
        out.append(date.isoformat() + "," + ",".join(repr(float(p)) for p in row))
    return "\n".join(out) + "\n"


def to_returns(prices: PriceTable, periods_per_year: int = 252,
               method: str = "simple") -> ReturnSeries:
    """Derive per-period returns from consecutive prices.

    ``simple`` gives p[t+1]/p[t] - 1 (the default everywhere; portfolio
    arithmetic is linear in simple returns); ``log`` is offered for
    experimentation only.
    """
    if prices.n_periods < 2:
        raise InsufficientData("need at least 2 price rows to form returns")
    ratios = prices.prices[1:] / prices.prices[:-1]
    if method == "simple":
        returns = ratios - 1.0
    elif method == "log":
        returns = np.log(ratios)
    else:
        raise InvalidConfig(f"unknown return method {method!r}")
    return ReturnSeries(prices.asset_ids, returns, periods_per_year)


def _correlation_from(cov: np.ndarray) -> np.ndarray:
    scale = np.sqrt(np.diag(cov))
    return cov / np.outer(scale, scale)


def generate_synthetic(spec: SyntheticSpec) -> ReturnSeries:
    """Draw a deterministic seeded return panel from a SyntheticSpec.

    Correlated standard normals (Cholesky of the target correlation) are
    pushed through the Gaussian CDF and each column mapped to a Student-t
    quantile, then scaled so the per-period variance matches the target
    diagonal and shifted by the drift.
    """
    corr = _correlation_from(spec.target_covariance)
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(
            "target_covariance is not positive definite"
        ) from exc

    rng = np.random.default_rng(spec.seed)
    shocks = rng.standard_normal((spec.n_periods, spec.n_assets))
    gauss = shocks @ chol.T

    columns = []
    for i, dof in enumerate(spec.tail_dof):
        var_target = spec.target_covariance[i, i]
        if math.isinf(dof):
            col = gauss[:, i] * math.sqrt(var_target)
        else:
            u = _norm.cdf(gauss[:, i])
            u = np.clip(u, 1e-16, 1.0 - 1e-16)
            raw = _student_t.ppf(u, df=dof)
            col = raw * math.sqrt(var_target / (dof / (dof - 2.0)))
        columns.append(col + spec.drift[i])
    returns = np.column_stack(columns)
    return ReturnSeries(spec.asset_ids, returns, spec.periods_per_year)


def prices_from_returns(series: ReturnSeries, base_price: float = BASE_PRICE) -> PriceTable:
    """Compound returns into a synthetic price history (first row = base).

    Used to emit synthetic markets in the same CSV format real data
    arrives in; requires every return to exceed -1 so prices stay
    positive.
    """
    if np.any(series.returns <= -1.0):
        raise DomainError(
            "returns at or below -100% cannot be represented as positive prices; "
            "use a per-period variance scale appropriate for the sampling frequency"
        )
    growth = np.cumprod(1.0 + series.returns, axis=0)
    prices = base_price * np.vstack([np.ones(series.n_assets), growth])
    dates = tuple(
        _SYNTH_EPOCH + _dt.timedelta(days=t) for t in range(series.n_periods + 1)
    )
    return PriceTable(series.asset_ids, dates, prices)
