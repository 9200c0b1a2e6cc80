"""Objective-value transform of return panels.

Each return is mapped to a nonnegative "risk distance"
``w = -d*ln(density) + d*ln(modal density)`` under its asset's fitted
histogram density, so the most probable bin sits at 0.  Columns are then
rescaled multiplicatively to a common mean, and the covariance and mean
vector of the rescaled panel replace the raw statistics for risk and
quality-ratio reporting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import BinRule, ObvConfig
from .errors import DegenerateObjective, DomainError, OutOfSupport
from .estimators import AssetStats, HistogramPdf, histogram
from .market_data import ReturnSeries


@dataclass(frozen=True)
class ObjectiveView:
    """Covariance/means pair consumed by risk and quality-ratio formulas.

    In identity mode these are the raw sample statistics; in obv mode
    they come from the normalized objective values, whose means are all
    equal to ``normalization_target`` by construction.
    """

    mode: str
    cov: np.ndarray
    means: np.ndarray
    scale_d: float = 1.0
    normalization_target: float = 1.0

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        means = np.asarray(self.means, dtype=float)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "means", means)
        if self.mode not in ("identity", "obv"):
            raise DomainError(f"unknown view mode {self.mode!r}")
        if cov.shape != (len(means), len(means)):
            raise DomainError("view covariance and means dimensions disagree")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise DomainError("view covariance not symmetric within 1e-12")
        if self.mode == "obv" and not np.allclose(
            means, self.normalization_target, rtol=0.0, atol=1e-10
        ):
            raise DomainError("obv means must equal the normalization target")


def objective_values(
    series: ReturnSeries, pdfs: Sequence[HistogramPdf], d: float = 1.0
) -> np.ndarray:
    """Map every observed return to its objective value, column by column.

    The additive gauge constant anchors each asset's modal bin at 0, so
    values are nonnegative and scale linearly with ``d``.
    """
    if d <= 0:
        raise DomainError("scale d must be positive")
    if len(pdfs) != series.n_assets:
        raise DomainError("need one histogram per asset")
    out = np.empty_like(series.returns)
    for i, pdf in enumerate(pdfs):
        dens = pdf.density_at(series.returns[:, i])
        if np.any(dens <= 0):
            bad = int(np.argmax(dens <= 0))
            raise OutOfSupport(
                f"asset {series.asset_ids[i]}: return at row {bad} falls outside "
                "the fitted density's support"
            )
        modal = pdf.mass.max() / pdf.bin_width
        out[:, i] = d * (np.log(modal) - np.log(dens))
    return out


def build_view(
    series: ReturnSeries,
    stats: AssetStats,
    config: ObvConfig | None = None,
    bin_rule: BinRule = "sqrt",
) -> ObjectiveView:
    """Produce the ObjectiveView for the configured mode.

    Identity mode passes (covariance, means) through untouched.  Obv mode
    rescales every objective-value column to a common mean and takes the
    sample covariance of the rescaled panel.
    """
    config = config or ObvConfig()
    if config.mode == "identity":
        return ObjectiveView("identity", stats.covariance, stats.mean,
                             config.d, config.target)

    pdfs = [histogram(series.returns[:, i], bin_rule) for i in range(series.n_assets)]
    values = objective_values(series, pdfs, config.d)
    col_means = values.mean(axis=0)
    if np.any(col_means <= 0):
        bad = series.asset_ids[int(np.argmax(col_means <= 0))]
        raise DegenerateObjective(
            f"asset {bad}: all objective values are 0 (uniform histogram); "
            "cannot rescale to a common mean"
        )
    rescaled = values * (config.target / col_means)
    cov = np.cov(rescaled, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    cov = (cov + cov.T) / 2.0
    means = np.full(series.n_assets, config.target)
    return ObjectiveView("obv", cov, means, config.d, config.target)
