"""Per-asset statistics: means, covariance, and differential entropy.

Entropy is estimated with a plug-in histogram density: transparent,
deterministic, and checkable against the closed-form Gaussian and
Student-t values below.  Raw-scale daily returns give negative
differential entropy (about 1.419 + ln(0.01) for a 1% scale); the
``standardize`` option switches to shape-only entropy at unit variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, digamma

from .config import BinRule, EstimatorConfig
from .errors import DegenerateSample, DomainError, InsufficientData
from .market_data import ReturnSeries

GAUSSIAN_UNIT_ENTROPY = 0.5 * math.log(2.0 * math.pi * math.e)  # 1.4189385332046727


@dataclass(frozen=True)
class HistogramPdf:
    """Uniform-bin relative-frequency density over [min, max]."""

    edges: np.ndarray  # K+1 increasing edges
    mass: np.ndarray  # K nonnegative frequencies summing to 1

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "mass", mass)
        if edges.ndim != 1 or mass.ndim != 1 or len(edges) != len(mass) + 1:
            raise DomainError("need K+1 edges for K masses")
        widths = np.diff(edges)
        if np.any(widths <= 0):
            raise DomainError("edges must be strictly increasing")
        if not np.allclose(widths, widths[0], rtol=0.0, atol=1e-12):
            raise DomainError("bins must be uniform within 1e-12")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > 1e-12:
            raise DomainError("mass must be nonnegative and sum to 1 within 1e-12")

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def n_bins(self) -> int:
        return len(self.mass)

    def density_at(self, x: np.ndarray) -> np.ndarray:
        """Density mass/width at each point; 0 outside [min, max].

        Points exactly on the upper edge belong to the last bin, matching
        the binning convention used to build the histogram.
        """
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.edges, x, side="right") - 1
        idx = np.where(x == self.edges[-1], self.n_bins - 1, idx)
        inside = (idx >= 0) & (idx < self.n_bins)
        dens = np.zeros_like(x)
        dens[inside] = self.mass[idx[inside]] / self.bin_width
        return dens


def _bin_count(samples: np.ndarray, rule: BinRule) -> int:
    n = len(samples)
    if isinstance(rule, int):
        return rule
    if rule == "sqrt":
        return math.ceil(math.sqrt(n))
    if rule == "fd":
        q75, q25 = np.percentile(samples, [75, 25])
        iqr = q75 - q25
        if iqr <= 0:
            return math.ceil(math.sqrt(n))  # FD undefined; fall back
        width = 2.0 * iqr / n ** (1.0 / 3.0)
        span = samples.max() - samples.min()
        return max(1, math.ceil(span / width))
    raise DomainError(f"unknown bin rule {rule!r}")


def histogram(samples: np.ndarray, rule: BinRule = "sqrt") -> HistogramPdf:
    """Build a uniform-bin relative-frequency histogram spanning the data."""
    samples = np.asarray(samples, dtype=float).ravel()
    if len(samples) < 2:
        raise InsufficientData("need at least 2 samples for a histogram")
    lo, hi = float(samples.min()), float(samples.max())
    if lo == hi:
        raise DegenerateSample("all samples equal; zero-width support")
    k = _bin_count(samples, rule)
    counts, edges = np.histogram(samples, bins=k, range=(lo, hi))
    return HistogramPdf(edges, counts / len(samples))


def entropy_of(pdf: HistogramPdf) -> float:
    """Differential entropy (nats) of a histogram density.

    Equals -sum(mass * ln mass) + ln(bin_width); empty bins contribute 0.
    """
    mass = pdf.mass[pdf.mass > 0]
    return float(-np.sum(mass * np.log(mass)) + math.log(pdf.bin_width))


def gaussian_entropy(variance: float) -> float:
    """Closed-form differential entropy of a Gaussian: 0.5*ln(2*pi*e*var)."""
    if variance <= 0:
        raise DomainError(f"variance must be positive, got {variance}")
    return 0.5 * math.log(2.0 * math.pi * math.e * variance)


def student_t_entropy(dof: float) -> float:
    """Closed-form differential entropy of a unit-scale Student-t.

    (nu+1)/2 * [psi((nu+1)/2) - psi(nu/2)] + ln(sqrt(nu) * B(nu/2, 1/2));
    approaches the unit Gaussian value from above as dof grows.
    """
    if dof <= 0:
        raise DomainError(f"degrees of freedom must be positive, got {dof}")
    if math.isinf(dof):
        return GAUSSIAN_UNIT_ENTROPY
    half = dof / 2.0
    return float(
        (dof + 1.0) / 2.0 * (digamma(half + 0.5) - digamma(half))
        + 0.5 * math.log(dof)
        + betaln(half, 0.5)
    )


@dataclass(frozen=True)
class AssetStats:
    """Per-asset mean, variance, entropy, plus the full covariance."""

    mean: np.ndarray
    variance: np.ndarray
    entropy: np.ndarray
    covariance: np.ndarray
    n_obs: int

    def __post_init__(self):
        for name in ("mean", "variance", "entropy", "covariance"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        cov = self.covariance
        m = len(self.mean)
        if cov.shape != (m, m) or len(self.variance) != m or len(self.entropy) != m:
            raise DomainError("statistic dimensions disagree")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise DomainError("covariance not symmetric within 1e-12")
        if not np.allclose(np.diag(cov), self.variance, rtol=0.0, atol=1e-12):
            raise DomainError("covariance diagonal disagrees with variances")
        if np.any(self.variance < 0):
            raise DomainError("negative variance")
        if not np.all(np.isfinite(self.entropy)):
            raise DomainError("entropy entries must be finite")

    @property
    def n_assets(self) -> int:
        return len(self.mean)


def estimate_stats(series: ReturnSeries, config: EstimatorConfig | None = None) -> AssetStats:
    """Estimate AssetStats from a return panel.

    Covariance uses the (T-1) divisor with no shrinkage or cleaning.
    With ``standardize`` set, each column is rescaled to unit variance
    before entropy estimation only; means and covariance stay raw.
    """
    config = config or EstimatorConfig()
    returns = series.returns
    t = returns.shape[0]
    if t < max(2, config.min_obs):
        raise InsufficientData(
            f"need at least {max(2, config.min_obs)} observations, got {t}"
        )
    mean = returns.mean(axis=0)
    cov = np.cov(returns, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    cov = (cov + cov.T) / 2.0  # exact symmetry for downstream checks
    variance = np.diag(cov).copy()

    entropies = []
    for i in range(series.n_assets):
        col = returns[:, i]
        if config.standardize:
            sd = col.std(ddof=1)
            if sd == 0:
                raise DegenerateSample(f"asset {series.asset_ids[i]} has zero variance")
            col = col / sd
        entropies.append(entropy_of(histogram(col, config.bin_rule)))
    return AssetStats(mean, variance, np.array(entropies), cov, t)
