"""Entropy-penalized mean-variance portfolio optimization.

The penalized covariance ``C + alpha*diag(S)`` (per-asset entropies S on
the diagonal, temperature alpha) is inverted under two equality
constraints -- full investment and a target expected return -- via the
2x2 Schur system in the Lagrange multipliers (beta, gamma).  The
temperature itself can be calibrated self-consistently so that a
reference market portfolio's quality ratio equals one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .config import AlphaConfig
from .errors import (
    DomainError,
    EntroportError,
    IllConditioned,
    InfeasibleConstraints,
    NoConvergence,
    SingularMatrix,
    ZeroEntropyQuadratic,
    ZeroRisk,
)
from .objective_value import ObjectiveView

_DEGENERATE_REL = 1e-12  # relative threshold for a rank-deficient 2x2 system


@dataclass(frozen=True)
class OptimizerProblem:
    """One optimization instance: statistics, constraints, reference portfolio.

    ``cov``/``means``/``entropies`` are the raw per-period sample
    statistics used in the solve; ``view`` supplies the (possibly
    transformed) covariance and means used for risk and quality-ratio
    reporting.  ``m_c`` is the per-period expected-return target, or
    ``None`` to release the return constraint.
    """

    cov: np.ndarray
    means: np.ndarray
    entropies: np.ndarray
    m_c: Optional[float]
    market_weights: np.ndarray
    view: ObjectiveView
    cond_bound: float = 1e12

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        means = np.asarray(self.means, dtype=float)
        entropies = np.asarray(self.entropies, dtype=float)
        pm = np.asarray(self.market_weights, dtype=float)
        for name, arr in (("cov", cov), ("means", means),
                          ("entropies", entropies), ("market_weights", pm)):
            object.__setattr__(self, name, arr)
        n = len(means)
        if cov.shape != (n, n) or len(entropies) != n or len(pm) != n:
            raise DomainError("problem dimensions disagree")
        if self.view.cov.shape != (n, n):
            raise DomainError("view dimension does not match problem")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise DomainError("covariance not symmetric within 1e-12")
        if np.any(pm < 0) or abs(pm.sum() - 1.0) > 1e-10:
            raise DomainError(
                "market weights must be nonnegative and sum to 1 within 1e-10"
            )
        if self.cond_bound <= 1:
            raise DomainError("cond_bound must exceed 1")

    @property
    def n_assets(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class Portfolio:
    """Solved weights with their multipliers and diagnostics."""

    weights: np.ndarray
    alpha: float
    beta: float
    gamma: float
    risk: float
    qr: float
    y2: float
    condition_warning: Optional[str] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if not np.all(np.isfinite(w)):
            raise DomainError("portfolio weights must be finite")
        if abs(w.sum() - 1.0) > 1e-10:
            raise DomainError("portfolio weights must sum to 1 within 1e-10")


@dataclass(frozen=True)
class AlphaSolveReport:
    """Trace of a temperature calibration run.

    ``trace`` holds one ``(alpha_k, beta_k, qr_market_k)`` triple per
    iteration, ending with the returned temperature.
    """

    alpha: float
    iterations: int
    residual: float
    converged: bool
    trace: Tuple[Tuple[float, float, float], ...]


def augmented_covariance(
    cov: np.ndarray, entropies: np.ndarray, alpha: float
) -> np.ndarray:
    """Entropy-penalized covariance: the sample covariance plus
    ``alpha`` times the per-asset entropies on the diagonal."""
    cov = np.asarray(cov, dtype=float)
    entropies = np.asarray(entropies, dtype=float)
    if cov.shape != (len(entropies), len(entropies)):
        raise DomainError("covariance and entropy dimensions disagree")
    return cov + alpha * np.diag(entropies)


def _solve_spd(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"penalized covariance is singular: {exc}") from exc


def _released_weights(u: np.ndarray, ones: np.ndarray) -> tuple[np.ndarray, float]:
    # Budget-only solution p = u / (1'u); guard against catastrophic
    # cancellation in the normalizer (possible when the matrix is indefinite).
    spread = np.abs(u).sum()
    if spread == 0.0 or not np.isfinite(spread):
        raise SingularMatrix("inverse-covariance solve under/overflowed")
    total = float(ones @ u)
    if abs(total) <= 1e-12 * spread:
        raise InfeasibleConstraints(
            "budget constraint cannot be normalized: 1'C~^-1 1 vanishes"
        )
    return u / total, 1.0 / total


def solve_weights(problem: OptimizerProblem, alpha: float) -> Portfolio:
    """Closed-form constrained solve at a fixed temperature.

    Solves ``min p'(C + alpha*diag(S))p`` subject to ``sum(p) = 1`` and,
    when ``problem.m_c`` is set, ``p'means = m_c``.  The two Lagrange
    multipliers come from the 2x2 Schur system built on the solves
    against the all-ones vector and the mean vector, so both constraints
    hold to machine precision; weights are then ``gamma*u - beta*v``.
    """
    ct = augmented_covariance(problem.cov, problem.entropies, alpha)
    cond = np.linalg.cond(ct)
    if not np.isfinite(cond):
        raise SingularMatrix(
            f"penalized covariance is numerically singular at alpha={alpha!r}"
        )
    if cond > problem.cond_bound:
        raise IllConditioned(
            f"condition number {cond:.3e} exceeds bound {problem.cond_bound:.3e} "
            f"at alpha={alpha!r}"
        )

    condition_warning = None
    smallest = float(np.linalg.eigvalsh(ct)[0])
    if smallest < 0:
        condition_warning = (
            f"penalized covariance indefinite at alpha={alpha!r} "
            f"(smallest eigenvalue {smallest:.3e}); stationary point reported"
        )

    ones = np.ones(problem.n_assets)
    m = problem.means
    u = _solve_spd(ct, ones)
    v = _solve_spd(ct, m)
    a11 = float(ones @ u)
    a12 = float(ones @ v)
    a21 = float(m @ u)
    a22 = float(m @ v)

    if problem.m_c is None:
        weights, gamma = _released_weights(u, ones)
        beta = 0.0
    else:
        m_c = float(problem.m_c)
        det = a11 * a22 - a12 * a21
        scale = max(abs(a11 * a22), abs(a12 * a21))
        if not np.isfinite(scale) or (scale == 0.0 and np.abs(u).sum() == 0.0):
            raise SingularMatrix(
                f"constraint projections under/overflowed at alpha={alpha!r}; "
                "the temperature magnitude is out of range for this data"
            )
        if abs(det) <= _DEGENERATE_REL * max(scale, 1e-300):
            # Means parallel to the ones vector: the return constraint is
            # either redundant or unsatisfiable.
            if abs(a11) <= 1e-12 * np.abs(u).sum():
                raise InfeasibleConstraints("degenerate constraint system")
            common = a12 / a11
            if abs(m_c - common) <= 1e-10 * (1.0 + abs(common)):
                weights, gamma = _released_weights(u, ones)
                beta = 0.0
            else:
                raise InfeasibleConstraints(
                    f"all assets share expected return {common!r} but the "
                    f"target is {m_c!r}; no weights can satisfy both constraints"
                )
        else:
            # [ 1'p ]   [ a11  -a12 ] [ gamma ]
            # [ m'p ] = [ a21  -a22 ] [ beta  ]
            gamma, beta = np.linalg.solve(
                np.array([[a11, -a12], [a21, -a22]]), np.array([1.0, m_c])
            )
            weights = gamma * u - beta * v

    if abs(weights.sum() - 1.0) > 1e-10 or (
        problem.m_c is not None and beta != 0.0
        and abs(weights @ m - problem.m_c) > 1e-8
    ):
        raise IllConditioned(
            f"constraints not satisfied to tolerance at alpha={alpha!r}; "
            "the penalized covariance is too poorly conditioned"
        )

    risk = portfolio_risk(weights, problem.view, alpha, problem.entropies)
    qr = quality_ratio(weights, float(beta), problem.view, alpha, problem.entropies)
    return Portfolio(
        weights=weights,
        alpha=float(alpha),
        beta=float(beta),
        gamma=float(gamma),
        risk=risk,
        qr=qr,
        y2=weight_concentration(weights, 2),
        condition_warning=condition_warning,
    )


def min_variance_weights(cov: np.ndarray) -> np.ndarray:
    """Budget-constrained minimum-variance weights, inverse-covariance
    row sums normalized to 1."""
    cov = np.asarray(cov, dtype=float)
    try:
        u = np.linalg.solve(cov, np.ones(cov.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"covariance is singular: {exc}") from exc
    return u / u.sum()


def inverse_variance_weights(variances: np.ndarray) -> np.ndarray:
    """Diagonal-covariance special case: weights proportional to 1/variance."""
    variances = np.asarray(variances, dtype=float)
    if np.any(variances <= 0):
        raise DomainError("variances must be strictly positive")
    inv = 1.0 / variances
    return inv / inv.sum()


def portfolio_risk(
    weights: np.ndarray,
    view: ObjectiveView,
    alpha: float,
    entropies: np.ndarray,
) -> float:
    """Quadratic risk in the view frame plus the entropy penalty term."""
    weights = np.asarray(weights, dtype=float)
    entropies = np.asarray(entropies, dtype=float)
    if len(weights) != len(entropies) or view.cov.shape[0] != len(weights):
        raise DomainError("risk dimensions disagree")
    return float(weights @ view.cov @ weights + alpha * (entropies @ weights**2))


def quality_ratio(
    weights: np.ndarray,
    beta: float,
    view: ObjectiveView,
    alpha: float,
    entropies: np.ndarray,
) -> float:
    """Return-multiplier-weighted expected profit divided by penalized risk."""
    risk = portfolio_risk(weights, view, alpha, entropies)
    if abs(risk) < 1e-14:
        raise ZeroRisk(f"risk denominator {risk!r} is below 1e-14")
    return float(beta * (np.asarray(weights) @ view.means) / risk)


def weight_concentration(weights: np.ndarray, q: float = 2) -> float:
    """Concentration diagnostic: sum of |weight|^q.

    At q = 2 this is the average weight; its reciprocal is the effective
    number of positions.  Non-integer exponents require nonnegative
    weights.
    """
    weights = np.asarray(weights, dtype=float)
    if q <= 0:
        raise DomainError("concentration exponent must be positive")
    if not float(q).is_integer() and np.any(weights < 0):
        raise DomainError("non-integer exponent requires nonnegative weights")
    return float(np.sum(np.abs(weights) ** q))


def _market_terms(problem: OptimizerProblem) -> tuple[float, float, float]:
    pm = problem.market_weights
    n = float(pm @ problem.view.means)
    v = float(pm @ problem.view.cov @ pm)
    e = float(problem.entropies @ pm**2)
    if abs(e) < 1e-30:
        raise ZeroEntropyQuadratic(
            "entropy quadratic of the market portfolio vanishes; "
            "temperature cannot be calibrated"
        )
    return n, v, e


def _market_qr(beta: float, alpha: float, n: float, v: float, e: float) -> float:
    risk = v + alpha * e
    if abs(risk) < 1e-14:
        raise ZeroRisk(
            f"market portfolio risk vanishes at alpha={alpha!r} during calibration"
        )
    return beta * n / risk


def solve_alpha(
    problem: OptimizerProblem, config: Optional[AlphaConfig] = None
) -> tuple[Portfolio, AlphaSolveReport]:
    """Calibrate the temperature so the market portfolio's quality ratio is 1.

    Damped fixed-point iteration on ``alpha = (beta*N - V)/E`` where N,
    V, E are the market portfolio's expected profit, quadratic risk, and
    entropy quadratic in the view frame, and beta is re-solved at each
    candidate temperature.  Stops when the increment falls below
    ``tol*(1+|alpha|)``; ``converged`` additionally requires the market
    quality ratio to be within ``qr_tol`` of 1.  Raises NoConvergence
    (with the trace attached) if the iteration budget is exhausted.
    """
    config = config or AlphaConfig(mode="self_consistent")
    n, v, e = _market_terms(problem)
    if config.solver == "bisection":
        return _solve_alpha_bisection(problem, config, n, v, e)

    trace: list[tuple[float, float, float]] = []
    alpha = config.init
    for iteration in range(config.max_iter):
        port = solve_weights(problem, alpha)
        trace.append((alpha, port.beta, _market_qr(port.beta, alpha, n, v, e)))
        alpha_next = (1.0 - config.eta) * alpha + config.eta * (port.beta * n - v) / e
        if not np.isfinite(alpha_next) or abs(alpha_next) > 1e130:
            raise NoConvergence(
                f"temperature iteration diverged (alpha -> {alpha_next!r}); "
                "no self-consistent temperature is reachable from this start",
                trace=trace,
            )
        done = abs(alpha_next - alpha) <= config.tol * (1.0 + abs(alpha))
        alpha = alpha_next
        if done:
            break
    else:
        raise NoConvergence(
            f"temperature calibration did not converge in {config.max_iter} "
            "iterations",
            trace=trace,
        )
    return _finish_alpha(problem, config, alpha, iteration + 1, trace, n, v, e)


def _finish_alpha(problem, config, alpha, iterations, trace, n, v, e):
    port = solve_weights(problem, alpha)
    qr_market = _market_qr(port.beta, alpha, n, v, e)
    trace.append((alpha, port.beta, qr_market))
    residual = abs(qr_market - 1.0)
    report = AlphaSolveReport(
        alpha=float(alpha),
        iterations=iterations,
        residual=residual,
        converged=residual <= config.qr_tol,
        trace=tuple(trace),
    )
    return port, report


def _solve_alpha_bisection(problem, config, n, v, e):
    """Fallback scalar root finder on the market-QR residual.

    Expands a bracket around the initial temperature until the residual
    changes sign, then bisects.  Intended for monotone residuals where
    the damped iteration oscillates.
    """

    trace: list[tuple[float, float, float]] = []

    def residual_at(alpha: float) -> float:
        port = solve_weights(problem, alpha)
        qr_market = _market_qr(port.beta, alpha, n, v, e)
        trace.append((alpha, port.beta, qr_market))
        return qr_market - 1.0

    f_init = residual_at(config.init)
    if f_init == 0.0:
        return _finish_alpha(problem, config, config.init, len(trace), trace, n, v, e)
    # Walk outward from the start, preferring the side the undamped update
    # points to, and slide a geometric window until the residual flips sign.
    beta_init = trace[-1][1]
    undamped = (beta_init * n - v) / e
    prefer = 1.0 if undamped >= config.init else -1.0

    def bracket(direction: float):
        a, f_a = config.init, f_init
        step = 1.0
        for _ in range(60):
            b = config.init + direction * step
            try:
                f_b = residual_at(b)
            except EntroportError:
                return None  # left the solvable region without a sign change
            if np.sign(f_b) != np.sign(f_a):
                return (a, b, f_a) if a < b else (b, a, f_b)
            a, f_a = b, f_b
            step *= 2.0
        return None

    found = bracket(prefer) or bracket(-prefer)
    if found is None:
        raise NoConvergence(
            "bisection could not bracket a sign change in the market-QR residual",
            trace=trace,
        )
    lo, hi, f_lo = found

    iterations = len(trace)
    for _ in range(config.max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= config.tol * (1.0 + abs(mid)):
            return _finish_alpha(problem, config, mid, iterations, trace, n, v, e)
        f_mid = residual_at(mid)
        iterations += 1
        if f_mid == 0.0:
            return _finish_alpha(problem, config, mid, iterations, trace, n, v, e)
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    raise NoConvergence(
        f"bisection did not converge in {config.max_iter} iterations", trace=trace
    )
