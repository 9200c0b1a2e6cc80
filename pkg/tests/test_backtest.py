import math
from dataclasses import replace

import numpy as np
import pytest

import entroport as ep
from entroport.backtest import fingerprint_returns
from entroport.errors import (
    DegenerateSample,
    DomainError,
    InsufficientData,
    InvalidConfig,
)


def _config(window=40, strategies=("equal", "markowitz_ridge", "entropy_full"),
            alpha=0.001, **backtest_kwargs):
    """Identity view + standardized entropies: positive, near-gaussian
    penalties on daily-scale data, so small fixed temperatures stay PD."""
    return ep.RunConfig(
        estimator=ep.EstimatorConfig(standardize=True),
        obv=ep.ObvConfig(mode="identity"),
        optimizer=ep.OptimizerConfig(
            m_c_annual=0.20, alpha=ep.AlphaConfig(mode="fixed", value=alpha)
        ),
        backtest=ep.BacktestConfig(window=window, strategies=strategies,
                                   **backtest_kwargs),
    )


class TestMechanics:
    def test_equal_weight_brute_force(self, daily_series):
        report = ep.run_backtest(daily_series, _config(strategies=("equal",)))
        res = report.result("equal")
        n_steps = daily_series.n_periods - 40
        assert res.weights.shape == (n_steps, 5)
        np.testing.assert_array_equal(res.weights, np.full((n_steps, 5), 0.2))
        expected = np.array(
            [np.full(5, 0.2) @ row for row in daily_series.returns[40:]]
        )
        np.testing.assert_array_equal(res.period_returns, expected)

    def test_value_curve_compounds(self, daily_series):
        report = ep.run_backtest(daily_series, _config())
        for res in report.strategies:
            value = 1.0
            for s, ret in enumerate(res.period_returns):
                assert res.value_curve[s] == pytest.approx(value, rel=1e-12)
                value *= 1.0 + ret
            assert res.value_curve[0] == 1.0
            assert res.value_curve[-1] == pytest.approx(value, rel=1e-12)
            assert len(res.value_curve) == len(res.period_returns) + 1

    def test_no_lookahead(self, daily_series):
        # a prefix of the panel must reproduce the full run's early steps
        # exactly: nothing after the evaluated period may leak in
        config = _config()
        full = ep.run_backtest(daily_series, config)
        prefix = ep.ReturnSeries(
            daily_series.asset_ids,
            daily_series.returns[: 40 + 6],
            daily_series.periods_per_year,
        )
        short = ep.run_backtest(prefix, config)
        for name in ("equal", "markowitz_ridge", "entropy_full"):
            np.testing.assert_array_equal(
                short.result(name).weights, full.result(name).weights[:6]
            )
            np.testing.assert_array_equal(
                short.result(name).period_returns,
                full.result(name).period_returns[:6],
            )

    def test_weights_come_from_the_trailing_window_only(self, daily_series):
        # corrupting data after period t leaves the weights held at t alone
        config = _config()
        full = ep.run_backtest(daily_series, config)
        corrupted = daily_series.returns.copy()
        corrupted[100:] = np.random.default_rng(99).uniform(
            -0.4, 0.4, corrupted[100:].shape
        )
        noisy = ep.run_backtest(
            ep.ReturnSeries(daily_series.asset_ids, corrupted,
                            daily_series.periods_per_year),
            config,
        )
        res_full = full.result("entropy_full").weights
        res_noisy = noisy.result("entropy_full").weights
        np.testing.assert_array_equal(res_noisy[: 100 - 40], res_full[: 100 - 40])
        assert not np.array_equal(res_noisy[100 - 40 + 1], res_full[100 - 40 + 1])

    def test_ridge_is_the_unit_entropy_special_case(self, daily_series, monkeypatch):
        # force every estimated entropy to 1: the full strategy must then
        # coincide with the ridge strategy window by window
        import entroport.backtest as bt

        original = bt.estimate_stats

        def unit_entropy_stats(series, config=None):
            stats = original(series, config)
            return replace(stats, entropy=np.ones_like(stats.entropy))

        monkeypatch.setattr(bt, "estimate_stats", unit_entropy_stats)
        report = ep.run_backtest(
            daily_series, _config(strategies=("markowitz_ridge", "entropy_full"))
        )
        np.testing.assert_array_equal(
            report.result("entropy_full").weights,
            report.result("markowitz_ridge").weights,
        )
        assert report.result("entropy_full").qr_series == report.result(
            "markowitz_ridge"
        ).qr_series

    def test_single_asset_buy_and_hold(self):
        rng = np.random.default_rng(6)
        series = ep.ReturnSeries(("ONLY",), rng.uniform(-0.01, 0.01, (15, 1)))
        report = ep.run_backtest(series, _config(window=3))
        res = report.result("entropy_full")
        np.testing.assert_array_equal(res.weights, np.ones((12, 1)))
        assert all(math.isnan(q) for q in res.qr_series)
        np.testing.assert_allclose(
            res.value_curve[-1], np.prod(1.0 + series.returns[3:, 0]), rtol=1e-12
        )

    def test_flat_returns_stay_at_par(self):
        series = ep.ReturnSeries(("A", "B", "C"), np.zeros((12, 3)))
        report = ep.run_backtest(series, _config(window=5, strategies=("equal",)))
        res = report.result("equal")
        np.testing.assert_array_equal(res.value_curve, np.ones(8))
        assert res.realized_annual_profit == 0.0

    def test_wiped_out_portfolio_reports_nan_profit(self):
        returns = np.full((10, 3), 0.001)
        returns[7] = -3.0  # one catastrophic period
        series = ep.ReturnSeries(("A", "B", "C"), returns)
        report = ep.run_backtest(series, _config(window=5, strategies=("equal",)))
        res = report.result("equal")
        assert res.value_curve[-1] < 0
        assert math.isnan(res.realized_annual_profit)

    def test_rebalance_interval_holds_weights(self, daily_series):
        report = ep.run_backtest(daily_series, _config(rebalance_every=7))
        res = report.result("entropy_full")
        n_steps = res.weights.shape[0]
        expected_steps = tuple(range(0, n_steps, 7))
        assert report.rebalance_steps == expected_steps
        for s in range(n_steps):
            anchor = (s // 7) * 7
            np.testing.assert_array_equal(res.weights[s], res.weights[anchor])
        assert len(res.alpha_series) == len(expected_steps)

    def test_unknown_strategy_lookup(self, daily_series):
        report = ep.run_backtest(daily_series, _config(strategies=("equal",)))
        with pytest.raises(KeyError):
            report.result("entropy_full")


class TestValidation:
    def test_window_must_cover_assets(self, daily_series):
        with pytest.raises(InvalidConfig, match="too short"):
            ep.run_backtest(daily_series, _config(window=6))

    def test_needs_enough_periods(self):
        rng = np.random.default_rng(0)
        series = ep.ReturnSeries(("A", "B"), rng.standard_normal((11, 2)) * 0.01)
        with pytest.raises(InsufficientData):
            ep.run_backtest(series, _config(window=10))


class TestFailurePolicy:
    @staticmethod
    def _series_with_bad_first_window():
        rng = np.random.default_rng(14)
        returns = rng.uniform(-0.02, 0.02, (30, 3))
        returns[:6, 0] = 0.01  # constant column: entropy histogram degenerates
        return ep.ReturnSeries(("A", "B", "C"), returns)

    def test_abort_names_the_offending_period(self):
        series = self._series_with_bad_first_window()
        with pytest.raises(DegenerateSample, match="window ending at period 6"):
            ep.run_backtest(series, _config(window=6))

    def test_skip_and_hold_recovers(self):
        series = self._series_with_bad_first_window()
        report = ep.run_backtest(
            series, _config(window=6, on_error="skip_and_hold")
        )
        res = report.result("entropy_full")
        assert res.failed_steps == (0,)
        assert res.converged_series[0] is False
        assert math.isnan(res.qr_series[0])
        # equal weights stand in until the first successful solve
        np.testing.assert_array_equal(res.weights[0], np.full(3, 1 / 3))
        assert not np.array_equal(res.weights[1], np.full(3, 1 / 3))
        # the equal benchmark is untouched by the failure
        assert report.result("equal").failed_steps == ()


class TestAnnualize:
    def test_frozen_values(self):
        assert ep.annualize(0.001, 252) == pytest.approx(
            0.28643404437615216, abs=1e-15
        )
        assert ep.annualize(-0.001, 252) == pytest.approx(
            -0.22285325392786992, abs=1e-15
        )
        assert ep.annualize(0.07, 1) == pytest.approx(0.07, abs=1e-15)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            ep.annualize(0.01, 0)
        with pytest.raises(DomainError):
            ep.annualize(-1.0, 252)


class TestDeterminismAndHashes:
    def test_repeat_runs_are_identical(self, daily_series):
        config = _config()
        a = ep.run_backtest(daily_series, config)
        b = ep.run_backtest(daily_series, config)
        for name in ("equal", "markowitz_ridge", "entropy_full"):
            np.testing.assert_array_equal(
                a.result(name).value_curve, b.result(name).value_curve
            )
        assert a.config_hash == b.config_hash
        assert a.data_fingerprint == b.data_fingerprint

    def test_hashes_react_to_their_inputs(self, daily_series):
        base = ep.run_backtest(daily_series, _config())
        other_cfg = ep.run_backtest(daily_series, _config(window=41))
        assert base.config_hash != other_cfg.config_hash
        assert base.data_fingerprint == other_cfg.data_fingerprint

        bumped = daily_series.returns.copy()
        bumped[0, 0] += 1e-9
        other_data = ep.ReturnSeries(daily_series.asset_ids, bumped,
                                     daily_series.periods_per_year)
        assert fingerprint_returns(other_data) != base.data_fingerprint
        assert len(base.config_hash) == len(base.data_fingerprint) == 64


class TestSweeps:
    def test_alpha_sweep_matches_individual_backtests(self, daily_series):
        config = _config()
        grid = [0.0, 0.001, 0.005]
        table = ep.sweep_alpha(daily_series, config, grid)
        assert table.columns == (
            "alpha", "mean_profit", "profit_variance",
            "realized_annual_profit", "mean_qr",
        )
        assert [row[0] for row in table.rows] == grid
        for alpha, row in zip(grid, table.rows):
            point = ep.run_backtest(daily_series, _config(
                strategies=("entropy_full",), alpha=alpha))
            res = point.result("entropy_full")
            assert row[1] == pytest.approx(res.period_returns.mean(), rel=1e-12)
            assert row[2] == pytest.approx(res.period_returns.var(ddof=1), rel=1e-12)
            assert row[3] == pytest.approx(res.realized_annual_profit, rel=1e-12)
            qr = np.asarray(res.qr_series)
            assert row[4] == pytest.approx(qr[np.isfinite(qr)].mean(), rel=1e-12)

    def test_failed_grid_point_leaves_a_gap_row(self, daily_series):
        # 1e308 overflows the penalized covariance to non-finite entries,
        # so that single point aborts and is recorded as a gap
        table = ep.sweep_alpha(daily_series, _config(), [0.001, 1e308])
        assert table.rows[0][1] is not None
        assert table.rows[1] == (1e308, None, None, None, None)

    def test_mc_sweep_matches_backtest(self, daily_series):
        table = ep.sweep_mc(daily_series, _config(), [0.1, 0.2])
        assert table.columns == (
            "m_c_annual", "realized_annual_profit", "profit_variance")
        for m_c, row in zip([0.1, 0.2], table.rows):
            cfg = _config(strategies=("entropy_full",))
            cfg = replace(cfg, optimizer=replace(cfg.optimizer, m_c_annual=m_c))
            res = ep.run_backtest(daily_series, cfg).result("entropy_full")
            assert row[1] == pytest.approx(res.realized_annual_profit, rel=1e-12)
            assert row[2] == pytest.approx(res.period_returns.var(ddof=1), rel=1e-12)

    def test_empty_grids_rejected(self, daily_series):
        with pytest.raises(InvalidConfig):
            ep.sweep_alpha(daily_series, _config(), [])
        with pytest.raises(InvalidConfig):
            ep.sweep_mc(daily_series, _config(), [])
