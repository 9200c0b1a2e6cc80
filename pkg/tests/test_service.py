import copy

import numpy as np
import pytest
from fastapi.testclient import TestClient

import entroport as ep
from entroport.service.app import app

from conftest import SELF_CONSISTENT_PIPELINE_CONFIG, pipeline_spec_dict


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def prices_csv(client):
    resp = client.post("/synth", json={"spec": pipeline_spec_dict(5)})
    assert resp.status_code == 200
    return resp.json()["prices_csv"]


def _fixed_config(**optimizer_extra):
    return {
        "periods_per_year": 1,
        "obv": {"mode": "identity"},
        "optimizer": {"m_c_annual": 0.10,
                      "alpha": {"mode": "fixed", "value": 0.01},
                      **optimizer_extra},
    }


class TestHealth:
    def test_reports_version(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "version": ep.__version__}


class TestSynth:
    def test_deterministic_and_shaped(self, client):
        spec = pipeline_spec_dict(5)
        a = client.post("/synth", json={"spec": spec}).json()
        b = client.post("/synth", json={"spec": spec}).json()
        assert a == b
        assert a["seed"] == 5
        assert a["n_periods"] == spec["n_periods"]
        assert a["asset_ids"] == ["A00", "A01", "A02", "A03", "A04"]
        # price rows: header + periods + initial level row
        assert a["prices_csv"].count("\n") == spec["n_periods"] + 2
        assert a["returns_csv"].splitlines()[0] == "period,A00,A01,A02,A03,A04"

    def test_invalid_tail_dof(self, client):
        spec = pipeline_spec_dict(5)
        spec["tail_dof"] = [1.5] * 5
        resp = client.post("/synth", json={"spec": spec})
        assert resp.status_code == 422
        body = resp.json()
        assert body["error"] == "InvalidConfig"
        assert "exceed 2" in body["detail"]


class TestStats:
    def test_matches_direct_estimation(self, client, prices_csv):
        resp = client.post("/stats", json={"prices_csv": prices_csv,
                                           "config": {"periods_per_year": 1}})
        assert resp.status_code == 200
        body = resp.json()
        series = ep.to_returns(ep.parse_prices(prices_csv), 1)
        stats = ep.estimate_stats(series)
        np.testing.assert_allclose(body["means"], stats.mean, rtol=1e-12)
        np.testing.assert_allclose(body["variances"], stats.variance, rtol=1e-12)
        np.testing.assert_allclose(body["entropies"], stats.entropy, rtol=1e-12)
        np.testing.assert_allclose(body["covariance"], stats.covariance, rtol=1e-12)
        assert body["n_obs"] == series.n_periods
        assert body["asset_ids"] == list(series.asset_ids)

    def test_malformed_csv(self, client):
        resp = client.post("/stats", json={"prices_csv": "not,a,price,table"})
        assert resp.status_code == 422
        assert resp.json()["error"] == "MalformedInput"


class TestOptimize:
    def test_fixed_temperature_matches_core(self, client, prices_csv):
        resp = client.post("/optimize", json={"prices_csv": prices_csv,
                                              "config": _fixed_config()})
        assert resp.status_code == 200
        body = resp.json()
        assert body["alpha"] == 0.01
        assert body["alpha_report"] is None
        assert sum(body["weights"]) == pytest.approx(1.0, abs=1e-10)

        series = ep.to_returns(ep.parse_prices(prices_csv), 1)
        stats = ep.estimate_stats(series)
        view = ep.build_view(series, stats, ep.ObvConfig(mode="identity"))
        problem = ep.OptimizerProblem(
            cov=stats.covariance, means=stats.mean, entropies=stats.entropy,
            m_c=0.10, market_weights=np.full(5, 0.2), view=view,
        )
        port = ep.solve_weights(problem, 0.01)
        np.testing.assert_allclose(body["weights"], port.weights, rtol=1e-12)
        assert body["beta"] == pytest.approx(port.beta, rel=1e-12)
        assert body["risk"] == pytest.approx(port.risk, rel=1e-12)
        assert body["y2"] == pytest.approx(port.y2, rel=1e-12)

    def test_self_consistent_pins_market_qr_to_one(self, client, prices_csv):
        resp = client.post("/optimize", json={
            "prices_csv": prices_csv,
            "config": SELF_CONSISTENT_PIPELINE_CONFIG,
        })
        assert resp.status_code == 200
        body = resp.json()
        report = body["alpha_report"]
        assert report["converged"] is True
        assert abs(body["qr_market"] - 1.0) <= 1e-6
        assert report["residual"] <= 1e-6
        assert report["alpha"] == body["alpha"]
        assert len(report["trace"]) >= 2
        # each trace step is (temperature, multiplier, market quality ratio)
        assert all(len(step) == 3 for step in report["trace"])

    def test_unconverged_calibration_maps_to_409(self, client, prices_csv):
        config = copy.deepcopy(SELF_CONSISTENT_PIPELINE_CONFIG)
        config["optimizer"]["alpha"]["solver"] = "damped"
        config["optimizer"]["alpha"]["max_iter"] = 40
        resp = client.post("/optimize", json={"prices_csv": prices_csv,
                                              "config": config})
        assert resp.status_code == 409
        body = resp.json()
        assert body["error"] == "NoConvergence"
        assert len(body["trace"]) == 40

    def test_market_weights_override_and_validation(self, client, prices_csv):
        ok = client.post("/optimize", json={
            "prices_csv": prices_csv,
            "config": _fixed_config(),
            "market_weights": [0.4, 0.3, 0.1, 0.1, 0.1],
        })
        assert ok.status_code == 200

        bad = client.post("/optimize", json={
            "prices_csv": prices_csv,
            "config": _fixed_config(),
            "market_weights": [0.5, 0.5],
        })
        assert bad.status_code == 422
        assert "5 assets" in bad.json()["detail"]

    def test_file_market_weights_must_be_resolved_by_client(self, client, prices_csv):
        resp = client.post("/optimize", json={
            "prices_csv": prices_csv,
            "config": _fixed_config(market_weights={"file": "w.json"}),
        })
        assert resp.status_code == 422
        assert "client must load" in resp.json()["detail"]

    def test_unknown_config_key(self, client, prices_csv):
        resp = client.post("/optimize", json={
            "prices_csv": prices_csv,
            "config": {"optimizer": {"temperature": 1}},
        })
        assert resp.status_code == 422
        assert resp.json()["error"] == "InvalidConfig"

    def test_extra_request_fields_rejected(self, client, prices_csv):
        resp = client.post("/optimize", json={"prices_csv": prices_csv,
                                              "bogus": True})
        assert resp.status_code == 422


class TestBacktest:
    def test_runs_and_reports(self, client, prices_csv):
        config = {
            "periods_per_year": 1,
            "obv": {"mode": "identity"},
            "optimizer": {"m_c_annual": 0.10,
                          "alpha": {"mode": "fixed", "value": 0.01}},
            "backtest": {"window": 40,
                         "strategies": ["equal", "markowitz_ridge"]},
        }
        resp = client.post("/backtest", json={"prices_csv": prices_csv,
                                              "config": config, "seed": 11})
        assert resp.status_code == 200
        body = resp.json()
        assert body["window"] == 40
        assert body["seed"] == 11
        assert len(body["config_hash"]) == len(body["data_fingerprint"]) == 64
        n_steps = 300 - 40
        names = [s["name"] for s in body["strategies"]]
        assert names == ["equal", "markowitz_ridge"]
        for strat in body["strategies"]:
            assert len(strat["value_curve"]) == n_steps + 1
            assert strat["value_curve"][0] == 1.0
            assert len(strat["weights"]) == n_steps
        equal = body["strategies"][0]
        # non-solving benchmark: diagnostics are serialized as nulls
        assert set(equal["qr_series"]) == {None}
        assert equal["realized_annual_profit"] is not None

    def test_window_too_short_maps_to_422(self, client, prices_csv):
        resp = client.post("/backtest", json={
            "prices_csv": prices_csv,
            "config": {"backtest": {"window": 5}},
        })
        assert resp.status_code == 422
        assert resp.json()["error"] == "InvalidConfig"


class TestSweep:
    def test_alpha_sweep_with_gap_row(self, client, prices_csv):
        config = _fixed_config()
        config["backtest"] = {"window": 40, "strategies": ["entropy_full"]}
        config["sweep"] = {"alpha": [0.0, 1e308]}
        resp = client.post("/sweep", json={"prices_csv": prices_csv,
                                           "config": config})
        assert resp.status_code == 200
        body = resp.json()
        assert body["kind"] == "alpha"
        assert body["columns"][0] == "alpha"
        assert len(body["rows"]) == 2
        assert body["rows"][0][1] is not None
        assert body["rows"][1] == [1e308, None, None, None, None]

    def test_mc_sweep(self, client, prices_csv):
        config = _fixed_config()
        config["backtest"] = {"window": 40}
        config["sweep"] = {"mc": [0.05, 0.10]}
        resp = client.post("/sweep", json={"prices_csv": prices_csv,
                                           "config": config})
        assert resp.status_code == 200
        body = resp.json()
        assert body["kind"] == "mc"
        assert body["columns"] == ["m_c_annual", "realized_annual_profit",
                                   "profit_variance"]
        assert [row[0] for row in body["rows"]] == [0.05, 0.10]

    def test_sweep_requires_grid_section(self, client, prices_csv):
        resp = client.post("/sweep", json={"prices_csv": prices_csv,
                                           "config": _fixed_config()})
        assert resp.status_code == 422
        assert "sweep" in resp.json()["detail"]
