import json
import math
import os
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ammhl import csvio
from ammhl.cli import main
from ammhl.config import SWEEP_WHITELIST, ExperimentConfig, figure_defaults
from ammhl.errors import ConfigError, ShapeError
from ammhl.experiments import (expected_dex_value_change, lvr_rate, run_figure_sweep,
                               wealth_decomposition)
from ammhl.hedging import HedgeParams, HedgePath, hedge_path_no_transient
from ammhl.market_dynamics import MarketModel, SimGrid, simulate_paths
from ammhl.noise_flow import FlowParams, expected_fee_integral, simulate_fee_accrual
from conftest import within_se

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "liquidity_fig1.json")


def _setup(n_paths=200, n_steps=200, kappa=3.0, sigma=0.1, seed=3):
    m = MarketModel(1.0, sigma, 1.0, allow_degenerate=sigma == 0)
    hp = HedgeParams.from_ratio(1e-2, 10.0)
    p = simulate_paths(m, SimGrid(n_steps, n_paths, seed), kappa=kappa)
    fees = simulate_fee_accrual(p, FlowParams.from_gamma(0.2), kappa)
    return m, hp, p, fees


def test_ledger_identity_and_cost_sign():
    m, hp, p, fees = _setup()
    h = hedge_path_no_transient(p, 3.0, hp, m)
    w = wealth_decomposition(p, h, fees, 3.0, hp)
    assert w.ledger_gap() <= 1e-10
    assert np.all(w.cex_cost >= 0)
    assert np.allclose(w.normalized_total, w.total / (3.0 * math.sqrt(1.0)), rtol=0, atol=1e-15)
    recs = list(w.records())
    assert len(recs) == 200 and recs[7].path == 7
    r = recs[7]
    assert r.total == pytest.approx(r.fee_revenue + r.dex_value_change - r.risk_offsetting_pnl - r.cex_cost,
                                    abs=1e-10)


def test_idle_hedge_reproduces_unhedged_ledger():
    m, hp, p, fees = _setup()
    y0 = p.y[:, 0]
    q = np.repeat((-y0)[:, None], p.f.shape[1], axis=1)
    zero = np.zeros_like(q)
    idle = HedgePath(p.times, zero, q, zero, zero, zero, 3.0, -y0)
    a = wealth_decomposition(p, idle, fees, 3.0, hp)
    b = wealth_decomposition(p, None, fees, 3.0, hp)
    assert np.array_equal(a.total, b.total)
    # the unhedged CEX position term is -Q0 (F_T - F_0)
    assert np.allclose(b.risk_offsetting_pnl, y0 * (p.f[:, -1] - p.f[:, 0]), rtol=1e-12, atol=1e-14)
    assert np.all(b.cex_cost == 0)


def test_frozen_price_limits():
    m, hp, p, _ = _setup(n_paths=5, sigma=0.0)
    w = wealth_decomposition(p, None, np.full(5, 0.0), 3.0, hp)
    assert np.all(w.dex_value_change == 0)
    assert expected_fee_integral(0.2, 3.0, 1.0, 1e-9, 1.0) == pytest.approx(0.2 * 3.0, rel=1e-12)


def test_grid_mismatch_raises():
    m, hp, p, fees = _setup(n_paths=4)
    _, _, p2, _ = _setup(n_paths=4, n_steps=100)
    h = hedge_path_no_transient(p2, 3.0, hp, m)
    with pytest.raises(ShapeError):
        wealth_decomposition(p, h, fees, 3.0, hp)
    with pytest.raises(ShapeError):
        wealth_decomposition(p, None, np.zeros(3), 3.0, hp)


def test_lvr_rate_examples():
    assert lvr_rate(1.0, 4.0, 0.0) == 0.0
    assert lvr_rate(1.0, 4.0, 0.2) == pytest.approx(0.04, rel=1e-14)
    # closed-form time integral equals minus the expected DEX value change
    k, s, T = 1.0, 0.1, 1.0
    integral = k * s * s / 4 * (8 / (s * s)) * (1 - math.exp(-s * s * T / 8))
    assert integral == pytest.approx(-expected_dex_value_change(k, 1.0, s, T), rel=1e-12)


def test_dex_value_change_and_lvr_against_lognormal_oracle():
    m = MarketModel(1.0, 0.1, 1.0)
    p = simulate_paths(m, SimGrid(100, 100_000, 13), kappa=1.0)
    w = wealth_decomposition(p, None, np.zeros(p.n_paths), 1.0, HedgeParams(0.01, 0.1))
    target = 2 * math.expm1(-0.01 / 8)
    ok, mean, se = within_se(w.dex_value_change, target)
    assert ok, (mean, se, target)
    # per path dex + int lvr is the stochastic integral of kappa sigma sqrt(F) dW
    ok, mean, se = within_se(w.dex_value_change + w.lvr, 0.0)
    assert ok, (mean, se)
    ok, mean, se = within_se(w.lvr, -target)
    assert ok, (mean, se)


# --- configuration ------------------------------------------------------------------

floats = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=100, deadline=None)
@given(sigma=floats, eta=floats, gamma=floats, seed=st.integers(0, 2 ** 63),
       values=st.lists(floats, max_size=5), dist=st.booleans())
def test_config_round_trip(sigma, eta, gamma, seed, values, dist):
    cfg = ExperimentConfig()
    cfg = replace(cfg, market=replace(cfg.market, sigma=sigma), hedge=replace(cfg.hedge, eta=eta),
                  flow=replace(cfg.flow, gamma=gamma), grid=replace(cfg.grid, seed=seed),
                  sweep=replace(cfg.sweep, parameter="ratio" if values else "", values=tuple(values)),
                  outputs=replace(cfg.outputs, distributions=dist))
    assert ExperimentConfig.from_text(cfg.to_text()) == cfg


def test_config_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[sweep]\nparameter = fee_pi\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[market]\nsigma = fast\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[nowhere]\nx = 1\n")
    with pytest.raises(ConfigError):
        ExperimentConfig().with_override("market.volatility", "0.2")
    with pytest.raises(ConfigError):
        ExperimentConfig().with_override("market.sigma", "-1").market_model()
    assert set(SWEEP_WHITELIST) >= {"ratio", "eta", "sigma", "gamma", "a"}


def test_figure_defaults_match_captions():
    f1, f2, f4, f5 = (figure_defaults(k) for k in (1, 2, 4, 5))
    assert (f1.market.sigma, f1.market.horizon_T, f1.hedge.eta, f1.hedge.phi / f1.hedge.eta,
            f1.flow.gamma) == (0.1, 1.0, 1e-2, pytest.approx(10.0), 0.2)
    assert (f2.flow.gamma, f2.market.sigma, f2.market.horizon_T) == (0.1, 0.2, 0.3)
    assert (f4.flow.gamma, f4.grid.n_paths, f4.grid.n_steps) == (0.25, 2000, 1000)
    assert (f5.market.sigma, f5.hedge.eta, f5.flow.gamma) == (0.2, 1e-6, 0.2)


# --- sweeps and CLI -----------------------------------------------------------------


def test_empty_sweep_writes_one_csv(tmp_path):
    files = run_figure_sweep(ExperimentConfig(), str(tmp_path))
    assert len(files) == 1 and sorted(os.listdir(tmp_path)) == ["liquidity_curve.csv"]
    cols, data = csvio.read_csv(files[0])
    assert cols[2:4] == ["kappa_ref", "kappa_star"] and data.shape[0] == 1


def test_ratio_sweep_columns(tmp_path):
    cfg = ExperimentConfig().with_override("sweep.parameter", "ratio") \
        .with_override("sweep.values", " ".join(repr(float(v)) for v in np.logspace(0, 3, 7)))
    files = run_figure_sweep(cfg, str(tmp_path))
    text = open(files[0]).read()
    assert text.startswith("# ammhl v0.1.0\n") and "# [hedge]" in text
    cols, data = csvio.read_csv(files[0])
    kref, ks, fb = data[:, 2], data[:, 3], data[:, 6]
    assert np.all(np.diff(ks) < 0)
    assert np.all((fb < 0) | (ks <= kref))


def test_sweep_with_paths_and_distributions(tmp_path):
    cfg = ExperimentConfig.from_text(
        "[sweep]\nparameter = a\nvalues = -0.5, 0.05\n[grid]\nn_paths = 20\nn_steps = 50\n"
        "[outputs]\nsample_paths = 2\ndistributions = true\n")
    files = run_figure_sweep(cfg, str(tmp_path))
    names = sorted(os.path.basename(f) for f in files)
    assert names == ["liquidity_curve.csv", "sample_paths_a_0p05.csv", "sample_paths_a_m0p5.csv",
                     "wealth_a_0p05.csv", "wealth_a_m0p5.csv"]
    cols, data = csvio.read_csv(str(tmp_path / "wealth_a_0p05.csv"))
    assert data.shape[0] == 20
    assert np.max(np.abs(data[:, cols.index("total")] - data[:, cols.index("total_direct")])) <= 1e-9 * \
        np.max(np.abs(data[:, cols.index("total")]))
    cols, data = csvio.read_csv(str(tmp_path / "sample_paths_a_m0p5.csv"))
    assert cols == ["path", "t", "F", "Y", "Q", "Y_value", "Q_value"] and data.shape[0] == 2 * 51


def test_csv_floats_round_trip(tmp_path):
    vals = np.random.default_rng(0).standard_normal(50) * 1e5
    path = csvio.write_csv(str(tmp_path / "x.csv"), ["v"], ([v] for v in vals), "[a]\nb = 1")
    _, data = csvio.read_csv(path)
    assert np.array_equal(data[:, 0], vals)


def _run(args):
    return main(list(args))


def test_cli_simulate_smoke(tmp_path, capsys):
    cfg = tmp_path / "base.cfg"
    cfg.write_text("[grid]\nn_paths = 4\nn_steps = 10\n")
    assert _run(["simulate", "--config", str(cfg), "--set", "market.sigma=0.2", "--out", str(tmp_path / "run1")]) == 0
    cols, data = csvio.read_csv(str(tmp_path / "run1" / "paths.csv"))
    assert cols == ["path", "t", "F", "A", "Y"] and data.shape == (44, 5)
    cols, _ = csvio.read_csv(str(tmp_path / "run1" / "fees.csv"))
    assert cols == ["path", "t", "cum_fee_realized", "cum_fee_rate"]
    assert "sigma = 0.2" in (tmp_path / "run1" / "paths.csv").read_text()


def test_cli_hedge_path_schema(tmp_path):
    assert _run(["hedge-path", "--set", "grid.n_paths=2", "grid.n_steps=8", "hedge.c=0.01",
                 "--out", str(tmp_path)]) == 0
    cols, data = csvio.read_csv(str(tmp_path / "hedge.csv"))
    assert cols == ["path", "t", "nu", "Q", "I", "Z", "ell"] and data.shape[0] == 18


def test_cli_impact_precondition_exit_code(tmp_path, capsys):
    code = _run(["riccati", "--set", "hedge.c=1", "hedge.eta=0.01", "hedge.phi=0.1", "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("ammhl-error status=2 code=precondition")


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert _run(["sweep", "--set", "sweep.parameter=fee_pi", "--out", str(tmp_path)]) == 2
    assert _run(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert _run(["launch"]) == 2
    assert _run(["simulate", "--set", "grid.n_paths=0", "--out", str(tmp_path)]) == 2
    lines = capsys.readouterr().err.strip().splitlines()
    assert len(lines) == 4 and all(l.startswith("ammhl-error status=2") for l in lines)


def test_cli_numeric_error_exit_code(tmp_path, capsys, monkeypatch):
    from ammhl import cli
    from ammhl.errors import ConvergenceError

    def boom(*a, **k):
        raise ConvergenceError("did not converge")

    monkeypatch.setitem(cli._DISPATCH, "riccati", boom)
    assert _run(["riccati", "--out", str(tmp_path)]) == 3
    assert "code=convergence" in capsys.readouterr().err


def test_cli_riccati_outputs(tmp_path):
    assert _run(["riccati", "--set", "hedge.c=0.02", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["residual_sup"] <= 1e-8 and summary["mesh"] == 4000
    cols, data = csvio.read_csv(str(tmp_path / "riccati.csv"))
    assert cols == ["t", "P11", "P12", "P21", "P22"] and data[-1, 2] == pytest.approx(1.0)


def test_cli_liquidity_matches_golden(tmp_path):
    assert _run(["liquidity", "--out", str(tmp_path)]) == 0
    got = json.loads((tmp_path / "liquidity.json").read_text())
    golden = json.load(open(GOLDEN))
    assert got["kappa_star"] == pytest.approx(golden["kappa_star"], rel=1e-12)
    assert got["kappa_ref"] == pytest.approx(golden["kappa_ref"], rel=1e-12)
    assert got["inputs"]["phi"] == pytest.approx(0.1)


def test_cli_liquidity_value_curve(tmp_path):
    assert _run(["liquidity", "--set", "grid.kappa_grid_n=5", "grid.n_paths=100", "grid.n_steps=50",
                 "--out", str(tmp_path)]) == 0
    cols, data = csvio.read_csv(str(tmp_path / "value_curve.csv"))
    assert cols == ["kappa", "value", "se"] and data.shape == (5, 3)
    got = json.loads((tmp_path / "liquidity.json").read_text())
    assert len(got["mc_value_curve"]) == 5 and got["argmax_mc"] is not None


def test_cli_seed_override_changes_paths(tmp_path):
    base = ["simulate", "--set", "grid.n_paths=2", "grid.n_steps=5"]
    assert _run(base + ["--out", str(tmp_path / "a")]) == 0
    assert _run(base + ["--seed", "9", "--out", str(tmp_path / "b")]) == 0
    _, a = csvio.read_csv(str(tmp_path / "a" / "paths.csv"))
    _, b = csvio.read_csv(str(tmp_path / "b" / "paths.csv"))
    assert not np.array_equal(a[:, 2], b[:, 2])
    assert "seed = 9" in (tmp_path / "b" / "paths.csv").read_text()


def test_readme_config_block_parses():
    import pathlib
    import re

    text = (pathlib.Path(__file__).parents[1] / "README.md").read_text()
    block = re.search(r"```ini\n(.*?)```", text, re.S).group(1)
    cfg = ExperimentConfig.from_text(block)
    assert cfg.market.signal == "zero" and cfg.sweep.values == (1.0, 10.0, 100.0)
