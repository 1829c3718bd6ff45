import math
from dataclasses import replace

import numpy as np
import pytest

from ammhl.errors import ConsistencyError
from ammhl.hedging import HedgeParams
from ammhl.liquidity_opt import (StageOneInputs, denominator_constant, kappa_ref_closed_form,
                                 kappa_ref_general, kappa_ref_raw, kappa_star_closed_form_A0,
                                 kappa_star_constant_signal, kappa_star_with_signal, mc_objective,
                                 optimize_kappa_mc, quadratic_argmax, stage_one_closed_form)
from ammhl.market_dynamics import MarketModel, SignalModel, SimGrid, simulate_paths
from oracles import denominator, reference_and_equilibrium

# Frozen output of tests/oracles.py at the figure-1 parameters (40 digits).
FIG1_KAPPA_REF = 9487.804604073306878789
FIG1_FRAK_B = -0.00047876985399411279549
FIG1_KAPPA_STAR = 15287.350300343503219568


def test_oracle_reproduces_frozen_values():
    kref, fb, ks, _ = reference_and_equilibrium(0.1, 1.0, 1e-2, 0.1, 0.2)
    assert kref == pytest.approx(FIG1_KAPPA_REF, rel=1e-15)
    assert fb == pytest.approx(FIG1_FRAK_B, rel=1e-13)
    assert ks == pytest.approx(FIG1_KAPPA_STAR, rel=1e-15)


def test_reference_liquidity_fig1(fig1):
    model, hp, gamma = fig1
    assert kappa_ref_closed_form(model, gamma, hp.phi) == pytest.approx(FIG1_KAPPA_REF, rel=1e-10)


def test_equilibrium_liquidity_fig1(fig1):
    model, hp, gamma = fig1
    ks, fb, scaling = kappa_star_closed_form_A0(model, gamma, hp)
    assert ks == pytest.approx(FIG1_KAPPA_STAR, rel=1e-10)
    assert fb == pytest.approx(FIG1_FRAK_B, rel=1e-9)
    assert scaling == pytest.approx(FIG1_KAPPA_STAR / FIG1_KAPPA_REF, rel=1e-10)


@pytest.mark.parametrize("sigma,T,eta,ratio,gamma", [
    (0.2, 0.3, 1e-2, 10.0, 0.1), (0.2, 0.3, 1e-2, 1e3, 0.1), (0.3, 2.0, 1e-3, 1.0, 0.5),
    (0.05, 1.0, 1e-2, 100.0, 0.2)])
def test_equilibrium_against_oracle_elsewhere(sigma, T, eta, ratio, gamma):
    kref, fb, ks, _ = reference_and_equilibrium(sigma, T, eta, ratio * eta, gamma)
    model = MarketModel(1.0, sigma, T)
    hp = HedgeParams.from_ratio(eta, ratio)
    got, got_b, _ = kappa_star_closed_form_A0(model, gamma, hp)
    assert kappa_ref_closed_form(model, gamma, hp.phi) == pytest.approx(kref, rel=1e-10)
    assert got_b == pytest.approx(fb, rel=1e-8, abs=1e-15)
    assert got == pytest.approx(ks, rel=1e-10)
    if fb >= 0:
        assert got <= kappa_ref_closed_form(model, gamma, hp.phi)


def test_general_reference_formula_matches_closed_form(fig1):
    model, hp, gamma = fig1
    assert kappa_ref_general(model, gamma, hp.phi) == pytest.approx(FIG1_KAPPA_REF, rel=1e-10)
    m2 = MarketModel(2.5, 0.3, 0.7)
    assert kappa_ref_general(m2, 0.4, 0.05) == pytest.approx(kappa_ref_raw(m2, 0.4, 0.05), rel=1e-10)


def test_denominator_constant_positive_and_accurate():
    for x in np.linspace(0.02, 2.0, 100):
        got = denominator_constant(float(x))
        assert got > 0
        assert got == pytest.approx(denominator(float(x)), rel=1e-13)
    for x in (1e-8, 1e-4, 0.3, 0.49, 0.51):
        assert denominator_constant(x) == pytest.approx(denominator(x), rel=1e-13)


def test_cancellation_safe_small_variance():
    x = 1e-6
    model = MarketModel(1.0, math.sqrt(x), 1.0)
    got = kappa_ref_closed_form(model, 0.2, 0.1)
    assert got == pytest.approx(8 * 1.2 / (0.1 * x), rel=0.01)


def test_shut_down_boundary():
    # the numerator 8 gamma (1 - e) - sigma^2 (1 - 2e), e = exp(-sigma^2 T / 8), has a
    # positive root in gamma only when sigma^2 T > 8 ln 2
    sigma = 3.0
    e = math.exp(-sigma ** 2 / 8)
    root = sigma ** 2 * (1 - 2 * e) / (8 * (1 - e))
    model = MarketModel(1.0, sigma, 1.0)
    assert root > 0
    assert kappa_ref_raw(model, root, 0.1) == pytest.approx(0.0, abs=1e-12)
    assert kappa_ref_closed_form(model, root * 0.99, 0.1) == 0.0
    assert kappa_ref_closed_form(model, root * 1.01, 0.1) > 0


def test_negative_numerator_clamps_to_zero():
    # sigma^2 (1 - 2 e^{-x/8}) > 8 gamma (1 - e^{-x/8}) needs 1 - 2 e^{-x/8} > 0, i.e. x > 8 ln 2
    model = MarketModel(1.0, 3.0, 1.0)
    assert kappa_ref_raw(model, 0.0, 0.1) < 0
    assert kappa_ref_closed_form(model, 0.0, 0.1) == 0.0
    res = stage_one_closed_form(StageOneInputs(model, HedgeParams(0.01, 0.1), 0.0))
    assert res.kappa_star == 0.0 and res.shut_down


def test_slow_tracking_limit_scaling_tends_to_one(fig1):
    model, _, gamma = fig1
    _, _, scaling = kappa_star_closed_form_A0(model, gamma, HedgeParams.from_rate(1e-2, 1e-4))
    assert scaling == pytest.approx(1.0, abs=1e-6)


def test_constant_signal_route_reduces_to_zero_signal(fig1):
    model, hp, gamma = fig1
    res = kappa_star_constant_signal(MarketModel(1.0, 0.1, 1.0, SignalModel.constant(0.0)), gamma, hp)
    assert res.frak_A == 0.0
    assert res.kappa_star == pytest.approx(FIG1_KAPPA_STAR, rel=1e-10)
    assert res.kappa_ref == pytest.approx(FIG1_KAPPA_REF, rel=1e-10)


def _fig5(ratio, a):
    return MarketModel(1.0, 0.2, 1.0, SignalModel.constant(a)), HedgeParams.from_ratio(1e-6, ratio)


@pytest.mark.parametrize("ratio", [1.0, 100.0])
def test_signal_comparative_statics(ratio):
    base = kappa_star_constant_signal(*_fig5(ratio, 0.0)[:1], 0.2, _fig5(ratio, 0.0)[1]).kappa_star
    small = [kappa_star_constant_signal(_fig5(ratio, a)[0], 0.2, _fig5(ratio, a)[1]).kappa_star
             for a in (0.005, 0.01, 0.02)]
    large = [kappa_star_constant_signal(_fig5(ratio, a)[0], 0.2, _fig5(ratio, a)[1]).kappa_star
             for a in (-1.0, -0.5, 0.5, 1.0)]
    assert all(k > base for k in small)
    assert all(k < base for k in large)


def test_frak_b_positivity_inequality(fig1):
    model, hp, gamma = fig1
    res = kappa_star_constant_signal(model, gamma, hp)
    assert res.frak_B + res.variance_term >= 0


def test_mc_kernels_agree_with_closed_form_deterministic_signal():
    """OU with xi = 0 started at its mean is the constant signal; MC kernels must agree."""
    a = 0.05
    m_ou = MarketModel(1.0, 0.2, 1.0, SignalModel.ou(1.0, a, 0.0, a))
    m_c = MarketModel(1.0, 0.2, 1.0, SignalModel.constant(a))
    hp = HedgeParams.from_ratio(1e-2, 10.0)
    p = simulate_paths(m_ou, SimGrid(200, 4000, 17))
    mc = kappa_star_with_signal(StageOneInputs(m_ou, hp, 0.2), p)
    ref = kappa_star_constant_signal(m_c, 0.2, hp)
    assert abs(mc.frak_A - ref.frak_A) <= 3 * mc.frak_A_se + 1e-3 * abs(ref.frak_A)
    assert abs(mc.frak_B - ref.frak_B) <= 3 * mc.frak_B_se + 1e-3 * abs(ref.frak_B)
    assert abs(mc.kappa_star - ref.kappa_star) <= 3 * mc.kappa_star_se + 1e-3 * ref.kappa_star


def test_ou_signal_positivity_and_consistency():
    m = MarketModel(1.0, 0.2, 1.0, SignalModel.ou(2.0, 0.0, 0.3, 0.1))
    hp = HedgeParams.from_ratio(1e-2, 10.0)
    p = simulate_paths(m, SimGrid(200, 2000, 5))
    res = kappa_star_with_signal(StageOneInputs(m, hp, 0.2), p)
    assert 0 <= res.kappa_star <= 1e9
    assert res.frak_B + res.variance_term >= -3 * res.frak_B_se


def test_zero_depth_value_is_zero(fig1):
    model, hp, gamma = fig1
    p = simulate_paths(model, SimGrid(50, 20, 1))
    est = mc_objective(0.0, StageOneInputs(model, hp, gamma), p)
    assert est.value == 0.0 and est.decomposition == 0.0


def test_direct_criterion_matches_operator_decomposition(fig1):
    model, hp, gamma = fig1
    p = simulate_paths(model, SimGrid(500, 4000, 21))
    est = mc_objective(1.0, StageOneInputs(model, hp, gamma), p)
    assert abs(est.value - est.decomposition) <= 3 * est.diff_se


def test_value_curve_has_interior_maximum_near_closed_form(fig1):
    model, hp, gamma = fig1
    p = simulate_paths(model, SimGrid(200, 2000, 8))
    inputs = StageOneInputs(model, hp, gamma, kappa_max=2 * FIG1_KAPPA_STAR)
    res = optimize_kappa_mc(inputs, p, 21, refine=False)
    vals = np.array([v for _, v, _ in res.mc_value_curve])
    j = int(np.argmax(vals))
    assert 0 < j < 20
    assert not res.shut_down and not res.budget_bound
    assert abs(res.argmax_mc / FIG1_KAPPA_STAR - 1) <= 0.15
    # concave shape: second differences negative
    assert np.all(np.diff(vals, 2) < 0)


def test_no_flow_no_signal_optimum_is_empty_pool(fig1):
    model, hp, _ = fig1
    p = simulate_paths(model, SimGrid(200, 1000, 2))
    inputs = StageOneInputs(model, hp, 0.0, kappa_max=2e4)
    res = optimize_kappa_mc(inputs, p, 11, include_deposit=False)
    assert res.argmax_mc == 0.0 and res.shut_down


def test_higher_costs_at_fixed_tracking_rate_lower_supply(fig1):
    model, _, gamma = fig1
    closed, mc = [], []
    p = simulate_paths(model, SimGrid(200, 2000, 4))
    for eta in (5e-3, 1e-2, 2e-2):
        hp = HedgeParams.from_ratio(eta, 10.0)
        closed.append(kappa_star_closed_form_A0(model, gamma, hp)[0])
        mc.append(quadratic_argmax(StageOneInputs(model, hp, gamma), p))
    assert closed[0] > closed[1] > closed[2]
    assert mc[0] > mc[1] > mc[2]


def test_quadratic_argmax_agrees_with_grid(fig1):
    model, hp, gamma = fig1
    p = simulate_paths(model, SimGrid(200, 1000, 8))
    inputs = StageOneInputs(model, hp, gamma, kappa_max=4e4)
    grid = optimize_kappa_mc(inputs, p, 9)
    assert quadratic_argmax(inputs, p) == pytest.approx(grid.argmax_mc, rel=1e-4)


def test_result_json_echoes_inputs(fig1):
    model, hp, gamma = fig1
    res = stage_one_closed_form(StageOneInputs(model, hp, gamma))
    import json
    blob = json.loads(res.to_json())
    assert blob["inputs"]["sigma"] == 0.1 and blob["inputs"]["gamma"] == 0.2
    assert blob["kappa_star"] == res.kappa_star
