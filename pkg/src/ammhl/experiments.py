"""Wealth accounting, LVR and the figure-replication sweeps.

The hedged ledger on the simulation mesh is

    total = fee_revenue + dex_value_change - risk_offsetting_pnl - cex_cost

with risk_offsetting_pnl = -sum_k Q_k (F_{k+1} - F_k) (left point),
cex_cost = eta sum_k (dQ_k)^2 / dt and dex_value_change = 2 kappa (sqrt F_T - sqrt F_0).
The total is also computed directly from cash and inventory, with the CEX
trade over step k executed at F_{k+1}; summation by parts makes the two agree
up to rounding.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import csvio
from .config import ExperimentConfig
from .errors import ShapeError
from .hedging import HedgeParams, HedgePath, solve_hedge
from .liquidity_opt import StageOneInputs, StageOneResult, stage_one_closed_form
from .market_dynamics import PathBundle, simulate_paths
from .noise_flow import FeeAccrual, simulate_fee_accrual

WEALTH_COLUMNS = ("path", "fee_revenue", "dex_value_change", "risk_offsetting_pnl",
                  "cex_cost", "total", "normalized_total", "total_direct", "lvr")


@dataclass(frozen=True)
class WealthRecord:
    path: int
    fee_revenue: float
    dex_value_change: float
    risk_offsetting_pnl: float
    cex_cost: float
    total: float
    normalized_total: float


@dataclass(frozen=True, eq=False)
class WealthTable:
    """Column-oriented wealth records; ``records()`` yields one row per path."""

    fee_revenue: np.ndarray
    dex_value_change: np.ndarray
    risk_offsetting_pnl: np.ndarray
    cex_cost: np.ndarray
    total: np.ndarray
    normalized_total: np.ndarray
    total_direct: np.ndarray
    lvr: np.ndarray
    x0: float

    def __len__(self) -> int:
        return len(self.total)

    def records(self):
        for p in range(len(self)):
            yield WealthRecord(p, float(self.fee_revenue[p]), float(self.dex_value_change[p]),
                               float(self.risk_offsetting_pnl[p]), float(self.cex_cost[p]),
                               float(self.total[p]), float(self.normalized_total[p]))

    def ledger_gap(self) -> float:
        """Largest pathwise |direct total - component total|."""
        return float(np.max(np.abs(self.total_direct - self.total)))

    def rows(self):
        cols = (self.fee_revenue, self.dex_value_change, self.risk_offsetting_pnl, self.cex_cost,
                self.total, self.normalized_total, self.total_direct, self.lvr)
        for p in range(len(self)):
            yield (p,) + tuple(c[p] for c in cols)


def lvr_rate(f, kappa, sigma):
    """Instantaneous convexity cost kappa sigma^2 sqrt(F) / 4 of a constant-product position."""
    return 0.25 * np.asarray(kappa) * np.asarray(sigma) ** 2 * np.sqrt(f)


def expected_dex_value_change(kappa: float, f0: float, sigma: float, T: float) -> float:
    """E[2 kappa (sqrt F_T - sqrt F_0)] = 2 kappa sqrt(F_0) (exp(-sigma^2 T / 8) - 1) for A = 0."""
    return 2.0 * kappa * math.sqrt(f0) * math.expm1(-sigma * sigma * T / 8.0)


def wealth_decomposition(paths: PathBundle, hedge: HedgePath | None, fees: FeeAccrual | np.ndarray,
                         kappa: float, hp: HedgeParams) -> WealthTable:
    """Per-path wealth ledger.

    ``hedge=None`` gives the unhedged variant, in which the CEX position stays
    at Q_0 = -Y_0 and the risk-offsetting term reduces to -Q_0 (F_T - F_0).
    ``fees`` is either a :class:`FeeAccrual` (realised fees are used) or a
    vector of per-path fee revenue.
    """
    f = paths.f
    n, m1 = f.shape
    dt = paths.dt
    y = kappa / np.sqrt(f)
    y0 = y[:, 0]
    if hedge is None:
        q = np.broadcast_to(np.asarray(hp.initial_inventory(y0), float)[:, None], f.shape)
    else:
        if hedge.q.shape != f.shape:
            raise ShapeError("hedge path and price paths are on different grids")
        if abs(hedge.kappa - kappa) > 1e-12 * max(1.0, kappa):
            raise ShapeError("hedge was computed for a different kappa")
        q = hedge.q
    if isinstance(fees, FeeAccrual):
        if fees.realized.shape != f.shape:
            raise ShapeError("fee accrual and price paths are on different grids")
        fee = fees.realized[:, -1]
    else:
        fee = np.asarray(fees, float)
        if fee.shape != (n,):
            raise ShapeError("fee vector must have one entry per path")

    df = np.diff(f, axis=1)
    dq = np.diff(q, axis=1)
    x0 = kappa * np.sqrt(f[:, 0])
    x_t = kappa * np.sqrt(f[:, -1])
    dex = 2.0 * kappa * (np.sqrt(f[:, -1]) - np.sqrt(f[:, 0]))
    risk_off = -np.sum(q[:, :-1] * df, axis=1)
    cex_cost = hp.eta * np.sum(dq * dq, axis=1) / dt
    total = fee + dex - risk_off - cex_cost

    # Direct accounting: DEX cash and reserves, plus CEX inventory marked to
    # market less the cash spent buying dQ_k at F_{k+1} and the quadratic cost.
    cash_cex = -np.sum(f[:, 1:] * dq, axis=1) - cex_cost
    wealth_T = fee + x_t + y[:, -1] * f[:, -1] + q[:, -1] * f[:, -1] + cash_cex
    wealth_0 = x0 + y0 * f[:, 0] + q[:, 0] * f[:, 0]
    direct = wealth_T - wealth_0

    lv = lvr_rate(f, kappa, paths.model.sigma)
    lvr = np.sum(0.5 * (lv[:, 1:] + lv[:, :-1]), axis=1) * dt
    x0s = float(kappa * math.sqrt(paths.model.f0))
    return WealthTable(fee, dex, risk_off, cex_cost, total, total / x0, direct, lvr, x0s)


# --- figure sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    value: float | None
    result: StageOneResult
    wealth: WealthTable | None


def stage_one_for(cfg: ExperimentConfig) -> StageOneResult:
    """Closed-form stage one.  The equilibrium depth is defined without transient
    impact, so any configured ``c`` is dropped here (it still drives the hedge)."""
    hp = replace(cfg.hedge_params(), c=0.0)
    inputs = StageOneInputs(cfg.market_model(), hp, cfg.flow.gamma, cfg.market.kappa_max)
    return stage_one_closed_form(inputs)


def resolve_kappa(cfg: ExperimentConfig) -> tuple[float, StageOneResult | None]:
    """Depth to simulate at: the configured number, or the closed-form kappa*."""
    k = cfg.fixed_kappa()
    if k is not None:
        return k, None
    res = stage_one_for(cfg)
    return res.kappa_star, res


def distribution_run(cfg: ExperimentConfig, kappa: float, seed: int | None = None,
                     threads: int | None = None):
    """Simulate, hedge and account for one configuration at depth ``kappa``."""
    model, hp = cfg.market_model(), cfg.hedge_params()
    paths = simulate_paths(model, cfg.sim_grid(seed), kappa=kappa, threads=threads)
    hedge = solve_hedge(paths, kappa, hp, model, cfg.grid.dre_mesh)
    fees = simulate_fee_accrual(paths, cfg.flow_params(), kappa, threads=threads)
    return paths, hedge, fees, wealth_decomposition(paths, hedge, fees, kappa, hp)


def _tag(value: float) -> str:
    return format(value, ".6g").replace("+", "").replace("-", "m").replace(".", "p")


def run_figure_sweep(cfg: ExperimentConfig, out_dir: str, seed: int | None = None,
                     threads: int | None = None) -> list[str]:
    """Write the sweep artifacts under ``out_dir`` and return their paths.

    * ``liquidity_curve.csv``: kappa_ref, kappa* and their ratio per sweep value
      (one row when the sweep list is empty);
    * ``sample_paths[_tag].csv``: Y, Q and their values for the first
      ``outputs.sample_paths`` paths;
    * ``wealth[_tag].csv`` when ``outputs.distributions`` is set.
    """
    text = cfg.to_text()
    values = list(cfg.sweep.values) or [None]
    points: list[SweepPoint] = []
    written: list[str] = []
    for v in values:
        point_cfg = cfg if v is None else cfg.with_sweep_value(v)
        res = stage_one_for(point_cfg)
        wealth = None
        fixed = point_cfg.fixed_kappa()
        kappa = res.kappa_star if fixed is None else fixed
        need_paths = cfg.outputs.sample_paths > 0 or cfg.outputs.distributions
        if need_paths and kappa > 0:
            paths, hedge, fees, wealth = distribution_run(point_cfg, kappa, seed, threads)
            suffix = "" if v is None else f"_{cfg.sweep.parameter}_{_tag(v)}"
            extra = {"kappa": csvio.fmt(kappa)} if v is None else \
                {"kappa": csvio.fmt(kappa), "sweep_point": f"{cfg.sweep.parameter}={csvio.fmt(v)}"}
            k = min(cfg.outputs.sample_paths, paths.n_paths)
            if k > 0:
                y = paths.y[:k]
                q = hedge.q[:k]
                f = paths.f[:k]
                written.append(csvio.write_matrix_csv(
                    os.path.join(out_dir, f"sample_paths{suffix}.csv"),
                    ("path", "t", "F", "Y", "Q", "Y_value", "Q_value"),
                    np.arange(k), paths.times, (f, y, q, y * f, q * f), text, extra))
            if cfg.outputs.distributions:
                written.append(csvio.write_csv(os.path.join(out_dir, f"wealth{suffix}.csv"),
                                               WEALTH_COLUMNS, wealth.rows(), text, extra))
            else:
                wealth = None
        points.append(SweepPoint(v, res, wealth))

    param = cfg.sweep.parameter or "none"
    rows = []
    for pt in points:
        r = pt.result
        rows.append((param, float("nan") if pt.value is None else pt.value, r.kappa_ref,
                     r.kappa_star, r.scaling, r.frak_A, r.frak_B, r.shut_down, r.budget_bound))
    written.insert(0, csvio.write_csv(
        os.path.join(out_dir, "liquidity_curve.csv"),
        ("parameter", "value", "kappa_ref", "kappa_star", "scaling", "frak_A", "frak_B",
         "shut_down", "budget_bound"), rows, text))
    return written
