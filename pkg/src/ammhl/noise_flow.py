"""Noise liquidity takers and the fee revenue they generate.

A noise taker arrives at Poisson rate ``lam`` with a private valuation whose
absolute value |V| lies in [pi, 1].  Trading delta units at a convex pool
yields surplus delta (|V| - pi) F - delta^2 d11_phi / 2, maximised at
delta* = (|V| - pi) F / d11_phi.  The LP collects pi * delta* * F per trade,
which in expectation is the rate Pi = gamma * kappa * sqrt(F) for the
constant-product curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import rng
from ._numerics import int_exp
from ._parallel import run_chunks
from .amm_core import CPM
from .errors import DomainError
from .market_dynamics import PathBundle

ValuationLaw = Literal["uniform", "two_point", "point_mass"]


@dataclass(frozen=True)
class FlowParams:
    """Arrival intensity, fee rate and the law of |V|.

    ``uniform`` draws |V| from U[pi, 1]; ``two_point`` puts mass on
    {pi + eps, 1} with weights chosen so the mean equals ``v_bar``;
    ``point_mass`` sets |V| = v_bar.
    """

    lam: float
    fee_pi: float
    law: ValuationLaw = "uniform"
    v_bar_target: float | None = None
    eps: float = 1e-3

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise DomainError("lam must be >= 0")
        if not (0.0 < self.fee_pi < 1.0):
            raise DomainError("fee_pi must lie in (0, 1)")
        if self.law not in ("uniform", "two_point", "point_mass"):
            raise DomainError(f"unknown valuation law {self.law!r}")
        if self.law != "uniform":
            vb = self.v_bar_target
            lo = self.fee_pi + (self.eps if self.law == "two_point" else 0.0)
            if vb is None or not (lo <= vb <= 1.0):
                raise DomainError(f"v_bar must lie in [{lo}, 1] for law {self.law!r}")

    @property
    def v_bar(self) -> float:
        if self.law == "uniform":
            return 0.5 * (1.0 + self.fee_pi)
        return float(self.v_bar_target)

    @property
    def gamma(self) -> float:
        return self.lam * self.fee_pi * (self.v_bar - self.fee_pi) / 2.0

    @classmethod
    def from_gamma(cls, gamma: float, fee_pi: float = 0.003, law: ValuationLaw = "uniform",
                   v_bar: float | None = None) -> "FlowParams":
        """Solve for the arrival intensity that produces profitability ``gamma``."""
        if gamma < 0:
            raise DomainError("gamma must be >= 0")
        vb = 0.5 * (1.0 + fee_pi) if law == "uniform" else v_bar
        if vb is None or vb <= fee_pi:
            if gamma == 0:
                return cls(0.0, fee_pi, law, v_bar)
            raise DomainError("v_bar must exceed fee_pi to reach a positive gamma")
        lam = 2.0 * gamma / (fee_pi * (vb - fee_pi))
        return cls(lam, fee_pi, law, v_bar if law != "uniform" else None)

    def sample_abs_valuation(self, gen: np.random.Generator, size: int) -> np.ndarray:
        pi = self.fee_pi
        if self.law == "uniform":
            return gen.uniform(pi, 1.0, size)
        if self.law == "point_mass":
            return np.full(size, self.v_bar)
        lo = pi + self.eps
        w_hi = (self.v_bar - lo) / (1.0 - lo) if lo < 1.0 else 1.0
        return np.where(gen.random(size) < w_hi, 1.0, lo)


def optimal_volume(v_abs, f, kappa, fee_pi: float):
    """Surplus-maximising trade size delta* = kappa (|V| - pi) / (2 sqrt F)."""
    v_abs = np.asarray(v_abs, dtype=float)
    if np.any(v_abs < fee_pi) or np.any(v_abs > 1.0):
        raise DomainError("|V| must lie in [pi, 1]")
    if np.any(np.asarray(f) <= 0) or np.any(np.asarray(kappa) <= 0):
        raise DomainError("f and kappa must be > 0")
    return (v_abs - fee_pi) * f / CPM.convexity_at_price(f, kappa)


def fee_rate(f, kappa, flow: FlowParams | float):
    """Expected fee revenue rate Pi = gamma kappa sqrt(F).

    ``flow`` may be a :class:`FlowParams` or the profitability gamma itself.
    """
    gamma = flow.gamma if isinstance(flow, FlowParams) else float(flow)
    if gamma < 0:
        raise DomainError("gamma must be >= 0")
    if np.any(np.asarray(f) <= 0) or np.any(np.asarray(kappa) < 0):
        raise DomainError("f must be > 0 and kappa >= 0")
    return gamma * kappa * np.sqrt(f)


def expected_fee_integral(gamma: float, kappa: float, f0: float, sigma: float, T: float,
                          a: float = 0.0) -> float:
    """Integral of E[Pi_t] over [0, T] under a constant drift ``a``."""
    r = 0.5 * a - sigma * sigma / 8.0
    return gamma * kappa * math.sqrt(f0) * float(int_exp(r, T))


@dataclass(frozen=True, eq=False)
class FeeAccrual:
    times: np.ndarray
    realized: np.ndarray  # cumulative realised fees, shape (n_paths, n_steps + 1)
    rate: np.ndarray      # cumulative integral of Pi (trapezoid)
    arrivals: np.ndarray  # number of arrivals per path


def simulate_fee_accrual(paths: PathBundle, flow: FlowParams, kappa: float,
                         seed_offset: int = 0, threads: int | None = None) -> FeeAccrual:
    """Poisson fee arrivals along each path plus the deterministic-rate accrual.

    Arrivals in step k are Poisson(lam dt) and trade at the step's left price.
    """
    n, m = paths.f.shape[0], paths.f.shape[1] - 1
    dt = paths.dt
    f_left = paths.f[:, :-1]
    realized = np.zeros((n, m + 1))
    arrivals = np.zeros(n, dtype=np.int64)
    stream = rng.STREAM_FLOW + int(seed_offset)
    pi = flow.fee_pi

    def work(lo: int, hi: int) -> None:
        for p in range(lo, hi):
            gen = rng.path_generator(paths.grid.seed, p, stream)
            counts = gen.poisson(flow.lam * dt, m) if flow.lam > 0 else np.zeros(m, np.int64)
            total = int(counts.sum())
            arrivals[p] = total
            if total == 0:
                continue
            v = flow.sample_abs_valuation(gen, total)
            step_of = np.repeat(np.arange(m), counts)
            fk = f_left[p, step_of]
            fees = pi * optimal_volume(v, fk, kappa, pi) * fk
            per_step = np.bincount(step_of, weights=fees, minlength=m)
            np.cumsum(per_step, out=realized[p, 1:])

    run_chunks(work, n, chunk=256, threads=threads)
    pi_path = fee_rate(paths.f, kappa, flow)
    rate = np.zeros_like(realized)
    np.cumsum(0.5 * (pi_path[:, 1:] + pi_path[:, :-1]) * dt, axis=1, out=rate[:, 1:])
    return FeeAccrual(paths.times, realized, rate, arrivals)
