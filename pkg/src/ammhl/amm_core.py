"""Bonding-curve mechanics for a DEX pool.

A curve is described by its level function ``phi(y, kappa)`` which returns the
reference-asset reserve X that sits on the same level set as a risky reserve
``y``.  Arbitrageurs keep the pool's marginal price equal to the fundamental
price F, so the risky reserve is a function ``h(F, kappa)`` of the price.

Only the constant-product instance ``phi(y, kappa) = kappa**2 / y`` ships; all of
its quantities are closed form.  Functions accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Protocol

import numpy as np

from .errors import DomainError, InsufficientReservesError

ExecMode = Literal["exact", "approx"]


def _require_positive(name: str, value) -> None:
    arr = np.asarray(value)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")


class BondingCurve(Protocol):
    """Interface every level function must provide."""

    def phi(self, y, kappa): ...
    def d1_phi(self, y, kappa): ...
    def d11_phi(self, y, kappa): ...
    def h(self, f, kappa): ...
    def d1_h(self, f, kappa): ...
    def d11_h(self, f, kappa): ...


@dataclass(frozen=True)
class ConstantProduct:
    """The constant-product level set X * Y = kappa**2."""

    name: str = "constant_product"

    def phi(self, y, kappa):
        return kappa * kappa / y

    def d1_phi(self, y, kappa):
        return -kappa * kappa / (y * y)

    def d11_phi(self, y, kappa):
        return 2.0 * kappa * kappa / (y * y * y)

    def h(self, f, kappa):
        return kappa / np.sqrt(f)

    def d1_h(self, f, kappa):
        return -0.5 * kappa / (f * np.sqrt(f))

    def d11_h(self, f, kappa):
        return 0.75 * kappa / (f * f * np.sqrt(f))

    def convexity_at_price(self, f, kappa):
        """d11_phi evaluated on the aligned reserve h(f, kappa): 2 f^{3/2} / kappa."""
        return 2.0 * f * np.sqrt(f) / kappa


CPM = ConstantProduct()


@dataclass(frozen=True)
class PoolSpec:
    kappa: float
    fee_pi: float
    curve: ConstantProduct = field(default=CPM)

    def __post_init__(self) -> None:
        _require_positive("kappa", self.kappa)
        if not (0.0 < self.fee_pi < 1.0):
            raise DomainError(f"fee_pi must lie in (0, 1), got {self.fee_pi!r}")


@dataclass(frozen=True)
class CurveEval:
    x_reserve: float
    y_reserve: float
    marginal_price: float
    convexity: float


def level_value(y, kappa, curve: BondingCurve = CPM):
    """Reference-asset reserve on the level set through ``y``."""
    _require_positive("y", y)
    _require_positive("kappa", kappa)
    return curve.phi(y, kappa)


def marginal_price(y, kappa, curve: BondingCurve = CPM):
    """Price of an infinitesimal trade, -d1_phi(y, kappa)."""
    _require_positive("y", y)
    _require_positive("kappa", kappa)
    return -curve.d1_phi(y, kappa)


def reserves_from_price(f, kappa, curve: BondingCurve = CPM):
    """Risky reserve that makes the pool's marginal price equal ``f``."""
    _require_positive("f", f)
    _require_positive("kappa", kappa)
    return curve.h(f, kappa)


def reserves_from_price_derivs(f, kappa, curve: BondingCurve = CPM):
    """Return (h, d1_h, d11_h) at (f, kappa)."""
    _require_positive("f", f)
    _require_positive("kappa", kappa)
    return curve.h(f, kappa), curve.d1_h(f, kappa), curve.d11_h(f, kappa)


def evaluate_curve(y, kappa, curve: BondingCurve = CPM) -> CurveEval:
    _require_positive("y", y)
    _require_positive("kappa", kappa)
    return CurveEval(
        x_reserve=float(curve.phi(y, kappa)),
        y_reserve=float(y),
        marginal_price=float(-curve.d1_phi(y, kappa)),
        convexity=float(curve.d11_phi(y, kappa)),
    )


def _check_trade(delta_y, y, pool: PoolSpec, f, mode: str, side: str) -> None:
    _require_positive("y", y)
    _require_positive("f", f)
    if mode not in ("exact", "approx"):
        raise DomainError(f"mode must be 'exact' or 'approx', got {mode!r}")
    if not np.isfinite(delta_y) or delta_y <= 0:
        raise DomainError(f"delta_y must be > 0, got {delta_y!r}")
    if side == "buy" and delta_y >= y:
        raise InsufficientReservesError(
            f"buying {delta_y!r} would exhaust the risky reserve {y!r}"
        )


def exec_price_buy(delta_y, y, pool: PoolSpec, f, mode: ExecMode = "exact"):
    """Average price per unit paid by a taker removing ``delta_y`` from the pool.

    The fee is charged on the notional at price ``f``, which equals the pool's
    marginal price when arbitrageurs keep the two aligned.
    """
    _check_trade(delta_y, y, pool, f, mode, "buy")
    c, k, fee = pool.curve, pool.kappa, pool.fee_pi
    if mode == "approx":
        return f + fee * f + 0.5 * delta_y * c.d11_phi(y, k)
    return (c.phi(y - delta_y, k) - c.phi(y, k) + fee * delta_y * f) / delta_y


def exec_price_sell(delta_y, y, pool: PoolSpec, f, mode: ExecMode = "exact"):
    """Average price per unit received by a taker adding ``delta_y`` to the pool."""
    _check_trade(delta_y, y, pool, f, mode, "sell")
    c, k, fee = pool.curve, pool.kappa, pool.fee_pi
    if mode == "approx":
        return f - fee * f - 0.5 * delta_y * c.d11_phi(y, k)
    return (c.phi(y, k) - c.phi(y + delta_y, k) - fee * delta_y * f) / delta_y
