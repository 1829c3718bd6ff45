"""Fundamental price, private signal, DEX reserves and transient impact.

The price follows dF = A F dt + sigma F dW where the signal A is zero, a
constant, or an Ornstein-Uhlenbeck process driven by the same Brownian motion
W.  Under any of these signals log F is Gaussian conditional on the current
state, so every moment the solvers need has a closed form.  The Gaussian
building blocks live in :func:`log_price_moments`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import rng
from ._numerics import int_exp
from ._parallel import run_chunks
from .amm_core import CPM
from .errors import CapabilityError, DomainError

SignalVariant = Literal["zero", "constant", "ou"]


@dataclass(frozen=True)
class SignalModel:
    variant: SignalVariant = "zero"
    a: float = 0.0
    theta: float = 0.0
    mu: float = 0.0
    xi: float = 0.0
    a0: float = 0.0

    def __post_init__(self) -> None:
        if self.variant not in ("zero", "constant", "ou"):
            raise DomainError(f"unknown signal variant {self.variant!r}")
        if self.variant == "ou":
            if not self.theta > 0:
                raise DomainError("OU signal requires theta > 0")
            if not self.xi >= 0:
                raise DomainError("OU signal requires xi >= 0")

    @classmethod
    def zero(cls) -> "SignalModel":
        return cls("zero")

    @classmethod
    def constant(cls, a: float) -> "SignalModel":
        return cls("constant", a=float(a))

    @classmethod
    def ou(cls, theta: float, mu: float, xi: float, a0: float) -> "SignalModel":
        return cls("ou", theta=float(theta), mu=float(mu), xi=float(xi), a0=float(a0))

    @property
    def initial(self) -> float:
        """Signal value at time zero."""
        if self.variant == "ou":
            return self.a0
        return self.a if self.variant == "constant" else 0.0

    @property
    def is_deterministic(self) -> bool:
        return self.variant != "ou"


@dataclass(frozen=True)
class MarketModel:
    f0: float
    sigma: float
    horizon_T: float
    signal: SignalModel = field(default_factory=SignalModel.zero)
    allow_degenerate: bool = False

    def __post_init__(self) -> None:
        if not self.f0 > 0:
            raise DomainError("f0 must be > 0")
        if not self.horizon_T > 0:
            raise DomainError("horizon_T must be > 0")
        if self.allow_degenerate:
            if not self.sigma >= 0:
                raise DomainError("sigma must be >= 0")
        elif not self.sigma > 0:
            raise DomainError("sigma must be > 0 (set allow_degenerate for sigma = 0)")


@dataclass(frozen=True)
class SimGrid:
    n_steps: int
    n_paths: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_steps < 1 or self.n_paths < 1:
            raise DomainError("n_steps and n_paths must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise DomainError("seed must be a 64-bit unsigned integer")

    def dt(self, horizon_T: float) -> float:
        return horizon_T / self.n_steps

    def times(self, horizon_T: float) -> np.ndarray:
        return np.linspace(0.0, horizon_T, self.n_steps + 1)


@dataclass(frozen=True, eq=False)
class PathBundle:
    """Simulated trajectories, one row per path.

    ``y`` holds the reserves for ``kappa``; :meth:`reserves` recomputes them for
    another depth from the same prices, which is how common random numbers are
    shared across liquidity levels.
    """

    times: np.ndarray
    f: np.ndarray
    a: np.ndarray
    y: np.ndarray
    dw: np.ndarray
    kappa: float
    model: MarketModel
    grid: SimGrid

    @property
    def n_paths(self) -> int:
        return self.f.shape[0]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def reserves(self, kappa: float) -> np.ndarray:
        if kappa == self.kappa:
            return self.y
        return kappa / np.sqrt(self.f)

    def subset(self, rows: slice) -> "PathBundle":
        return PathBundle(self.times, self.f[rows], self.a[rows], self.y[rows],
                          self.dw[rows], self.kappa, self.model, self.grid)


def _ou_coeffs(sig: SignalModel, dt: float) -> tuple[float, float]:
    decay = math.exp(-sig.theta * dt)
    # exact OU transition std per unit standard normal
    std = sig.xi * math.sqrt(-math.expm1(-2.0 * sig.theta * dt) / (2.0 * sig.theta))
    return decay, std


def simulate_paths(model: MarketModel, grid: SimGrid, kappa: float = 1.0,
                   threads: int | None = None) -> PathBundle:
    """Simulate price and signal paths with the log-exact scheme.

    Over each step the signal is frozen at its left value in the price
    exponent, while an OU signal itself moves by its exact transition driven by
    the same standard normal as the price.
    """
    if not kappa > 0:
        raise DomainError("kappa must be > 0")
    n, m = grid.n_paths, grid.n_steps
    dt = grid.dt(model.horizon_T)
    sqdt = math.sqrt(dt)
    sig = model.signal
    sigma = model.sigma
    times = grid.times(model.horizon_T)

    dw = np.empty((n, m))
    logf = np.empty((n, m + 1))
    a_full = np.empty((n, m + 1)) if sig.variant == "ou" else None

    def work(lo: int, hi: int) -> None:
        for p in range(lo, hi):
            dw[p] = rng.path_generator(grid.seed, p, rng.STREAM_BROWNIAN).standard_normal(m)
        z = dw[lo:hi]
        logf[lo:hi, 0] = math.log(model.f0)
        if sig.variant == "ou":
            decay, std = _ou_coeffs(sig, dt)
            a_cur = np.full(hi - lo, sig.a0)
            a_full[lo:hi, 0] = a_cur
            incr = np.empty((hi - lo, m))
            for k in range(m):
                incr[:, k] = (a_cur - 0.5 * sigma * sigma) * dt + sigma * sqdt * z[:, k]
                a_cur = sig.mu + (a_cur - sig.mu) * decay + std * z[:, k]
                a_full[lo:hi, k + 1] = a_cur
        else:
            drift = (sig.initial - 0.5 * sigma * sigma) * dt
            incr = drift + sigma * sqdt * z
        np.cumsum(incr, axis=1, out=logf[lo:hi, 1:])
        logf[lo:hi, 1:] += logf[lo:hi, :1]
        z *= sqdt

    run_chunks(work, n, chunk=512, threads=threads)
    f = np.exp(logf)
    del logf
    if a_full is None:
        a_full = np.broadcast_to(np.float64(sig.initial), f.shape)
    y = kappa / np.sqrt(f)
    return PathBundle(times, f, a_full, y, dw, float(kappa), model, grid)


def drift_G(f, a, kappa, sigma):
    """Drift coefficient G with dY = G F dt + (martingale) on the aligned reserve."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise DomainError("f must be > 0")
    return CPM.d1_h(f, kappa) * a + 0.5 * sigma * sigma * CPM.d11_h(f, kappa) * f


def impact_step(i, nu, c, beta_res, dt):
    """Advance dI = (c nu - beta I) dt exactly with nu frozen over the step."""
    if not dt > 0 or c < 0 or not beta_res > 0:
        raise DomainError("impact_step needs dt > 0, c >= 0, beta_res > 0")
    decay = math.exp(-beta_res * dt)
    return i * decay + c * nu * (-math.expm1(-beta_res * dt)) / beta_res


# --- conditional Gaussian structure ------------------------------------------------


@dataclass(frozen=True)
class LogMoments:
    """Conditional law of X = log F_s - log F_t and of A_s given time-t state."""

    mean_x: np.ndarray | float
    var_x: float
    mean_a: np.ndarray | float
    cov_ax: float


def _ou_pieces(theta: float, dt_fwd: float) -> tuple[float, float, float, float]:
    """Return (E1, Delta - E1, Delta - 2E1 + E2, E1 - E2) for rate theta."""
    x = theta * dt_fwd
    e1 = -math.expm1(-x) / theta
    e2 = -math.expm1(-2.0 * x) / (2.0 * theta)
    if x < 1e-3:
        d1 = (x * x / 2.0 - x ** 3 / 6.0 + x ** 4 / 24.0) / theta
        d2 = (x ** 3 / 3.0 - x ** 4 / 4.0 + 7.0 * x ** 5 / 60.0) / theta
    else:
        d1 = dt_fwd - e1
        d2 = dt_fwd - 2.0 * e1 + e2
    e1me2 = math.expm1(-x) ** 2 / (2.0 * theta)
    return e1, d1, d2, e1me2


def log_price_moments(a_t, dt_fwd: float, model: MarketModel) -> LogMoments:
    """Gaussian moments of the log-price increment over ``dt_fwd``.

    For an OU signal driven by the price's own Brownian motion, X is an affine
    functional of W, so its mean and variance are assembled from the OU
    transition: with b = xi/theta, Var X = sigma^2 D + 2 sigma b (D - E1)
    + b^2 (D - 2 E1 + E2).
    """
    if dt_fwd < 0:
        raise DomainError("dt_fwd must be >= 0")
    sig, s = model.signal, model.sigma
    if sig.variant != "ou":
        a = sig.initial
        return LogMoments(mean_x=(a - 0.5 * s * s) * dt_fwd, var_x=s * s * dt_fwd,
                          mean_a=a, cov_ax=0.0)
    th, mu, xi = sig.theta, sig.mu, sig.xi
    a_t = np.asarray(a_t, dtype=float)
    e1, d1, d2, e1me2 = _ou_pieces(th, dt_fwd)
    b = xi / th
    mean_x = mu * dt_fwd + (a_t - mu) * e1 - 0.5 * s * s * dt_fwd
    var_x = s * s * dt_fwd + 2.0 * s * b * d1 + b * b * d2
    mean_a = mu + (a_t - mu) * math.exp(-th * dt_fwd)
    cov_ax = xi * (s * e1 + b * e1me2)
    return LogMoments(mean_x, var_x, mean_a, cov_ax)


def _power_moment(q: float, f_t, a_t, dt_fwd: float, model: MarketModel):
    lm = log_price_moments(a_t, dt_fwd, model)
    return np.power(f_t, q) * np.exp(q * lm.mean_x + 0.5 * q * q * lm.var_x)


def _signal_price_moment(f_t, a_t, dt_fwd: float, model: MarketModel):
    lm = log_price_moments(a_t, dt_fwd, model)
    return f_t * (lm.mean_a + lm.cov_ax) * np.exp(lm.mean_x + 0.5 * lm.var_x)


def cond_moment(q: float, f_t, dt_fwd: float, model: MarketModel, a_t=None):
    """E[F_s^q | F_t] for s = t + dt_fwd.

    Zero and constant signals support every exponent.  For an OU signal only
    q = -1/2 is offered; ``a_t`` defaults to the signal's initial value.
    """
    f_t = np.asarray(f_t, dtype=float)
    if np.any(f_t <= 0):
        raise DomainError("f_t must be > 0")
    sig = model.signal
    if sig.variant == "ou":
        if q != -0.5:
            raise CapabilityError(f"OU signal supports only q = -1/2, got q = {q}")
        a_t = sig.a0 if a_t is None else a_t
    return _power_moment(q, f_t, a_t, dt_fwd, model)


def cond_signal_price_moment(f_t, a_t, dt_fwd: float, model: MarketModel):
    """E[A_s F_s | F_t] for an OU signal via E[A e^X] = (E A + Cov(A, X)) e^{E X + Var X / 2}."""
    if model.signal.variant != "ou":
        raise CapabilityError("cond_signal_price_moment requires an OU signal")
    return _signal_price_moment(np.asarray(f_t, dtype=float), a_t, dt_fwd, model)


def expected_power_integral(q: float, f0: float, model: MarketModel, t0: float = 0.0,
                            t1: float | None = None) -> float:
    """Integral over [t0, t1] of E[F_t^q] for deterministic signals."""
    if not model.signal.is_deterministic:
        raise CapabilityError("closed-form time integral needs a deterministic signal")
    t1 = model.horizon_T if t1 is None else t1
    a, s = model.signal.initial, model.sigma
    rate = q * a + 0.5 * (q * q - q) * s * s
    return f0 ** q * math.exp(rate * t0) * float(int_exp(rate, t1 - t0))


def paths_to_rows(bundle: PathBundle):
    """Yield (path, t, F, A, Y) tuples in path-major order."""
    for p in range(bundle.n_paths):
        for k, t in enumerate(bundle.times):
            yield p, t, bundle.f[p, k], bundle.a[p, k], bundle.y[p, k]
