"""Stage one: how much liquidity the LP deposits.

The LP picks the depth kappa anticipating fee revenue, adverse selection
against arbitrageurs and the cost of her optimal CEX strategy.  For the
constant-product curve the objective is quadratic in kappa, giving

    kappa_ref  = N / (phi V)                       (no CEX access)
    kappa_star = (N + frak_A) / (phi (frak_B + V))   (optimal CEX hedging)

with N = E[int gamma F^{1/2} + 2 F_T^{1/2} - F_0^{-1/2} F_T],
V = E[int (F^{-1/2} - F_0^{-1/2})^2], and frak_A, frak_B built from the
tracking kernels.  For a zero signal and F_0 = 1, sigma^2 V is the constant

    C_T = e^x + 13/3 - (16/3) e^{3x/8} + x,   x = sigma^2 T,

whose naive evaluation loses about six digits at x = 0.01.

Everything here assumes no transient impact (c = 0).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, optimize

from ._numerics import int_exp, int_exp_minus_affine
from .errors import CapabilityError, ConsistencyError, ConvergenceError, DomainError, PreconditionError
from .hedging import HedgeParams, TrackingKernels, _ell_ou, ell_grid, hedge_path_no_transient, \
    pathwise_criterion, rebuild_state, solve_hedge, tracking_kernels
from .market_dynamics import MarketModel, PathBundle, SimGrid, _power_moment, simulate_paths
from .noise_flow import FlowParams, fee_rate

_QUAD = dict(epsabs=0.0, epsrel=1e-13, limit=500)


@dataclass(frozen=True)
class StageOneInputs:
    model: MarketModel
    hp: HedgeParams
    gamma: float
    kappa_max: float = 1e9

    def __post_init__(self) -> None:
        if not self.kappa_max > 0:
            raise DomainError("kappa_max must be > 0")
        if self.gamma < 0:
            raise DomainError("gamma must be >= 0")

    @classmethod
    def from_flow(cls, model: MarketModel, hp: HedgeParams, flow: FlowParams,
                  kappa_max: float = 1e9) -> "StageOneInputs":
        return cls(model, hp, flow.gamma, kappa_max)


@dataclass
class StageOneResult:
    kappa_ref: float
    kappa_star: float
    scaling: float
    frak_A: float = 0.0
    frak_B: float = 0.0
    frak_A_se: float = 0.0
    frak_B_se: float = 0.0
    kappa_star_se: float = 0.0
    variance_term: float = float("nan")
    numerator: float = float("nan")
    shut_down: bool = False
    budget_bound: bool = False
    mc_value_curve: list[tuple[float, float, float]] = field(default_factory=list)
    argmax_mc: float | None = None
    inputs: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=float)


# --- closed forms, zero signal ------------------------------------------------------


_SERIES_SWITCH = 0.5


def denominator_constant(x: float) -> float:
    """C_T(x) = e^x + 13/3 - (16/3) e^{3x/8} + x without cancellation.

    Its Taylor series sum_{n>=2} (1 - (16/3)(3/8)^n) x^n / n! has positive
    coefficients, so the series is summed for small x.
    """
    if x < 0:
        raise DomainError("x must be >= 0")
    if x < _SERIES_SWITCH:
        total = 0.0
        term = x  # x^n / n! at n = 1
        ratio = 3.0 / 8.0
        pw = ratio
        for n in range(2, 40):
            term *= x / n
            pw *= ratio
            piece = (1.0 - 16.0 / 3.0 * pw) * term
            total += piece
            if piece < 1e-18 * total:
                break
        return total
    return math.expm1(x) - 16.0 / 3.0 * math.expm1(3.0 * x / 8.0) + x


def _reference_numerator(gamma: float, sigma: float, T: float) -> float:
    """sigma^2 N / F_0^{1/2} for a zero signal."""
    e = math.exp(-sigma * sigma * T / 8.0)
    return 8.0 * gamma * (-math.expm1(-sigma * sigma * T / 8.0)) - sigma * sigma * (1.0 - 2.0 * e)


def kappa_ref_raw(model: MarketModel, gamma: float, phi: float) -> float:
    """Unclamped reference liquidity for a zero signal (may be negative)."""
    if model.signal.variant != "zero":
        raise CapabilityError("closed-form reference liquidity needs a zero signal")
    if not phi > 0:
        raise DomainError("phi must be > 0")
    s, T = model.sigma, model.horizon_T
    den = denominator_constant(s * s * T)
    if not den > 0:
        raise ConsistencyError(f"denominator constant is not positive: {den!r}")
    return _reference_numerator(gamma, s, T) / (phi * den) * model.f0 ** 1.5


def kappa_ref_closed_form(model: MarketModel, flow: FlowParams | float, phi: float) -> float:
    """Reference liquidity kappa_ref, clamped at zero when the market shuts down."""
    gamma = flow.gamma if isinstance(flow, FlowParams) else float(flow)
    return max(0.0, kappa_ref_raw(model, gamma, phi))


def _kernel_weight(tk: TrackingKernels, t):
    return 1.0 - tk.Ptilde(0.0, t)


def frak_B_closed_form(model: MarketModel, hp: HedgeParams) -> float:
    """frak_B of the zero-signal corollary at F_0 = 1 (scale-free form).

    Written with K(s; k) = int_s^T Ptilde(s, t) e^{k (t - s)} dt so only one
    layer of numerical integration remains.
    """
    return _frak_B_constant(model, hp, 0.0, f0=1.0)


def _outer_quad(fn, T: float, rate: float) -> float:
    pts = None
    if rate * T > 5:
        # boundary layers of width 1/rate at both ends
        w = min(T / 4, 10.0 / rate)
        pts = [w, T - w]
    with warnings.catch_warnings():
        # accuracy is judged by the returned error estimate below
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(fn, 0.0, T, points=pts, **_QUAD)
    if not np.isfinite(val) or err > 1e-9 * max(1.0, abs(val)):
        raise ConvergenceError(f"quadrature failed: value={val!r}, error={err!r}")
    return val


def _frak_B_constant(model: MarketModel, hp: HedgeParams, a: float, f0: float | None = None) -> float:
    s2, T = model.sigma ** 2, model.horizon_T
    f0 = model.f0 if f0 is None else f0
    tk = tracking_kernels(hp, T)
    b2 = tk.rate ** 2
    k = 3.0 * s2 / 8.0 - 0.5 * a
    t1 = _outer_quad(lambda t: float(_kernel_weight(tk, t) * math.expm1(k * t)), T, tk.rate)
    t2 = _outer_quad(lambda u: float(tk.K(u, k) * (math.exp((s2 - a) * u) * tk.K(u, k)
                                                   - math.exp(k * u) * tk.K(u, 0.0))), T, tk.rate)
    return (t1 - b2 * t2) / f0


def _frak_A_constant(model: MarketModel, hp: HedgeParams, a: float) -> float:
    if a == 0.0:
        return 0.0
    s2, T = model.sigma ** 2, model.horizon_T
    tk = tracking_kernels(hp, T)
    k = 3.0 * s2 / 8.0 - 0.5 * a
    t1 = _outer_quad(lambda t: float(_kernel_weight(tk, t) * math.exp(a * t)), T, tk.rate)
    t2 = _outer_quad(lambda u: float(tk.K(u, k) * tk.K(u, a) * math.exp((0.5 * a - s2 / 8.0) * u)),
                     T, tk.rate)
    return a * math.sqrt(model.f0) * (t1 - tk.rate ** 2 * t2)


def kappa_star_closed_form_A0(model: MarketModel, flow: FlowParams | float,
                              hp: HedgeParams) -> tuple[float, float, float]:
    """(kappa_star, frak_B, scaling) for a zero signal and no transient impact."""
    if hp.c != 0:
        raise PreconditionError("closed-form equilibrium liquidity assumes c = 0")
    gamma = flow.gamma if isinstance(flow, FlowParams) else float(flow)
    kref = kappa_ref_closed_form(model, gamma, hp.phi)
    x = model.sigma ** 2 * model.horizon_T
    ct = denominator_constant(x)
    fb = frak_B_closed_form(model, hp)
    den = model.sigma ** 2 * fb + ct
    if not den > 0:
        raise ConsistencyError("sigma^2 frak_B + C_T must be positive")
    scaling = ct / den
    return kref * scaling, fb, scaling


# --- deterministic-signal moments ----------------------------------------------------


def _moment_integrals(model: MarketModel, gamma: float) -> tuple[float, float]:
    """(N, V) for any signal, using closed-form conditional moments from time 0."""
    f0, T = model.f0, model.horizon_T
    sig = model.signal
    a0 = sig.a0 if sig.variant == "ou" else None
    if sig.variant != "ou":
        a, s2 = sig.initial, model.sigma ** 2
        r3 = 0.5 * a - s2 / 8.0
        num = math.sqrt(f0) * (gamma * float(int_exp(r3, T)) + 2.0 * math.exp(r3 * T)
                               - math.exp(a * T))
        r1, r2 = s2 - a, 3.0 * s2 / 8.0 - 0.5 * a
        v = (int_exp_minus_affine(r1, T) - 2.0 * int_exp_minus_affine(r2, T)
             + s2 * T * T / 8.0) / f0
        return num, v

    def m(q, t):
        return float(_power_moment(q, f0, a0, t, model))

    rate = 1.0
    i_half = _outer_quad(lambda t: m(0.5, t), T, rate)
    num = gamma * i_half + 2.0 * m(0.5, T) - m(1.0, T) / math.sqrt(f0)
    v = _outer_quad(lambda t: m(-1.0, t) - 2.0 * m(-0.5, t) / math.sqrt(f0) + 1.0 / f0, T, rate)
    return num, v


def kappa_ref_general(model: MarketModel, gamma: float, phi: float) -> float:
    """Reference liquidity N / (phi V) from signal-aware moments (unclamped)."""
    num, v = _moment_integrals(model, gamma)
    return num / (phi * v)


def kappa_star_constant_signal(model: MarketModel, gamma: float, hp: HedgeParams) -> StageOneResult:
    """Equilibrium liquidity for a zero or constant signal, fully deterministic."""
    if hp.c != 0:
        raise PreconditionError("equilibrium liquidity assumes c = 0")
    if model.signal.variant == "ou":
        raise CapabilityError("use kappa_star_with_signal for an OU signal")
    a = model.signal.initial
    num, v = _moment_integrals(model, gamma)
    fa = _frak_A_constant(model, hp, a)
    fb = _frak_B_constant(model, hp, a)
    return _assemble(num, v, fa, fb, hp.phi, 1e300, 0.0, 0.0, 0.0)


def _assemble(num, v, fa, fb, phi, kappa_max, fa_se, fb_se, ks_se) -> StageOneResult:
    kref_raw = num / (phi * v)
    den = fb + v
    ks_raw = (num + fa) / (phi * den)
    kref = min(max(kref_raw, 0.0), kappa_max)
    ks = min(max(ks_raw, 0.0), kappa_max)
    scaling = v / den if den != 0 else float("nan")
    return StageOneResult(
        kappa_ref=kref, kappa_star=ks, scaling=scaling, frak_A=fa, frak_B=fb,
        frak_A_se=fa_se, frak_B_se=fb_se, kappa_star_se=ks_se, variance_term=v,
        numerator=num, shut_down=ks_raw <= 0, budget_bound=ks_raw >= kappa_max,
    )


# --- Monte Carlo kernels ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SignalKernels:
    """Per-path C/D kernel processes on the simulation grid."""

    c_ell: np.ndarray
    d_ell: np.ndarray
    c_q: np.ndarray
    d_q: np.ndarray
    c_nu: np.ndarray
    d_nu: np.ndarray


def signal_kernels(paths: PathBundle, hp: HedgeParams, model: MarketModel) -> SignalKernels:
    """C^ell, D^ell, C^Q, D^Q, C^nu, D^nu on every path.

    They decompose the zero-impact strategy as nu* = kappa C^nu + D^nu and
    Q* = kappa C^Q + D^Q when Q_0 = -kappa F_0^{-1/2}.
    """
    tk = tracking_kernels(hp, model.horizon_T)
    times, dt, f = paths.times, paths.dt, paths.f
    if model.signal.variant == "ou":
        d_ell = np.empty_like(f)
        c_ell = np.empty_like(f)
        no_pen = HedgeParams(hp.eta, 0.0, 0.0, hp.beta_res, hp.q0)
        for k, t in enumerate(times):
            full = _ell_ou(float(t), f[:, k], paths.a[:, k], 1.0, hp, model, tk)
            d_ell[:, k] = _ell_ou(float(t), f[:, k], paths.a[:, k], 1.0, no_pen, model, tk)
            c_ell[:, k] = full - d_ell[:, k]
    else:
        a = model.signal.initial
        kh = 3.0 * model.sigma ** 2 / 8.0 - 0.5 * a
        kk = tk.K(times, kh)[None, :]
        c_ell = -(hp.phi / (2 * hp.eta)) * kk / np.sqrt(f)
        d_ell = (a / (2 * hp.eta)) * f * tk.K(times, a)[None, :]
    decay = tk.Ptilde(times[:-1], times[1:])
    c_q = np.empty_like(f)
    d_q = np.empty_like(f)
    c_q[:, 0] = -1.0 / np.sqrt(f[:, 0])
    d_q[:, 0] = 0.0
    for k in range(len(times) - 1):
        d = decay[k]
        c_q[:, k + 1] = d * c_q[:, k] + 0.5 * dt * (d * c_ell[:, k] + c_ell[:, k + 1])
        d_q[:, k + 1] = d * d_q[:, k] + 0.5 * dt * (d * d_ell[:, k] + d_ell[:, k + 1])
    p = tk.P(times)[None, :]
    return SignalKernels(c_ell, d_ell, c_q, d_q, p * c_q + c_ell, p * d_q + d_ell)


def _trapz_rows(x: np.ndarray, dt: float) -> np.ndarray:
    return np.sum(0.5 * (x[:, 1:] + x[:, :-1]), axis=1) * dt


def kappa_star_with_signal(inputs: StageOneInputs, paths: PathBundle) -> StageOneResult:
    """Equilibrium liquidity with a private signal; frak_A and frak_B by Monte Carlo."""
    model, hp = inputs.model, inputs.hp
    if hp.c != 0:
        raise PreconditionError("equilibrium liquidity assumes c = 0")
    dt = paths.dt
    f = paths.f
    f0 = model.f0
    ker = signal_kernels(paths, hp, model)
    weight = ker.c_q + f0 ** -0.5
    dev = 1.0 / np.sqrt(f) - f0 ** -0.5
    a_samples = _trapz_rows(weight * paths.a * f, dt)
    b_samples = _trapz_rows(weight * dev, dt)
    v_samples = _trapz_rows(dev * dev, dt)
    n = len(a_samples)
    fa, fb = float(a_samples.mean()), float(b_samples.mean())
    fa_se = float(a_samples.std(ddof=1) / math.sqrt(n))
    fb_se = float(b_samples.std(ddof=1) / math.sqrt(n))
    num, v = _moment_integrals(model, inputs.gamma)
    pos = b_samples + v_samples
    pos_se = float(pos.std(ddof=1) / math.sqrt(n))
    if fb + v < -3.0 * pos_se:
        raise ConsistencyError(
            f"frak_B + V = {fb + v:.6g} is below -3 SE ({pos_se:.3g}); kernel assembly is inconsistent"
        )
    # delta method for (num + A) / (phi (B + v)) with num, v exact
    den = fb + v
    ks = (num + fa) / (hp.phi * den)
    cov = np.cov(np.vstack([a_samples, b_samples]))
    grad = np.array([1.0 / (hp.phi * den), -ks / den])
    ks_se = float(math.sqrt(max(grad @ cov @ grad, 0.0) / n))
    res = _assemble(num, v, fa, fb, hp.phi, inputs.kappa_max, fa_se, fb_se, ks_se)
    res.inputs = _echo_inputs(inputs)
    return res


def _echo_inputs(inputs: StageOneInputs) -> dict:
    m = inputs.model
    return {
        "f0": m.f0, "sigma": m.sigma, "horizon_T": m.horizon_T,
        "signal": asdict(m.signal), "eta": inputs.hp.eta, "phi": inputs.hp.phi,
        "c": inputs.hp.c, "beta_res": inputs.hp.beta_res, "gamma": inputs.gamma,
        "kappa_max": inputs.kappa_max,
    }


def stage_one_closed_form(inputs: StageOneInputs) -> StageOneResult:
    """Deterministic stage-one result for zero or constant signals."""
    res = kappa_star_constant_signal(inputs.model, inputs.gamma, inputs.hp)
    res.kappa_ref = min(res.kappa_ref, inputs.kappa_max)
    res.budget_bound = res.kappa_star >= inputs.kappa_max
    res.kappa_star = min(res.kappa_star, inputs.kappa_max)
    res.inputs = _echo_inputs(inputs)
    return res


# --- Monte Carlo objective ------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveEstimate:
    value: float
    se: float
    decomposition: float
    decomposition_se: float
    diff_se: float


def _objective_samples(kappa: float, inputs: StageOneInputs, paths: PathBundle,
                       include_deposit: bool = True, decomposition: bool = False):
    model, hp = inputs.model, inputs.hp
    n = paths.n_paths
    if kappa == 0:
        z = np.zeros(n)
        return (z, z.copy()) if decomposition else z
    dt = paths.dt
    hedge = solve_hedge(paths, kappa, hp, model)
    y = paths.reserves(kappa)
    f = paths.f
    fees = _trapz_rows(fee_rate(f, kappa, inputs.gamma), dt)
    x_t = kappa * np.sqrt(f[:, -1])
    crit = pathwise_criterion(hedge.nu, paths, kappa, hp, hedge.q0)
    value = fees + x_t + crit
    if not include_deposit:
        value = value - kappa * math.sqrt(model.f0)
    if not decomposition:
        return value
    # Operator form: J = -Q(nu)/2 + L(nu) plus the running terms; expectation of
    # (value - X_0) under the Ito expansion of the terminal reserve value.
    q, i = rebuild_state(hedge.nu, hedge.q0, hp, dt)
    qn = q - hedge.q0[:, None]
    nu = hedge.nu
    gf = (3.0 * model.sigma ** 2 / 8.0 - 0.5 * paths.a) * kappa / np.sqrt(f)
    af = paths.a * f
    ypq = y + hedge.q0[:, None]
    quad = _trapz_rows(2 * hp.eta * nu * nu + 2 * qn * (hp.beta_res * i - hp.c * nu)
                       + hp.phi * qn * qn, dt)
    lin = _trapz_rows(gf * i + ypq * (hp.c * nu - hp.beta_res * i - hp.phi * qn) + af * qn, dt)
    running = _trapz_rows((model.sigma ** 2 / 2.0 - 2.0 * inputs.gamma) * (-0.5 * kappa * np.sqrt(f))
                          + af * (y - y[:, :1]) - 0.5 * hp.phi * (y - y[:, :1]) ** 2, dt)
    decomp = -0.5 * quad + lin + running
    if include_deposit:
        decomp = decomp + kappa * math.sqrt(model.f0)
    return value, decomp


def mc_objective(kappa: float, inputs: StageOneInputs, paths: PathBundle,
                 include_deposit: bool = True) -> ObjectiveEstimate:
    """Monte Carlo estimate of the stage-one objective at depth ``kappa``.

    Fee revenue enters through the expected rate Pi (a variance reduction).
    ``include_deposit=False`` subtracts the initial cash X_0 = kappa sqrt(F_0)
    and turns the objective into the expected change in wealth.
    """
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    v, d = _objective_samples(kappa, inputs, paths, include_deposit, decomposition=True)
    n = len(v)
    sd = lambda x: float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return ObjectiveEstimate(float(v.mean()), sd(v), float(d.mean()), sd(d), sd(v - d))


def optimize_kappa_mc(inputs: StageOneInputs, paths: PathBundle, kappa_grid_n: int = 21,
                      include_deposit: bool = True, threads: int | None = None,
                      refine: bool = True) -> StageOneResult:
    """Grid search with common random numbers, then golden-section refinement.

    Every kappa reuses ``paths``; only the reserves change with kappa.
    """
    if kappa_grid_n < 3:
        raise DomainError("kappa_grid_n must be >= 3")
    kmax = inputs.kappa_max
    grid = np.linspace(0.0, kmax, kappa_grid_n)

    def evaluate(k):
        s = _objective_samples(float(k), inputs, paths, include_deposit)
        return float(s.mean()), float(s.std(ddof=1) / math.sqrt(len(s)))

    curve = [(float(k),) + evaluate(k) for k in grid]
    vals = np.array([c[1] for c in curve])
    j = int(np.argmax(vals))
    shut = budget = False
    if j == 0:
        best, shut = 0.0, True
    elif j == len(grid) - 1:
        best, budget = float(kmax), True
    elif refine:
        sol = optimize.minimize_scalar(lambda k: -evaluate(k)[0],
                                       bracket=(grid[j - 1], grid[j], grid[j + 1]),
                                       method="golden", options={"xtol": 1e-6})
        best = float(sol.x)
    else:
        best = float(grid[j])
    res = StageOneResult(kappa_ref=float("nan"), kappa_star=float("nan"), scaling=float("nan"),
                         shut_down=shut, budget_bound=budget, mc_value_curve=curve, argmax_mc=best)
    res.inputs = _echo_inputs(inputs)
    return res


def quadratic_argmax(inputs: StageOneInputs, paths: PathBundle, kappas=(0.5, 1.0),
                     include_deposit: bool = True) -> float:
    """Argmax of the CRN objective using its exact quadratic dependence on kappa.

    With Q_0 = -Y_0 and no impact every pathwise term is linear or quadratic in
    kappa, so two non-zero evaluations pin down the parabola through the origin.
    """
    k1, k2 = kappas
    v1 = _objective_samples(k1, inputs, paths, include_deposit).mean()
    v2 = _objective_samples(k2, inputs, paths, include_deposit).mean()
    # v(k) = b k + c k^2
    det = k1 * k2 * k2 - k2 * k1 * k1
    b = (v1 * k2 * k2 - v2 * k1 * k1) / det
    c = (k1 * v2 - k2 * v1) / det
    return float(-b / (2.0 * c))


def simulate_for_stage_one(inputs: StageOneInputs, grid: SimGrid, threads: int | None = None) -> PathBundle:
    return simulate_paths(inputs.model, grid, kappa=1.0, threads=threads)
