"""Stage two: the LP's risk-offsetting strategy on the centralized exchange.

The LP trades at rate nu on the CEX, holds inventory Q = Q0 + int nu, pays a
quadratic cost eta nu^2 and is penalised by phi/2 (Q + Y)^2 for deviating from
the position that offsets her DEX reserves Y.  With transient impact
dI = (c nu - beta I) dt the optimum is characterised by a 2x2 matrix Riccati
equation; without impact (c = 0) it reduces to tanh/cosh kernels with rate
beta_hat = sqrt(phi / (2 eta)).

Supported combinations:

============================  =========  ========  ====
solver                        zero       constant  OU
============================  =========  ========  ====
hedge_path_no_transient       yes        yes       yes
assemble_fbsde_solution       yes        yes       no
gateaux_residual              yes        yes       no
============================  =========  ========  ====
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._numerics import exprel, gauss_legendre, int_exp, logcosh
from .errors import (CapabilityError, ConvergenceError, DomainError, PreconditionError,
                     ShapeError, WrongSolverError)
from .market_dynamics import MarketModel, PathBundle, log_price_moments

DRE_TOLERANCE = 1e-8


@dataclass(frozen=True)
class HedgeParams:
    """CEX frictions and preferences.

    ``q0`` is the initial CEX inventory; ``None`` means the neutral start
    Q0 = -Y0 used throughout stage one.
    """

    eta: float
    phi: float
    c: float = 0.0
    beta_res: float = 1.0
    q0: float | None = None

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise DomainError("eta must be > 0")
        if not self.phi >= 0:
            raise DomainError("phi must be >= 0")
        if not self.c >= 0:
            raise DomainError("c must be >= 0")
        if not self.beta_res > 0:
            raise DomainError("beta_res must be > 0")

    @property
    def rate(self) -> float:
        """Tracking rate beta_hat = sqrt(phi / (2 eta))."""
        return math.sqrt(self.phi / (2.0 * self.eta))

    @property
    def impact_bound(self) -> float:
        return math.sqrt(2.0 * self.eta * self.phi)

    def check_impact_bound(self) -> None:
        if not self.c < self.impact_bound:
            raise PreconditionError(
                f"impact scale c={self.c} must be below sqrt(2 eta phi)={self.impact_bound:.6g}"
            )

    def initial_inventory(self, y0):
        return -y0 if self.q0 is None else self.q0

    @classmethod
    def from_ratio(cls, eta: float, ratio: float, **kw) -> "HedgeParams":
        """Parameterise by the ratio phi / eta used to label figure panels."""
        return cls(eta=eta, phi=ratio * eta, **kw)

    @classmethod
    def from_rate(cls, eta: float, rate: float, **kw) -> "HedgeParams":
        return cls(eta=eta, phi=2.0 * eta * rate * rate, **kw)


# --- closed-form kernels -----------------------------------------------------------


@dataclass(frozen=True)
class TrackingKernels:
    """P(t) = b tanh(b (t - T)) and Ptilde(s, t) = cosh(b (t - T)) / cosh(b (s - T))."""

    rate: float
    horizon_T: float

    def P(self, t):
        b = self.rate
        return b * np.tanh(b * (np.asarray(t, dtype=float) - self.horizon_T))

    def log_ptilde(self, s, t):
        b, T = self.rate, self.horizon_T
        return logcosh(b * (np.asarray(t, dtype=float) - T)) - logcosh(b * (np.asarray(s, dtype=float) - T))

    def Ptilde(self, s, t):
        return np.exp(self.log_ptilde(s, t))

    def K(self, t, k: float):
        """int_t^T Ptilde(t, s) e^{k (s - t)} ds in closed form."""
        b = self.rate
        tau = self.horizon_T - np.asarray(t, dtype=float)
        e2 = np.exp(-2.0 * b * tau)
        first = int_exp(k - b, tau)
        x = (k + b) * tau
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            small = e2 * tau * exprel(np.clip(x, -50.0, 50.0))
            large = (np.exp((k - b) * tau) - e2) / (k + b)
        second = np.where(np.abs(x) < 1.0, small, large)
        return (first + second) / (1.0 + e2)

    def g(self, t, sigma: float):
        return self.K(t, 3.0 * sigma * sigma / 8.0)


def tracking_kernels(hp: HedgeParams, horizon_T: float) -> TrackingKernels:
    if not horizon_T > 0:
        raise DomainError("horizon_T must be > 0")
    return TrackingKernels(hp.rate, float(horizon_T))


def _deterministic_drift(model: MarketModel) -> float:
    if model.signal.variant == "ou":
        raise CapabilityError("this operation supports zero or constant signals only")
    return model.signal.initial


def _half_rate(model: MarketModel, a: float) -> float:
    """Growth rate of E[F^{-1/2}]: 3 sigma^2 / 8 - a / 2."""
    return 3.0 * model.sigma ** 2 / 8.0 - 0.5 * a


_OU_NODES = 64
_OU_CUTOFF = 40.0


def _ell_ou(t: float, f_t, a_t, kappa: float, hp: HedgeParams, model: MarketModel,
            tk: TrackingKernels):
    tau = model.horizon_T - t
    if tau <= 0:
        return np.zeros_like(np.asarray(f_t, dtype=float))
    span = tau if tk.rate == 0 else min(tau, _OU_CUTOFF / tk.rate)
    x, w = gauss_legendre(_OU_NODES)
    u = x * span
    w = w * span * tk.Ptilde(t, t + u)
    sig, s2 = model.signal, model.sigma ** 2
    th, mu = sig.theta, sig.mu
    e1 = -np.expm1(-th * u) / th
    var = np.array([log_price_moments(0.0, float(uj), model).var_x for uj in u])
    cov = np.array([log_price_moments(0.0, float(uj), model).cov_ax for uj in u])
    base_x = mu * u - 0.5 * s2 * u  # mean of X at a_t = mu
    f_t = np.asarray(f_t, dtype=float)
    da = np.asarray(a_t, dtype=float) - mu
    ex = np.exp(np.multiply.outer(da, e1))  # e^{(a_t - mu) E1(u)}
    decay = np.exp(-th * u)
    mean_a = mu + np.multiply.outer(da, decay)
    af = (mean_a + cov) * ex @ (w * np.exp(base_x + 0.5 * var))
    fy = (1.0 / np.sqrt(ex)) @ (w * np.exp(-0.5 * base_x + var / 8.0))
    return (f_t * af - hp.phi * kappa * fy / np.sqrt(f_t)) / (2.0 * hp.eta)


def ell_no_transient(t, f_t, a_t, kappa: float, hp: HedgeParams, model: MarketModel):
    """Forcing term ell_t = E[int_t^T Ptilde(t, s)(A_s F_s - phi Y_s) ds | F_t] / (2 eta)."""
    tk = tracking_kernels(hp, model.horizon_T)
    f_t = np.asarray(f_t, dtype=float)
    if np.any(f_t <= 0):
        raise DomainError("f_t must be > 0")
    if model.signal.variant == "ou":
        return _ell_ou(float(t), f_t, a_t, kappa, hp, model, tk)
    a = model.signal.initial
    kh = _half_rate(model, a)
    return (a * f_t * tk.K(t, a) - hp.phi * kappa * tk.K(t, kh) / np.sqrt(f_t)) / (2.0 * hp.eta)


@dataclass(frozen=True, eq=False)
class HedgePath:
    times: np.ndarray
    nu: np.ndarray
    q: np.ndarray
    i: np.ndarray
    z: np.ndarray
    ell: np.ndarray
    kappa: float
    q0: np.ndarray = field(repr=False, default=None)


def ell_grid(paths: PathBundle, kappa: float, hp: HedgeParams, model: MarketModel) -> np.ndarray:
    """ell evaluated on every grid point of every path."""
    times, f = paths.times, paths.f
    if model.signal.variant == "ou":
        out = np.empty_like(f)
        tk = tracking_kernels(hp, model.horizon_T)
        for k, t in enumerate(times):
            out[:, k] = _ell_ou(float(t), f[:, k], paths.a[:, k], kappa, hp, model, tk)
        return out
    return ell_no_transient(times[None, :], f, None, kappa, hp, model)


def hedge_path_no_transient(paths: PathBundle, kappa: float, hp: HedgeParams,
                            model: MarketModel) -> HedgePath:
    """Optimal CEX strategy nu = P Q + ell when the LP's trades leave no impact."""
    if hp.c != 0:
        raise WrongSolverError("hedge_path_no_transient requires c = 0; use the Riccati route")
    tk = tracking_kernels(hp, model.horizon_T)
    times = paths.times
    dt = paths.dt
    y0 = kappa / np.sqrt(paths.f[:, 0])
    q0 = np.broadcast_to(np.asarray(hp.initial_inventory(y0), dtype=float), y0.shape).copy()
    ell = ell_grid(paths, kappa, hp, model)
    step_decay = tk.Ptilde(times[:-1], times[1:])
    q = np.empty_like(ell)
    q[:, 0] = q0
    for k in range(len(times) - 1):
        d = step_decay[k]
        q[:, k + 1] = d * q[:, k] + 0.5 * dt * (d * ell[:, k] + ell[:, k + 1])
    nu = tk.P(times)[None, :] * q + ell
    zeros = np.zeros_like(q)
    return HedgePath(times, nu, q, zeros, zeros.copy(), ell, float(kappa), q0)


# --- matrix Riccati route ---------------------------------------------------------


@dataclass(frozen=True)
class DreMatrices:
    B11: np.ndarray
    B12: np.ndarray
    B21: np.ndarray
    B22: np.ndarray
    G: np.ndarray

    @classmethod
    def build(cls, hp: HedgeParams) -> "DreMatrices":
        eta, phi, c, beta = hp.eta, hp.phi, hp.c, hp.beta_res
        s = 1.0 / (2.0 * eta)
        return cls(
            B11=np.array([[-beta, 0.0], [0.0, 0.0]]),
            B12=np.array([[c, 0.0], [1.0, 0.0]]),
            B21=s * np.array([[beta, phi + c * beta], [0.0, 2.0 * eta * beta]]),
            B22=s * np.array([[0.0, c * beta], [0.0, 2.0 * eta * beta]]),
            G=s * np.array([[0.0, c], [0.0, 0.0]]),
        )

    def rhs(self, P: np.ndarray) -> np.ndarray:
        """P' = -P B11 - P B12 P + B21 + B22 P (works on stacks of matrices)."""
        return -P @ self.B11 - P @ self.B12 @ P + self.B21 + self.B22 @ P


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    grid: np.ndarray
    P_mat: np.ndarray
    dP: np.ndarray
    residual_sup: float
    mats: DreMatrices
    hp: HedgeParams

    def P_at(self, t):
        """Cubic Hermite interpolation using the exact derivatives on the mesh."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        g = self.grid
        h = g[1] - g[0]
        idx = np.clip(((t - g[0]) / h).astype(int), 0, len(g) - 2)
        s = ((t - g[idx]) / h)[:, None, None]
        p0, p1 = self.P_mat[idx], self.P_mat[idx + 1]
        m0, m1 = self.dP[idx] * h, self.dP[idx + 1] * h
        s2, s3 = s * s, s * s * s
        out = ((2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0
               + (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * m1)
        return out


def _residual_sup(P: np.ndarray, dP_exact: np.ndarray, h: float) -> float:
    """Sup-norm of the DRE defect using a five-point centered derivative."""
    if len(P) < 5:
        return float("nan")
    fd = (P[:-4] - 8 * P[1:-3] + 8 * P[3:-1] - P[4:]) / (12.0 * h)
    return float(np.max(np.abs(fd - dP_exact[2:-2])))


def solve_dre(hp: HedgeParams, horizon_T: float, mesh_n: int = 4000,
              tol: float = DRE_TOLERANCE, max_refinements: int = 3) -> RiccatiSolution:
    """Backward RK4 for the 2x2 Riccati equation with P(T) = G."""
    hp.check_impact_bound()
    if mesh_n < 1:
        raise DomainError("mesh_n must be >= 1")
    mats = DreMatrices.build(hp)
    n = int(mesh_n)
    for _ in range(max_refinements + 1):
        grid = np.linspace(0.0, horizon_T, n + 1)
        h = horizon_T / n
        P = np.empty((n + 1, 2, 2))
        P[n] = mats.G
        for k in range(n, 0, -1):
            p = P[k]
            k1 = mats.rhs(p)
            k2 = mats.rhs(p - 0.5 * h * k1)
            k3 = mats.rhs(p - 0.5 * h * k2)
            k4 = mats.rhs(p - h * k3)
            P[k - 1] = p - h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(P)):
            raise ConvergenceError("Riccati solution blew up")
        dP = mats.rhs(P)
        res = _residual_sup(P, dP, h)
        if not (res > tol) or n < 5:
            return RiccatiSolution(grid, P, dP, res, mats, hp)
        n *= 2
    raise ConvergenceError(f"DRE residual {res:.3e} above tolerance {tol:.1e} after refinement")


def _rk4_linear(t0: float, h: float, substeps: int, x: np.ndarray, A_of_t, forcing_of_t):
    """Integrate x' = A(t) x + b(t) over [t0, t0 + h] with RK4 substeps (h may be negative)."""
    dh = h / substeps
    t = t0
    for _ in range(substeps):
        f = lambda tt, xx: A_of_t(tt) @ xx + forcing_of_t(tt)
        k1 = f(t, x)
        k2 = f(t + dh / 2, x + dh / 2 * k1)
        k3 = f(t + dh / 2, x + dh / 2 * k2)
        k4 = f(t + dh, x + dh * k3)
        x = x + dh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dh
    return x


def assemble_fbsde_solution(dre: RiccatiSolution, paths: PathBundle, kappa: float,
                            hp: HedgeParams, model: MarketModel, substeps: int = 4) -> HedgePath:
    """Optimal (nu, Z, I, Q) from the Riccati solution for deterministic signals.

    ell_t = w1(t) F_t + w2(t) F_t^{-1/2}, where each weight vector solves a
    backward linear ODE driven by M(t) = P(t) B12 - B22.  The forward state
    Phi = (I, Q) uses the transition of Phi' = (B12 P + B11) Phi and a
    trapezoid on its forcing B12 ell.  Psi = P Phi + ell = (nu, Z).
    """
    a = _deterministic_drift(model)
    T = model.horizon_T
    if abs(dre.grid[-1] - T) > 1e-12 * max(1.0, T):
        raise ShapeError("Riccati mesh horizon differs from the market horizon")
    mats = dre.mats
    eta, phi, c, beta = hp.eta, hp.phi, hp.c, hp.beta_res
    kh = _half_rate(model, a)
    times = paths.times
    dt = paths.dt
    m = len(times) - 1
    I2 = np.eye(2)

    def P_of(t):
        return dre.P_at(t)[0]

    def M_of(t):
        return P_of(t) @ mats.B12 - mats.B22

    specs = (
        (a, np.array([-a / (2 * eta), 0.0]), np.zeros(2)),
        (kh, np.array([(phi + c * beta) * kappa / (2 * eta), beta * kappa - kappa * kh]),
         np.array([c * kappa / (2 * eta), 0.0])),
    )
    weights = []
    for k_q, b_q, L_q in specs:
        w = np.empty((m + 1, 2))
        w[m] = L_q
        A = lambda tt, k_q=k_q: -(M_of(tt) + k_q * I2)
        forcing = lambda tt, b_q=b_q: b_q
        for k in range(m, 0, -1):
            w[k - 1] = _rk4_linear(times[k], -dt, substeps, w[k], A, forcing)
        weights.append(w)
    w1, w2 = weights

    f = paths.f
    ell = f[:, :, None] * w1[None] + (1.0 / np.sqrt(f))[:, :, None] * w2[None]

    Aphi = lambda tt: mats.B12 @ P_of(tt) + mats.B11
    zero2 = lambda tt: np.zeros((2, 2))
    U = np.empty((m, 2, 2))
    for k in range(m):
        U[k] = _rk4_linear(times[k], dt, substeps, I2.copy(), Aphi, zero2)

    y0 = kappa / np.sqrt(f[:, 0])
    q0 = np.broadcast_to(np.asarray(hp.initial_inventory(y0), dtype=float), y0.shape).copy()
    n = f.shape[0]
    Phi = np.empty((n, m + 1, 2))
    Phi[:, 0, 0] = 0.0
    Phi[:, 0, 1] = q0
    B12 = mats.B12
    for k in range(m):
        src_left = ell[:, k] @ B12.T
        src_right = ell[:, k + 1] @ B12.T
        Phi[:, k + 1] = (Phi[:, k] + 0.5 * dt * src_left) @ U[k].T + 0.5 * dt * src_right
    Pg = dre.P_at(times)
    Psi = np.einsum("kij,nkj->nki", Pg, Phi) + ell
    return HedgePath(times, Psi[:, :, 0], Phi[:, :, 1], Phi[:, :, 0], Psi[:, :, 1],
                     ell[:, :, 0], float(kappa), q0)


def solve_hedge(paths: PathBundle, kappa: float, hp: HedgeParams, model: MarketModel,
                dre_mesh: int = 4000) -> HedgePath:
    """Dispatch to the closed-form solver when c = 0, otherwise the Riccati route."""
    if hp.c == 0:
        return hedge_path_no_transient(paths, kappa, hp, model)
    dre = solve_dre(hp, model.horizon_T, dre_mesh)
    return assemble_fbsde_solution(dre, paths, kappa, hp, model)


# --- diagnostics ------------------------------------------------------------------


def _cumtrapz(x: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(x)
    np.cumsum(0.5 * (x[:, 1:] + x[:, :-1]) * dt, axis=1, out=out[:, 1:])
    return out


def rebuild_state(nu: np.ndarray, q0: np.ndarray, hp: HedgeParams, dt: float):
    """Inventory and impact implied by a trading-rate path on the mesh.

    Q uses the trapezoid rule; I uses the exact exponential step with the
    step-average rate.
    """
    q = q0[:, None] + _cumtrapz(nu, dt)
    i = np.zeros_like(nu)
    if hp.c > 0:
        decay = math.exp(-hp.beta_res * dt)
        gain = hp.c * (-math.expm1(-hp.beta_res * dt)) / hp.beta_res
        avg = 0.5 * (nu[:, 1:] + nu[:, :-1])
        for k in range(nu.shape[1] - 1):
            i[:, k + 1] = i[:, k] * decay + gain * avg[:, k]
    return q, i


def pathwise_criterion(nu: np.ndarray, paths: PathBundle, kappa: float, hp: HedgeParams,
                       q0: np.ndarray | None = None, control_variate: bool = False) -> np.ndarray:
    """Per-path (Y_T + Q_T) S_T - int (S + eta nu) nu - phi/2 int (Q + Y)^2.

    With ``control_variate`` the discrete Ito sum sigma sum F_k (Q_k + Y_k / 2) dW_k,
    which has mean zero because its integrand is adapted, is subtracted.  It
    removes the martingale part of the terminal position value and leaves the
    expectation unchanged.
    """
    dt = paths.dt
    y = paths.reserves(kappa)
    if q0 is None:
        q0 = np.broadcast_to(np.asarray(hp.initial_inventory(y[:, 0]), float), y[:, 0].shape)
    if nu.shape != y.shape:
        raise ShapeError("nu must match the path grid")
    q, i = rebuild_state(nu, np.asarray(q0, float), hp, dt)
    s = paths.f + i
    run = (s + hp.eta * nu) * nu + 0.5 * hp.phi * (q + y) ** 2
    integral = np.sum(0.5 * (run[:, 1:] + run[:, :-1]), axis=1) * dt
    out = (y[:, -1] + q[:, -1]) * s[:, -1] - integral
    if control_variate:
        f = paths.f[:, :-1]
        out = out - paths.model.sigma * np.sum(f * (q[:, :-1] + 0.5 * y[:, :-1]) * paths.dw, axis=1)
    return out


@dataclass(frozen=True)
class ResidualStats:
    times: np.ndarray
    mean: np.ndarray
    se: np.ndarray

    @property
    def z_scores(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.se > 0, self.mean / self.se, np.where(self.mean == 0, 0.0, np.inf))


def _suffix_trapz(x: np.ndarray, dt: float) -> np.ndarray:
    """int_{t_k}^{T} x ds by the trapezoid rule, for every k."""
    seg = 0.5 * (x[:, 1:] + x[:, :-1]) * dt
    out = np.zeros_like(x)
    out[:, :-1] = np.cumsum(seg[:, ::-1], axis=1)[:, ::-1]
    return out


def gateaux_samples(nu: np.ndarray, paths: PathBundle, kappa: float, hp: HedgeParams,
                    model: MarketModel, q0: np.ndarray | None = None) -> np.ndarray:
    """Per-path samples of the Gateaux derivative on the full grid.

    Conditional expectations of functions of F_s are taken in closed form;
    the terms in nu, I and Q use the realised future of each path, so the
    sample is unbiased for the derivative after averaging across paths.
    """
    a = _deterministic_drift(model)
    kh = _half_rate(model, a)
    dt = paths.dt
    times = paths.times
    y = paths.reserves(kappa)
    f = paths.f
    if q0 is None:
        q0 = np.broadcast_to(np.asarray(hp.initial_inventory(y[:, 0]), float), y[:, 0].shape)
    q, i = rebuild_state(nu, np.asarray(q0, float), hp, dt)
    tau = model.horizon_T - times
    c, beta, phi = hp.c, hp.beta_res, hp.phi
    ce1 = a * f * int_exp(a, tau) - phi * kappa / np.sqrt(f) * int_exp(kh, tau)
    pw1 = _suffix_trapz(c * nu - beta * i - phi * q, dt)
    out = -2.0 * hp.eta * nu + c * (y + q) + ce1 + pw1
    if c > 0:
        ce2 = kappa * (kh - beta) / np.sqrt(f) * int_exp(kh - beta, tau)
        # int_t^T e^{-beta (s - t)} Q_s ds along each path, by backward recursion
        decay = math.exp(-beta * dt)
        acc = np.zeros_like(q)
        for k in range(len(times) - 2, -1, -1):
            acc[:, k] = decay * acc[:, k + 1] + 0.5 * dt * (q[:, k] + decay * q[:, k + 1])
        out = out + c * (ce2 - beta * acc)
    return out


def gateaux_residual(hedge: HedgePath, paths: PathBundle, kappa: float, hp: HedgeParams,
                     model: MarketModel, n_checkpoints: int = 10,
                     nu: np.ndarray | None = None) -> ResidualStats:
    """Mean and standard error of the Gateaux derivative at evenly spaced checkpoints.

    ``nu`` overrides the strategy that is tested (defaults to ``hedge.nu``).
    """
    nu = hedge.nu if nu is None else nu
    samples = gateaux_samples(nu, paths, kappa, hp, model, hedge.q0)
    m = samples.shape[1] - 1
    # checkpoints j T / n for j = 0..n-1; the terminal instant is excluded since
    # the remaining horizon (and with it the residual) vanishes there
    idx = np.unique(np.round(np.linspace(0, m, n_checkpoints + 1)[:-1]).astype(int))
    sel = samples[:, idx]
    n = sel.shape[0]
    se = sel.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(len(idx), np.inf)
    return ResidualStats(paths.times[idx], sel.mean(axis=0), se)


def directional_derivative(nu: np.ndarray, direction: np.ndarray, paths: PathBundle,
                           kappa: float, hp: HedgeParams, model: MarketModel,
                           q0: np.ndarray | None = None) -> tuple[float, float]:
    """<DJ[nu], direction> estimated across paths, with its standard error."""
    samples = gateaux_samples(nu, paths, kappa, hp, model, q0)
    prod = samples * direction
    per_path = np.sum(0.5 * (prod[:, 1:] + prod[:, :-1]), axis=1) * paths.dt
    return float(per_path.mean()), float(per_path.std(ddof=1) / math.sqrt(len(per_path)))


def smooth_perturbation(times: np.ndarray, seed: int, n_modes: int = 4) -> np.ndarray:
    """Deterministic random smooth function on [0, T] built from a few sine modes."""
    gen = np.random.default_rng(seed)
    T = times[-1]
    coef = gen.standard_normal(n_modes) / np.arange(1, n_modes + 1)
    phase = gen.uniform(0, 2 * np.pi, n_modes)
    out = np.zeros_like(times)
    for j in range(n_modes):
        out += coef[j] * np.sin((j + 1) * np.pi * times / T + phase[j])
    return out


def hedge_rows(h: HedgePath):
    """Yield (path, t, nu, Q, I, Z, ell) tuples in path-major order."""
    for p in range(h.nu.shape[0]):
        for k, t in enumerate(h.times):
            yield p, t, h.nu[p, k], h.q[p, k], h.i[p, k], h.z[p, k], h.ell[p, k]
