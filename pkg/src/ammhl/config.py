"""Experiment configuration: an INI file with sections market/hedge/flow/grid/sweep/outputs.

Keys match the field names of :class:`MarketModel`, :class:`SignalModel`,
:class:`HedgeParams`, :class:`FlowParams` and :class:`SimGrid`.  Floats are
serialised with ``repr`` so that ``from_text(cfg.to_text()) == cfg``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError, DomainError
from .hedging import HedgeParams
from .market_dynamics import MarketModel, SignalModel, SimGrid
from .noise_flow import FlowParams

# Parameters a sweep may vary, mapped to the section that owns them.
SWEEP_WHITELIST = {
    "ratio": "hedge",
    "eta": "hedge",
    "phi": "hedge",
    "c": "hedge",
    "sigma": "market",
    "horizon_T": "market",
    "a": "market",
    "gamma": "flow",
}

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class MarketSection:
    f0: float = 1.0
    sigma: float = 0.1
    horizon_T: float = 1.0
    signal: str = "zero"
    a: float = 0.0
    theta: float = 1.0
    mu: float = 0.0
    xi: float = 0.0
    a0: float = 0.0
    kappa: str = "equilibrium"   # a number, or "equilibrium" for the closed-form kappa*
    kappa_max: float = 1e9


@dataclass(frozen=True)
class HedgeSection:
    eta: float = 1e-2
    phi: float = 0.1
    c: float = 0.0
    beta_res: float = 1.0
    q0: str = "neutral"          # a number, or "neutral" for Q0 = -Y0


@dataclass(frozen=True)
class FlowSection:
    gamma: float = 0.2
    fee_pi: float = 0.003
    law: str = "uniform"
    v_bar: str = "auto"          # required for non-uniform laws


@dataclass(frozen=True)
class GridSection:
    n_steps: int = 1000
    n_paths: int = 1000
    seed: int = 0
    kappa_grid_n: int = 0        # 0 disables the Monte Carlo value curve
    dre_mesh: int = 4000


@dataclass(frozen=True)
class SweepSection:
    parameter: str = ""
    values: tuple[float, ...] = ()


@dataclass(frozen=True)
class OutputsSection:
    directory: str = "out"
    sample_paths: int = 0        # paths written to the sample-path CSVs
    distributions: bool = False  # wealth records per sweep point
    path_csv: bool = True


_SECTIONS = {
    "market": MarketSection,
    "hedge": HedgeSection,
    "flow": FlowSection,
    "grid": GridSection,
    "sweep": SweepSection,
    "outputs": OutputsSection,
}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _parse(kind, raw: str, key: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "tuple[float, ...]":
            return tuple(float(v) for v in raw.replace(",", " ").split()) if raw else ()
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key}={raw!r}") from exc


def _kind(section_cls, name: str):
    ann = {f.name: f.type for f in fields(section_cls)}[name]
    return {"float": float, "int": int, "bool": bool, "str": str}.get(ann, ann)


@dataclass(frozen=True)
class ExperimentConfig:
    market: MarketSection = field(default_factory=MarketSection)
    hedge: HedgeSection = field(default_factory=HedgeSection)
    flow: FlowSection = field(default_factory=FlowSection)
    grid: GridSection = field(default_factory=GridSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    outputs: OutputsSection = field(default_factory=OutputsSection)

    def __post_init__(self) -> None:
        p = self.sweep.parameter
        if p and p not in SWEEP_WHITELIST:
            raise ConfigError(f"unsupported sweep parameter {p!r}; allowed: {sorted(SWEEP_WHITELIST)}")
        if self.sweep.values and not p:
            raise ConfigError("sweep.values given without sweep.parameter")

    # -- serialisation -------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for name in _SECTIONS:
            sec = getattr(self, name)
            lines.append(f"[{name}]")
            for f in fields(sec):
                lines.append(f"{f.name} = {_format(getattr(sec, f.name))}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        parser.optionxform = str  # keep horizon_T case
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}".replace("\n", " ")) from exc
        unknown = set(parser.sections()) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        cfg = cls()
        for name in parser.sections():
            for key, raw in parser.items(name):
                cfg = cfg.with_override(f"{name}.{key}", raw)
        return cfg

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc

    def with_override(self, dotted: str, raw: str) -> "ExperimentConfig":
        """Return a copy with ``section.key`` set from its text form."""
        if "." not in dotted:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        name, key = dotted.split(".", 1)
        if name not in _SECTIONS:
            raise ConfigError(f"unknown config section {name!r}")
        sec = getattr(self, name)
        if key not in {f.name for f in fields(sec)}:
            raise ConfigError(f"unknown key {dotted!r}")
        value = _parse(_kind(type(sec), key), raw, dotted)
        return replace(self, **{name: replace(sec, **{key: value})})

    def with_sweep_value(self, value: float) -> "ExperimentConfig":
        """Apply one sweep point.  ``ratio`` sets phi = ratio * eta."""
        p = self.sweep.parameter
        if p == "ratio":
            return replace(self, hedge=replace(self.hedge, phi=float(value) * self.hedge.eta))
        if p == "a":
            return replace(self, market=replace(self.market, signal="constant", a=float(value)))
        section = SWEEP_WHITELIST[p]
        return self.with_override(f"{section}.{p}", repr(float(value)))

    # -- domain objects ------------------------------------------------------

    def market_model(self) -> MarketModel:
        m = self.market
        try:
            if m.signal == "zero":
                sig = SignalModel.zero()
            elif m.signal == "constant":
                sig = SignalModel.constant(m.a)
            elif m.signal == "ou":
                sig = SignalModel.ou(m.theta, m.mu, m.xi, m.a0)
            else:
                raise ConfigError(f"unknown signal {m.signal!r}")
            return MarketModel(m.f0, m.sigma, m.horizon_T, sig)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def hedge_params(self) -> HedgeParams:
        h = self.hedge
        try:
            q0 = None if h.q0 == "neutral" else float(h.q0)
            return HedgeParams(h.eta, h.phi, h.c, h.beta_res, q0)
        except (DomainError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def flow_params(self) -> FlowParams:
        fl = self.flow
        try:
            vb = None if fl.v_bar == "auto" else float(fl.v_bar)
            return FlowParams.from_gamma(fl.gamma, fl.fee_pi, fl.law, vb)
        except (DomainError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def sim_grid(self, seed: int | None = None) -> SimGrid:
        g = self.grid
        try:
            return SimGrid(g.n_steps, g.n_paths, g.seed if seed is None else seed)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def fixed_kappa(self) -> float | None:
        """The configured depth, or ``None`` when the equilibrium depth is requested."""
        k = self.market.kappa.strip().lower()
        if k in ("equilibrium", "kappa_star"):
            return None
        try:
            val = float(k)
        except ValueError as exc:
            raise ConfigError(f"market.kappa must be a number or 'equilibrium', got {k!r}") from exc
        if not (val > 0 and math.isfinite(val)):
            raise ConfigError("market.kappa must be > 0")
        return val


def figure_defaults(figure: int) -> ExperimentConfig:
    """Parameter sets of the figure captions."""
    base = ExperimentConfig()
    if figure == 1:
        return base
    if figure == 2:
        return replace(base, market=replace(base.market, sigma=0.2, horizon_T=0.3),
                       flow=replace(base.flow, gamma=0.1))
    if figure == 4:
        return replace(base, flow=replace(base.flow, gamma=0.25),
                       grid=replace(base.grid, n_paths=2000, n_steps=1000))
    if figure == 5:
        return replace(base, market=replace(base.market, sigma=0.2, signal="constant"),
                       hedge=replace(base.hedge, eta=1e-6, phi=1e-6))
    raise ConfigError(f"no defaults for figure {figure}")
