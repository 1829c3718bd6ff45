"""Command-line entry point: ``ammhl <command> [--config FILE] [--set k=v ...] [--out DIR] [--seed N]``.

Exit status 0 on success, 2 for configuration or precondition errors, 3 for
numerical failures.  Errors are printed to stderr as one ``key=value`` line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, csvio
from .config import ExperimentConfig
from .errors import AmmhlError, ConfigError
from .experiments import (WEALTH_COLUMNS, distribution_run, expected_dex_value_change,
                          resolve_kappa, run_figure_sweep)
from .hedging import hedge_rows, solve_dre, solve_hedge
from .liquidity_opt import StageOneInputs, optimize_kappa_mc, stage_one_closed_form
from .market_dynamics import paths_to_rows, simulate_paths
from .noise_flow import simulate_fee_accrual

COMMANDS = ("simulate", "hedge-path", "riccati", "liquidity", "sweep", "decompose")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ammhl", description="AMM liquidity provision and CEX hedging experiments")
    p.add_argument("--version", action="version", version=f"ammhl v{__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="INI file with market/hedge/flow/grid/sweep/outputs sections")
    p.add_argument("--set", dest="overrides", nargs="+", action="extend", default=[],
                   metavar="SECTION.KEY=VALUE", help="override config entries")
    p.add_argument("--out", help="output directory (default: outputs.directory)")
    p.add_argument("--seed", type=int, help="override grid.seed")
    p.add_argument("--threads", type=int, help="worker threads (default: AMMHL_THREADS or all cores)")
    return p


class _ArgError(Exception):
    pass


class _QuietParser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D401 - argparse hook
        raise _ArgError(message)


def _build_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        key, value = item.split("=", 1)
        cfg = cfg.with_override(key.strip(), value)
    if args.seed is not None:
        cfg = cfg.with_override("grid.seed", str(args.seed))
    return cfg


def _cmd_simulate(cfg, out, seed, threads):
    kappa, _ = resolve_kappa(cfg)
    model = cfg.market_model()
    paths = simulate_paths(model, cfg.sim_grid(seed), kappa=kappa, threads=threads)
    fees = simulate_fee_accrual(paths, cfg.flow_params(), kappa, threads=threads)
    text = cfg.to_text()
    extra = {"kappa": csvio.fmt(kappa)}
    csvio.write_csv(os.path.join(out, "paths.csv"), ("path", "t", "F", "A", "Y"),
                    paths_to_rows(paths), text, extra)
    csvio.write_matrix_csv(os.path.join(out, "fees.csv"), ("path", "t", "cum_fee_realized", "cum_fee_rate"),
                           range(paths.n_paths), paths.times, (fees.realized, fees.rate), text, extra)
    csvio.write_json(os.path.join(out, "summary.json"), {
        "version": __version__, "kappa": kappa, "n_paths": paths.n_paths,
        "mean_F_T": float(paths.f[:, -1].mean()),
        "mean_fee_realized": float(fees.realized[:, -1].mean()),
        "mean_fee_rate": float(fees.rate[:, -1].mean()),
    })


def _cmd_hedge_path(cfg, out, seed, threads):
    kappa, _ = resolve_kappa(cfg)
    model, hp = cfg.market_model(), cfg.hedge_params()
    paths = simulate_paths(model, cfg.sim_grid(seed), kappa=kappa, threads=threads)
    hedge = solve_hedge(paths, kappa, hp, model, cfg.grid.dre_mesh)
    text = cfg.to_text()
    csvio.write_csv(os.path.join(out, "hedge.csv"), ("path", "t", "nu", "Q", "I", "Z", "ell"),
                    hedge_rows(hedge), text, {"kappa": csvio.fmt(kappa)})
    gap = hedge.q[:, -1] + paths.y[:, -1]
    csvio.write_json(os.path.join(out, "summary.json"), {
        "version": __version__, "kappa": kappa,
        "mean_terminal_gap_sq": float((gap * gap).mean()),
        "solver": "closed_form" if hp.c == 0 else "riccati",
    })


def _cmd_riccati(cfg, out, seed, threads):
    hp = cfg.hedge_params()
    dre = solve_dre(hp, cfg.market.horizon_T, cfg.grid.dre_mesh)
    p = dre.P_mat
    csvio.write_csv(os.path.join(out, "riccati.csv"), ("t", "P11", "P12", "P21", "P22"),
                    ((t, p[k, 0, 0], p[k, 0, 1], p[k, 1, 0], p[k, 1, 1]) for k, t in enumerate(dre.grid)),
                    cfg.to_text())
    csvio.write_json(os.path.join(out, "summary.json"), {
        "version": __version__, "mesh": len(dre.grid) - 1, "residual_sup": dre.residual_sup,
    })


def _cmd_liquidity(cfg, out, seed, threads):
    inputs = StageOneInputs(cfg.market_model(), cfg.hedge_params(), cfg.flow.gamma, cfg.market.kappa_max)
    res = stage_one_closed_form(inputs)
    if cfg.grid.kappa_grid_n > 0:
        paths = simulate_paths(inputs.model, cfg.sim_grid(seed), kappa=1.0, threads=threads)
        cap = StageOneInputs(inputs.model, inputs.hp, inputs.gamma,
                             min(inputs.kappa_max, 2.0 * max(res.kappa_ref, res.kappa_star, 1.0)))
        mc = optimize_kappa_mc(cap, paths, cfg.grid.kappa_grid_n)
        res.mc_value_curve = mc.mc_value_curve
        res.argmax_mc = mc.argmax_mc
        csvio.write_csv(os.path.join(out, "value_curve.csv"), ("kappa", "value", "se"),
                        mc.mc_value_curve, cfg.to_text())
    with open(os.path.join(out, "liquidity.json"), "w", encoding="utf-8") as fh:
        fh.write(res.to_json() + "\n")


def _cmd_sweep(cfg, out, seed, threads):
    run_figure_sweep(cfg, out, seed, threads)


def _cmd_decompose(cfg, out, seed, threads):
    kappa, _ = resolve_kappa(cfg)
    paths, hedge, fees, table = distribution_run(cfg, kappa, seed, threads)
    csvio.write_csv(os.path.join(out, "wealth.csv"), WEALTH_COLUMNS, table.rows(), cfg.to_text(),
                    {"kappa": csvio.fmt(kappa)})
    n = len(table)
    se = lambda x: float(x.std(ddof=1) / n ** 0.5) if n > 1 else float("nan")
    m = cfg.market_model()
    csvio.write_json(os.path.join(out, "summary.json"), {
        "version": __version__, "kappa": kappa, "n_paths": n,
        "ledger_gap": table.ledger_gap(),
        "mean_total": float(table.total.mean()), "se_total": se(table.total),
        "mean_normalized_total": float(table.normalized_total.mean()),
        "mean_dex_value_change": float(table.dex_value_change.mean()),
        "se_dex_value_change": se(table.dex_value_change),
        "expected_dex_value_change": expected_dex_value_change(kappa, m.f0, m.sigma, m.horizon_T),
        "mean_lvr": float(table.lvr.mean()), "se_lvr": se(table.lvr),
    })


_DISPATCH = {
    "simulate": _cmd_simulate,
    "hedge-path": _cmd_hedge_path,
    "riccati": _cmd_riccati,
    "liquidity": _cmd_liquidity,
    "sweep": _cmd_sweep,
    "decompose": _cmd_decompose,
}


def _record(status: int, code: str, message: str) -> str:
    msg = " ".join(str(message).split())
    return f"ammhl-error status={status} code={code} message={json.dumps(msg)}"


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    parser.__class__ = _QuietParser
    try:
        args = parser.parse_args(argv)
    except _ArgError as exc:
        print(_record(2, "usage", exc), file=sys.stderr)
        return 2
    try:
        cfg = _build_config(args)
        out = args.out or cfg.outputs.directory
        os.makedirs(out, exist_ok=True)
        _DISPATCH[args.command](cfg, out, args.seed, args.threads)
    except AmmhlError as exc:
        print(_record(exc.exit_status, exc.code, exc), file=sys.stderr)
        return exc.exit_status
    except (ValueError, ArithmeticError) as exc:
        print(_record(3, "numeric", exc), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
