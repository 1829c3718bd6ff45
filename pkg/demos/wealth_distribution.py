"""Where does the hedged LP's money come from?  Fees vs pool value vs CEX trading.

Run:  python3 demos/wealth_distribution.py
"""

import numpy as np

from ammhl.config import figure_defaults
from ammhl.experiments import distribution_run, expected_dex_value_change, resolve_kappa

cfg = figure_defaults(4)
kappa, _ = resolve_kappa(cfg)
_, _, _, table = distribution_run(cfg, kappa, seed=11)

print(f"kappa* = {kappa:,.1f} over {len(table)} paths\n")
for name in ("fee_revenue", "dex_value_change", "risk_offsetting_pnl", "cex_cost", "total"):
    x = getattr(table, name)
    lo, med, hi = np.percentile(x, [5, 50, 95])
    print(f"{name:>20}: mean {x.mean():9.2f}   5% {lo:9.2f}   median {med:9.2f}   95% {hi:9.2f}")

m = cfg.market_model()
print(f"\nexpected pool value change  {expected_dex_value_change(kappa, m.f0, m.sigma, m.horizon_T):9.2f}")
print(f"mean LVR                    {table.lvr.mean():9.2f}")
print(f"ledger gap (direct vs sum)  {table.ledger_gap():.2e}")
