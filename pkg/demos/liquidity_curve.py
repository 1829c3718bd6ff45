"""How much depth does the LP supply, and how does that move with the hedging frictions?

Run:  python3 demos/liquidity_curve.py
"""

from dataclasses import replace

from ammhl.config import figure_defaults
from ammhl.experiments import stage_one_for

base = figure_defaults(1)
res = stage_one_for(base)
print(f"baseline: kappa_ref = {res.kappa_ref:,.1f}   kappa* = {res.kappa_star:,.1f}   "
      f"ratio = {res.scaling:.4f}   B = {res.frak_B:.3e}")
if res.frak_B < 0:
    # the hedging penalty term turns negative here, so kappa* sits above the reference depth
    print("  B < 0 at these parameters: the hedged LP supplies more depth than kappa_ref")

print("\nphi/eta    kappa*")
for ratio in (1, 3, 10, 30, 100):
    cfg = replace(base, hedge=replace(base.hedge, phi=ratio * base.hedge.eta))
    print(f"{ratio:>7g}  {stage_one_for(cfg).kappa_star:>10,.0f}")

print("\nsigma      kappa*")
for sigma in (0.05, 0.075, 0.1, 0.125, 0.15):
    cfg = replace(base, market=replace(base.market, sigma=sigma))
    print(f"{sigma:>6g}  {stage_one_for(cfg).kappa_star:>12,.0f}")

print("\ngamma      kappa*")
for gamma in (0.1, 0.15, 0.2, 0.25, 0.3):
    cfg = replace(base, flow=replace(base.flow, gamma=gamma))
    print(f"{gamma:>6g}  {stage_one_for(cfg).kappa_star:>12,.0f}")
