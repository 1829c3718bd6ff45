"""Follow a few hedged paths: the CEX inventory Q chases -Y, the pool's risky reserves.

A slow hedger (small phi/eta) lags the target; a fast one tracks it closely at the
price of heavier trading costs.

Run:  python3 demos/hedge_paths.py
"""

import numpy as np

from ammhl.hedging import HedgeParams, hedge_path_no_transient
from ammhl.liquidity_opt import kappa_star_closed_form_A0
from ammhl.market_dynamics import MarketModel, SimGrid, simulate_paths

model = MarketModel(1.0, 0.2, 0.3)
gamma = 0.1

for ratio in (10.0, 1e3):
    hp = HedgeParams.from_ratio(1e-2, ratio)
    kappa = kappa_star_closed_form_A0(model, gamma, hp)[0]
    paths = simulate_paths(model, SimGrid(300, 3, seed=7), kappa=kappa)
    hedge = hedge_path_no_transient(paths, kappa, hp, model)
    print(f"phi/eta = {ratio:g}, kappa* = {kappa:,.0f}")
    print("    t        Y        -Q      gap")
    for k in range(0, 301, 60):
        y, q = paths.y[0, k], hedge.q[0, k]
        print(f"  {paths.times[k]:.2f}  {y:9.2f} {-q:9.2f} {y + q:8.2f}")
    gap = hedge.q[:, -1] + paths.y[:, -1]
    print(f"  terminal |Q+Y| over 3 paths: {np.abs(gap).round(2)}\n")
