import math

import numpy as np
import pytest


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def within_se(samples, target, k=3.0):
    m, se = mean_se(samples)
    return abs(m - target) <= k * se, m, se


@pytest.fixture
def fig1():
    """Figure-1 market: sigma=0.1, T=1, eta=1e-2, phi/eta=10, gamma=0.2, F0=1."""
    from ammhl.hedging import HedgeParams
    from ammhl.market_dynamics import MarketModel

    return MarketModel(1.0, 0.1, 1.0), HedgeParams.from_ratio(1e-2, 10.0), 0.2


# --- acceptance reporting -------------------------------------------------------------
# Tests tagged @pytest.mark.criterion(n, "title") report one line per criterion at the end.

_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, {"title": title, "ok": True, "seconds": 0.0, "ran": False})
    if rep.when == "call":
        entry["ran"] = True
        entry["seconds"] += rep.duration
    if rep.failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "PASS" if e["ok"] and e["ran"] else ("FAIL" if e["ran"] or not e["ok"] else "SKIP")
        terminalreporter.write_line(f"criterion {n}: {status}  {e['title']}  ({e['seconds']:.1f} s)")
