"""Small cancellation-safe scalar helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

LOG2 = math.log(2.0)


def logcosh(x):
    """log(cosh(x)) without overflow for large |x|."""
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - LOG2


def exprel(x):
    """(e^x - 1)/x with the removable singularity filled in."""
    return special.exprel(x)


def int_exp(k, tau):
    """Integral of e^{k u} over u in [0, tau], stable as k -> 0."""
    return tau * special.exprel(k * tau)


def int_exp_minus_affine(r, tau):
    """Integral of (e^{r u} - 1 - r u) over [0, tau].

    Equals tau * (r tau)^2 * sum_{n>=0} (r tau)^n / (n+3)!, which is what we
    evaluate when |r tau| is small to avoid a triple cancellation.
    """
    x = r * tau
    if abs(x) < 0.5:
        term = 1.0 / 6.0
        total = term
        n = 0
        while True:
            n += 1
            term *= x / (n + 3)
            total += term
            if abs(term) < 1e-18 * abs(total):
                break
        return tau * x * x * total
    return (math.expm1(x) - x) / r - x * tau / 2.0


def gauss_legendre(n: int):
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w
