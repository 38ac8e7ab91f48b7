"""Special functions needed by the exact solutions."""

import math

import numpy as np

# Abramowitz & Stegun 7.1.26, |error| <= 1.5e-7
_P = 0.3275911
_A = (0.254829592, -0.284496736, 1.421413741, -1.453152027, 1.061405429)

TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def erf(x):
    """Rational approximation of the error function.

    Accepts a float or an ndarray. Odd symmetry is exact by construction.
    """
    if isinstance(x, np.ndarray):
        ax = np.abs(x)
        t = 1.0 / (1.0 + _P * ax)
        poly = t * (_A[0] + t * (_A[1] + t * (_A[2] + t * (_A[3] + t * _A[4]))))
        return np.sign(x) * (1.0 - poly * np.exp(-ax * ax))
    x = float(x)
    if x == 0.0:
        return 0.0
    ax = abs(x)
    t = 1.0 / (1.0 + _P * ax)
    poly = t * (_A[0] + t * (_A[1] + t * (_A[2] + t * (_A[3] + t * _A[4]))))
    y = 1.0 - poly * math.exp(-ax * ax)
    return y if x >= 0.0 else -y


def erf_prime(x):
    """Analytic derivative 2/sqrt(pi) * exp(-x^2)."""
    if isinstance(x, np.ndarray):
        return TWO_OVER_SQRT_PI * np.exp(-x * x)
    return TWO_OVER_SQRT_PI * math.exp(-x * x)


def erf_series(x, terms=30):
    """Maclaurin series of erf, used as an independent check for moderate |x|."""
    total = 0.0
    for n in range(terms):
        total += (-1) ** n * x ** (2 * n + 1) / (math.factorial(n) * (2 * n + 1))
    return TWO_OVER_SQRT_PI * total
