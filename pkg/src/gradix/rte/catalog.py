"""Benchmark cases with closed-form solutions, addressable by name."""

import math
from dataclasses import replace

import numpy as np

from .. import autodiff as ad
from .. import special
from ..errors import UsageError
from .case import CaseSpec, derive_source_from_exact, piecewise

SQRT2 = math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)
DEFAULT_DATA_BOX = ((0.05, 0.95), (0.05, 0.95))


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise UsageError(f"{k} must be positive, got {v}")


def _signed_abs(u):
    """|u| that keeps dual tangents (sign taken from the primal)."""
    v = ad.value_of(u)
    if isinstance(v, np.ndarray):
        return u * np.where(v < 0, -1.0, 1.0)
    return -u if v < 0 else u


def _gaussian_ray(s, s0, ke, alpha, c):
    """Intensity after travelling from ``s0`` to ``s`` through exp(-(s-c)^2/alpha^2).

    Unit-speed ray, cold start at ``s0``:
    (alpha sqrt(pi)/2) exp(-k_e (s - c - alpha^2 k_e / 4)) [erf(u(s)) - erf(u(s0))]
    with u(s) = (s - c)/alpha - alpha k_e / 2.
    """
    shift = alpha * ke / 2.0
    lead = 0.5 * alpha * SQRT_PI * ad.exp((s - (c + alpha * alpha * ke / 4.0)) * (-ke))
    return lead * (ad.erf((s - c) / alpha - shift) - ad.erf((s0 - c) / alpha - shift))


def _constant(value):
    return lambda P: np.full(len(P), float(value))


def case_1d_gaussian(ke=1.0, alpha=0.02, c=0.5, mu=0.5):
    """Slab [0, 1] between black walls with a Gaussian emission peak at ``c``."""
    _positive(ke=ke, alpha=alpha)
    if not 0 < mu <= 1:
        raise UsageError("need 0 < mu <= 1")
    kappa = ke / mu
    i0 = math.exp(-c * c / (alpha * alpha)) / ke
    shift = kappa * alpha / 2.0
    amp = alpha * SQRT_PI / (2.0 * mu)
    erf_c = special.erf(c / alpha + shift)

    def exact(xs):
        x = xs[0]
        decay = ad.exp(x * (-kappa)) * i0
        bracket = ad.erf((c - x) / alpha + shift) - erf_c
        return decay - ad.exp((x - (c + kappa * alpha * alpha / 4.0)) * (-kappa)) * amp * bracket

    def source(P):
        return np.exp(-((P[:, 0] - c) / alpha) ** 2)

    return CaseSpec(
        name="1d-gaussian", coords=("x",), bounds=((0.0, 1.0),), direction=(mu,),
        ke=ke, ka=ke, ks=0.0, source=source, boundary=_constant(i0), exact=exact,
        params={"ke": ke, "alpha": alpha, "c": c, "mu": mu},
    )


def case_slab_discontinuous(ke=1.0, L=10.0, mu=1.0):
    """Slab [0, L] whose source switches off at L/2; unit inflow at x = 0."""
    _positive(ke=ke, L=L)
    if not 0 < mu <= 1:
        raise UsageError("need 0 < mu <= 1")
    half = 0.5 * L

    def exact(xs):
        x = xs[0]
        return piecewise(ad.value_of(x) > half, lambda: ad.exp((x - half) * (-ke)), lambda: 1.0 + 0.0 * x)

    case = CaseSpec(
        name="slab-discontinuous", coords=("x",), bounds=((0.0, L),), direction=(mu,),
        ke=ke, ka=ke, ks=0.0, source=_constant(0.0), boundary=_constant(1.0), exact=exact,
        params={"ke": ke, "L": L, "mu": mu},
    )
    return replace(case, source=derive_source_from_exact(case))


def case_square_diagonal(ke=1.0, L=1.0, direction=(1.0 / SQRT2, 1.0 / SQRT2)):
    """Square [0, L]^2; radiation along the diagonal, source off above x + y = L."""
    _positive(ke=ke, L=L)
    mu, eta = (float(v) for v in direction)

    def exact(xs):
        s = xs[0] + xs[1]
        return piecewise(ad.value_of(s) > L, lambda: ad.exp((s - L) * (-ke / SQRT2)), lambda: 1.0 + 0.0 * s)

    case = CaseSpec(
        name="square-diagonal", coords=("x", "y"), bounds=((0.0, L), (0.0, L)), direction=(mu, eta),
        ke=ke, ka=ke, ks=0.0, source=_constant(0.0), boundary=_constant(1.0), exact=exact,
        params={"ke": ke, "L": L},
    )
    return replace(case, source=derive_source_from_exact(case))


def case_2d_gaussian(ke=1.0, alpha=0.02, c=SQRT2 / 2, mu=SQRT2 / 2, eta=SQRT2 / 2):
    """Unit square with a Gaussian ridge across x + y = sqrt(2) c and cold black walls."""
    _positive(ke=ke, alpha=alpha)
    if abs(mu - eta) > 1e-12 or abs(mu * mu + eta * eta - 1.0) > 1e-12:
        raise UsageError("the closed form needs the diagonal direction mu = eta = sqrt(2)/2")

    def exact(xs):
        x, y = xs
        xi = (x + y) / SQRT2
        xi0 = _signed_abs(x - y) / SQRT2
        return _gaussian_ray(xi, xi0, ke, alpha, c)

    def source(P):
        return np.exp(-(((P[:, 0] + P[:, 1]) / SQRT2 - c) / alpha) ** 2)

    return CaseSpec(
        name="2d-gaussian", coords=("x", "y"), bounds=((0.0, 1.0), (0.0, 1.0)), direction=(mu, eta),
        ke=ke, ka=ke, ks=0.0, source=source, boundary=_constant(0.0), exact=exact,
        params={"ke": ke, "alpha": alpha, "c": c},
    )


def case_diag_gaussian(ke=1.0, alpha=0.02, c=SQRT2 / 2):
    """The 2D Gaussian case along x = y, as a 1D problem in arc length s in [0, sqrt(2)]."""
    _positive(ke=ke, alpha=alpha)

    def exact(xs):
        return _gaussian_ray(xs[0], 0.0, ke, alpha, c)

    def source(P):
        return np.exp(-((P[:, 0] - c) / alpha) ** 2)

    return CaseSpec(
        name="diag-gaussian", coords=("x",), bounds=((0.0, SQRT2),), direction=(1.0,),
        ke=ke, ka=ke, ks=0.0, source=source, boundary=_constant(0.0), exact=exact,
        params={"ke": ke, "alpha": alpha, "c": c},
    )


def make_inverse(case, data_box):
    """Turn a forward case into data assimilation on ``data_box``.

    Boundary data are dropped and noiseless intensity samples of the exact
    solution on the spatial subdomain ``data_box`` take their place.
    """
    if case.exact is None:
        raise UsageError("inverse problems need an exact solution to sample data from")
    data_box = tuple((float(lo), float(hi)) for lo, hi in data_box)
    if len(data_box) != case.dim:
        raise UsageError(f"data box needs {case.dim} intervals")
    for (lo, hi), axis in zip(data_box, case.spatial_axes):
        dlo, dhi = case.bounds[axis]
        if not (dlo <= lo < hi <= dhi):
            raise UsageError(f"data box {data_box} is not contained in the domain")
    return replace(case, name=case.name + "-inverse", use_boundary=False, data_box=data_box)


def case_2d_gaussian_inverse(ke=1.0, alpha=0.02, c=SQRT2 / 2, data_box=DEFAULT_DATA_BOX):
    return make_inverse(case_2d_gaussian(ke=ke, alpha=alpha, c=c), data_box)


def _manufactured(profile):
    def build(**kw):
        from .manufactured import manufactured_graded_case

        return manufactured_graded_case(profile, **kw)

    return build


CASES = {
    "1d-gaussian": case_1d_gaussian,
    "slab-discontinuous": case_slab_discontinuous,
    "square-diagonal": case_square_diagonal,
    "2d-gaussian": case_2d_gaussian,
    "diag-gaussian": case_diag_gaussian,
    "2d-gaussian-inverse": case_2d_gaussian_inverse,
    "manufactured-graded-linear": _manufactured("linear"),
    "manufactured-graded-radial": _manufactured("radial"),
}


def get_case(name, **params):
    """Build a catalog case; ``params`` are the builder's keyword arguments."""
    try:
        builder = CASES[name]
    except KeyError:
        raise UsageError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise UsageError(f"bad parameters for case {name!r}: {exc}") from None
