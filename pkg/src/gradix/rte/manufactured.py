"""Manufactured graded-index cases that exercise the refractive-gradient terms.

The source is built by applying the full steady operator, written in its
product form, to a chosen smooth intensity with central finite differences.
It never goes through the expanded ``(V, coef)`` form used by the residual,
so agreement between the two is a genuine check of the expansion.
"""

import math

import numpy as np

from .. import autodiff as ad
from ..errors import SingularityError, UsageError
from ..sampling import directions, sphere_rule
from .case import POLE_MARGIN, POLE_TOL, CaseSpec

FD_STEP = 1e-6
SOURCE_RULE_ORDER = 16


def smooth_intensity(xs):
    """Default manufactured solution on (x, y, theta, phi)."""
    x, y, th, ph = xs
    spatial = ad.exp(x * -0.5) * (ad.sin(y * math.pi) * 0.25 + 1.0)
    angular = ad.cos(th) * 0.3 + ad.sin(th) * ad.cos(ph) * 0.2 + 1.0
    return spatial * angular


def linear_anisotropic(om, om_prime):
    """Phi = 1 + 0.5 cos(scattering angle)."""
    return 1.0 + 0.5 * (om @ om_prime.T)


PROFILES = {
    "linear": (
        lambda S: 1.0 + 0.2 * S[:, 0],
        lambda S: np.column_stack([np.full(len(S), 0.2), np.zeros(len(S))]),
    ),
    "radial": (
        lambda S: 1.5 - (S[:, 0] - 0.5) ** 2 - (S[:, 1] - 0.5) ** 2,
        lambda S: np.column_stack([-2.0 * (S[:, 0] - 0.5), -2.0 * (S[:, 1] - 0.5)]),
    ),
}


def _eval(f, P):
    return np.asarray(f([P[:, j] for j in range(P.shape[1])]), dtype=float) * np.ones(len(P))


def _central(fn, P, axis, h=FD_STEP):
    Pp, Pm = P.copy(), P.copy()
    Pp[:, axis] += h
    Pm[:, axis] -= h
    return (fn(Pp) - fn(Pm)) / (2 * h)


def angular_terms(f, P, n, grad_n):
    """Both refractive redistribution terms applied to ``f`` at ``P``.

    ``P`` columns are (x, y, theta, phi); ``n`` and ``grad_n`` are the index
    and its in-plane gradient at the points. Returns
    ``(1/(n sin th)) d/dth[f (Omega cos th - k).grad n] + (1/(n sin th)) d/dphi[(s1.grad n) f]``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    st = np.sin(P[:, 2])
    if np.any(np.abs(st) < POLE_TOL):
        raise SingularityError("angular terms evaluated at a pole (sin theta ~ 0)")
    g3 = np.column_stack([grad_n[:, 0], grad_n[:, 1], np.zeros(len(P))])

    def theta_flux(Q):
        om = directions(Q[:, 2:4])
        k = np.array([0.0, 0.0, 1.0])
        g = np.sum((om * np.cos(Q[:, 2])[:, None] - k) * g3, axis=1)
        return _eval(f, Q) * g

    def phi_flux(Q):
        s1 = np.column_stack([-np.sin(Q[:, 3]), np.cos(Q[:, 3]), np.zeros(len(Q))])
        return np.sum(s1 * g3, axis=1) * _eval(f, Q)

    scale = 1.0 / (n * st)
    return scale * (_central(theta_flux, P, 2) + _central(phi_flux, P, 3))


def manufactured_source(f, P, ke, ka, ks, index, index_grad, phase, blackbody=None):
    """Steady graded-index operator applied to ``f``, by finite differences."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    S = P[:, :2]
    n, gn = index(S), index_grad(S)
    om = directions(P[:, 2:4])
    val = _eval(f, P)
    out = om[:, 0] * _central(lambda Q: _eval(f, Q), P, 0) + om[:, 1] * _central(lambda Q: _eval(f, Q), P, 1)
    out = out + ke * val + angular_terms(f, P, n, gn)
    if blackbody is not None:
        out = out - n * n * ka * blackbody(P)
    if ks:
        rule = sphere_rule(SOURCE_RULE_ORDER)
        M = len(rule.weights)
        Q = np.repeat(P[:, None, :], M, axis=1)
        Q[:, :, 2:4] = rule.nodes
        vals = _eval(f, Q.reshape(-1, 4)).reshape(len(P), M)
        kern = phase(om, directions(rule.nodes)) * rule.weights
        out = out - ks / (4 * math.pi) * np.sum(kern * vals, axis=1)
    return out


def manufactured_graded_case(profile="linear", exact=smooth_intensity, ke=1.0, ka=0.6, ks=0.4,
                             emission=0.1, phase=linear_anisotropic):
    """Steady 2D graded-index case whose exact solution is ``exact``.

    ``profile`` selects ``n = 1 + 0.2 x`` (``"linear"``) or
    ``n = 1.5 - |s - (0.5, 0.5)|^2`` (``"radial"``); both satisfy n >= 1 on
    the unit square. Inflow data are the exact solution itself.
    """
    if profile not in PROFILES:
        raise UsageError(f"unknown index profile {profile!r}; choose from {sorted(PROFILES)}")
    index, index_grad = PROFILES[profile]
    grid = np.stack(np.meshgrid(np.linspace(0, 1, 11), np.linspace(0, 1, 11)), -1).reshape(-1, 2)
    if np.min(index(grid)) < 1.0 - 1e-12:
        raise UsageError("refractive index must satisfy n >= 1")
    blackbody = None if emission is None else (lambda P, e=float(emission): np.full(len(P), e))

    def source(P):
        return manufactured_source(exact, P, ke, ka, ks, index, index_grad, phase, blackbody)

    def boundary(P):
        return _eval(exact, P)

    return CaseSpec(
        name=f"manufactured-graded-{profile}",
        coords=("x", "y", "theta", "phi"),
        bounds=((0.0, 1.0), (0.0, 1.0), (POLE_MARGIN, math.pi - POLE_MARGIN), (0.0, 2 * math.pi)),
        ke=ke, ka=ka, ks=ks, source=source, boundary=boundary, exact=exact,
        refractive=index, refractive_grad=index_grad, phase=phase, blackbody=blackbody,
        params={"ke": ke, "ka": ka, "ks": ks, "profile": profile, "emission": emission},
    )
