"""Case description and residual operators of the graded-index transport equation.

Every case flattens its differential operator into one directional derivative
plus a zero-order term::

    R_int = D_V I + coef * I - S - n^2 k_a I_b - (k_s / 4 pi) sum_i w_i Phi I(., Omega_i)

with ``V`` and ``coef`` from :meth:`CaseSpec.transport`. For angular inputs
``(theta, phi)`` the two angular-redistribution terms expand to

    V_theta = cos(theta) a / n,   V_phi = h / (n sin(theta)),   coef = k_e - 2 a sin(theta) / n

where ``a = cos(phi) n_x + sin(phi) n_y`` and ``h = -sin(phi) n_x + cos(phi) n_y``.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .. import autodiff as ad
from ..errors import SingularityError, UsageError
from ..network import TapedParams, as_callable, evaluate_batch
from ..sampling import directions, sphere_rule

POLE_TOL = 1e-6
POLE_MARGIN = 1e-3


def isotropic(om, om_prime):
    return np.ones((len(om), len(om_prime)))


@dataclass(frozen=True)
class CaseSpec:
    """One transport problem on a box of input coordinates.

    ``coords`` orders the network inputs: optional ``"t"``, the spatial axes
    ``"x"`` (and ``"y"``), then optional ``"theta"``, ``"phi"``. Callables
    taking ``P`` receive an ``(N, len(coords))`` array. ``exact`` takes a
    list of coordinate values (floats, arrays, Var or Dual) so it can be
    differentiated.
    """

    name: str
    coords: tuple
    bounds: tuple
    ke: float
    ka: float
    ks: float
    source: object
    boundary: object
    direction: tuple = None
    steady: bool = True
    c0: float = math.inf
    refractive: object = None
    refractive_grad: object = None
    phase: object = isotropic
    blackbody: object = None
    initial: object = None
    exact: object = None
    data_box: tuple = None
    use_boundary: bool = True
    scatter_order: int = 6
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.coords) != len(self.bounds):
            raise UsageError("coords and bounds differ in length")
        if min(self.ke, self.ka, self.ks) < 0:
            raise UsageError("coefficients must be non-negative")
        if abs(self.ke - (self.ka + self.ks)) > 1e-12 * max(1.0, self.ke):
            raise UsageError(f"k_e = {self.ke} must equal k_a + k_s = {self.ka + self.ks}")
        if self.angular == (self.direction is not None):
            raise UsageError("give a fixed direction or angular coordinates, not both")
        if not self.angular and self.refractive_grad is not None:
            raise UsageError("a graded index needs angular coordinates")
        if not self.steady and "t" not in self.coords:
            raise UsageError("transient case needs a 't' coordinate")

    # geometry -----------------------------------------------------------
    @property
    def spatial_axes(self):
        return [i for i, c in enumerate(self.coords) if c in ("x", "y", "z")]

    @property
    def angular_axes(self):
        return [i for i, c in enumerate(self.coords) if c in ("theta", "phi")]

    @property
    def time_axis(self):
        return self.coords.index("t") if "t" in self.coords else None

    @property
    def angular(self):
        return bool(self.angular_axes)

    @property
    def dim(self):
        return len(self.spatial_axes)

    @property
    def albedo(self):
        return self.ks / self.ke if self.ke > 0 else 0.0

    @property
    def inverse(self):
        return self.data_box is not None

    def data_bounds(self):
        """Full input box with the spatial axes restricted to the data subdomain."""
        box = list(self.bounds)
        for k, axis in enumerate(self.spatial_axes):
            box[axis] = tuple(self.data_box[k])
        return tuple(box)

    def measure(self):
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    # coefficients -------------------------------------------------------
    def _spatial(self, P):
        return P[:, self.spatial_axes]

    def index(self, P):
        if self.refractive is None:
            return np.ones(len(P))
        return np.asarray(self.refractive(self._spatial(P)), dtype=float)

    def index_gradient(self, P):
        if self.refractive_grad is None:
            return np.zeros((len(P), self.dim))
        return np.asarray(self.refractive_grad(self._spatial(P)), dtype=float)

    def omega(self, P):
        """Unit propagation directions as ``(N, 3)``."""
        if self.angular:
            return directions(P[:, self.angular_axes])
        d = np.zeros(3)
        d[:self.dim] = self.direction
        d[2] = math.sqrt(max(0.0, 1.0 - float(np.dot(d[:2], d[:2]))))
        return np.tile(d, (len(P), 1))

    def transport(self, P):
        """Directional-derivative field ``V`` (N x m) and zero-order ``coef`` (N,)."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        N = len(P)
        V = np.zeros((N, len(self.coords)))
        coef = np.full(N, float(self.ke))
        n = self.index(P)
        if not self.steady:
            V[:, self.time_axis] = n / self.c0
        if self.angular:
            th_ax, ph_ax = self.angular_axes
            th, ph = P[:, th_ax], P[:, ph_ax]
            st = np.sin(th)
            if np.any(np.abs(st) < POLE_TOL):
                raise SingularityError("angular operator evaluated at a pole (sin theta ~ 0)")
            gn = self.index_gradient(P)
            nx = gn[:, 0]
            ny = gn[:, 1] if self.dim > 1 else 0.0
            a = np.cos(ph) * nx + np.sin(ph) * ny
            h = -np.sin(ph) * nx + np.cos(ph) * ny
            sx = self.spatial_axes
            V[:, sx[0]] = st * np.cos(ph)
            if self.dim > 1:
                V[:, sx[1]] = st * np.sin(ph)
            V[:, th_ax] = np.cos(th) * a / n
            V[:, ph_ax] = h / (n * st)
            coef = coef - 2.0 * a * st / n
        else:
            for k, axis in enumerate(self.spatial_axes):
                V[:, axis] = self.direction[k]
            if self.ks > 0:
                coef = coef - self.ks / (4 * math.pi) * self._phase_sums(P)
        return V, coef

    def _phase_sums(self, P):
        rule = sphere_rule(self.scatter_order)
        om = self.omega(P)
        return self.phase(om, directions(rule.nodes)) @ rule.weights

    def scatter_stencil(self, P):
        """Points and coefficients of the discrete in-scattering sum.

        Returns ``(Q, C)`` with ``Q`` of shape ``(N, M, m)`` and ``C`` of shape
        ``(N, M)`` so that the scattering term is ``sum_j C[:, j] I(Q[:, j])``.
        Empty when the case has no angular inputs (handled in ``coef``) or
        ``k_s = 0``.
        """
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if not self.angular or self.ks == 0:
            return np.empty((len(P), 0, len(self.coords))), np.empty((len(P), 0))
        rule = sphere_rule(self.scatter_order)
        M = len(rule.weights)
        Q = np.repeat(P[:, None, :], M, axis=1)
        Q[:, :, self.angular_axes[0]] = rule.nodes[:, 0]
        Q[:, :, self.angular_axes[1]] = rule.nodes[:, 1]
        C = self.ks / (4 * math.pi) * self.phase(self.omega(P), directions(rule.nodes)) * rule.weights
        return Q, C

    def forcing(self, P):
        """Prescribed source plus blackbody emission ``n^2 k_a I_b``."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        s = np.asarray(self.source(P), dtype=float) * np.ones(len(P))
        if self.blackbody is not None:
            s = s + self.index(P) ** 2 * self.ka * np.asarray(self.blackbody(P), dtype=float)
        return s

    def boundary_value(self, P):
        return np.asarray(self.boundary(P), dtype=float) * np.ones(len(P))

    def initial_value(self, P):
        if self.initial is None:
            raise UsageError(f"case {self.name!r} has no initial data")
        return np.asarray(self.initial(P), dtype=float) * np.ones(len(P))

    def exact_values(self, P):
        if self.exact is None:
            raise UsageError(f"case {self.name!r} has no exact solution")
        P = np.atleast_2d(np.asarray(P, dtype=float))
        with np.errstate(over="ignore", invalid="ignore"):
            return np.asarray(self.exact([P[:, j] for j in range(P.shape[1])]), dtype=float) * np.ones(len(P))

    def measurement(self, P):
        """Noiseless intensity data on the data subdomain."""
        return self.exact_values(P)

    # point classification ------------------------------------------------
    def on_inflow(self, point, tol=1e-12):
        from ..sampling import inflow_faces

        p = np.asarray(point, dtype=float)
        for axis, value, phi_range, _ in inflow_faces(self):
            if abs(p[axis] - value) > tol:
                continue
            if phi_range is None:
                return True
            phi = p[self.angular_axes[1]]
            lo, hi = phi_range
            if lo <= phi <= hi or lo <= phi - 2 * math.pi <= hi or lo <= phi + 2 * math.pi <= hi:
                return True
        return False


# residuals on the scalar tape ------------------------------------------------

def _tape_for(net, tape):
    if isinstance(net, TapedParams):
        return net.tape
    return ad.Tape() if tape is None else tape


def interior_residual_var(case, net, point, tape=None):
    """Interior residual at one point as a tape variable.

    ``net`` is :class:`MlpParams`, :class:`TapedParams` or any callable taking
    a list of coordinate values.
    """
    point = [float(v) for v in point]
    tape = _tape_for(net, tape)
    f = as_callable(net)
    V, coef = case.transport(np.array([point]))
    out = ad.input_derivative(f, point, V[0], tape)
    r = out.tangent + out.primal * float(coef[0]) - float(case.forcing(np.array([point]))[0])
    return r - scattering_var(case, f, point, tape)


def interior_residual(case, net, point):
    """Interior residual at one point (float)."""
    return ad.value_of(interior_residual_var(case, net, point))


def scattering_var(case, f, point, tape):
    Q, C = case.scatter_stencil(np.array([point], dtype=float))
    acc = 0.0
    for q, c in zip(Q[0], C[0]):
        acc = acc + f([float(v) for v in q]) * float(c)
    if not isinstance(acc, ad.Var):
        acc = tape.lift(ad.value_of(acc))
    return acc


def scattering_integral(case, net, point, rule=None):
    """``(k_s / 4 pi) sum_i w_i Phi(Omega, Omega_i) I(point, Omega_i)``.

    For cases without angular inputs the intensity is direction independent,
    so ``I(point)`` is factored out of the sum.
    """
    if case.ks == 0:
        return 0.0
    rule = sphere_rule(case.scatter_order) if rule is None else rule
    f = as_callable(net)
    p = np.asarray(point, dtype=float)
    om = case.omega(p[None])
    phase = case.phase(om, directions(rule.nodes))[0]
    total = 0.0
    for (th, ph), w, phi_val in zip(rule.nodes, rule.weights, phase):
        q = p.copy()
        if case.angular:
            q[case.angular_axes[0]] = th
            q[case.angular_axes[1]] = ph
        total += w * phi_val * ad.value_of(f([float(v) for v in q]))
    return case.ks / (4 * math.pi) * total


def sigma_g(case, rule=None):
    """``sup_Omega |integral Phi(Omega, Omega') dOmega'|`` over the rule's directions."""
    rule = sphere_rule(case.scatter_order) if rule is None else rule
    om = directions(rule.nodes)
    sums = case.phase(om, om) @ rule.weights
    return float(np.max(np.abs(sums)))


def boundary_residual(case, net, point):
    """``I_theta - I_b`` at an inflow boundary point."""
    if not case.on_inflow(point):
        raise UsageError(f"{list(point)} is not on the inflow boundary of {case.name!r}")
    f = as_callable(net)
    p = [float(v) for v in point]
    return ad.value_of(f(p)) - float(case.boundary_value(np.array([p]))[0])


def temporal_residual(case, net, point):
    """``I_theta - I_0`` at a point of the initial time slice."""
    if case.steady:
        raise UsageError(f"case {case.name!r} is steady")
    t_lo = case.bounds[case.time_axis][0]
    if abs(point[case.time_axis] - t_lo) > 1e-12:
        raise UsageError("temporal residual needs t = t_0")
    f = as_callable(net)
    p = [float(v) for v in point]
    return ad.value_of(f(p)) - float(case.initial_value(np.array([p]))[0])


def data_residual(case, net, point, g):
    """``L(I_theta) - g`` with ``L`` the identity (direct intensity data)."""
    if case.data_box is None:
        raise UsageError(f"case {case.name!r} declares no data subdomain")
    box = case.data_bounds()
    if any(not lo - 1e-12 <= v <= hi + 1e-12 for v, (lo, hi) in zip(point, box)):
        raise UsageError(f"{list(point)} lies outside the data subdomain")
    f = as_callable(net)
    return ad.value_of(f([float(v) for v in point])) - float(g)


def interior_residuals(case, net, P):
    """Vectorized interior residuals of ``net`` at the rows of ``P``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if len(P) == 0:
        return np.empty(0)
    V, coef = case.transport(P)
    with np.errstate(over="ignore", invalid="ignore"):
        I, dI = evaluate_batch(net, P, V)
        R = dI + coef * I - case.forcing(P)
        Q, C = case.scatter_stencil(P)
        if C.size:
            Is, _ = evaluate_batch(net, Q.reshape(-1, Q.shape[2]))
            R = R - np.sum(C * Is.reshape(C.shape), axis=1)
    return R


def family_residuals(case, net, sets):
    """Residual vectors for the four families of a training set."""
    out = {"int": interior_residuals(case, net, sets.interior.points)}
    for kind, fam in sets.families().items():
        if kind == "int":
            continue
        if len(fam) == 0:
            out[kind] = np.empty(0)
            continue
        I, _ = evaluate_batch(net, fam.points)
        out[kind] = I - fam.targets
    return out


@dataclass(frozen=True)
class ResidualBundle:
    """The four pointwise residuals; families that do not apply hold None."""

    interior: float = None
    spatial_boundary: float = None
    temporal: float = None
    data: float = None


def residual_bundle(case, net, interior=None, boundary=None, initial=None, data=None):
    """Evaluate each residual at its own point; ``data`` is ``(point, g)``."""
    return ResidualBundle(
        interior=None if interior is None else interior_residual(case, net, interior),
        spatial_boundary=None if boundary is None else boundary_residual(case, net, boundary),
        temporal=None if initial is None else temporal_residual(case, net, initial),
        data=None if data is None else data_residual(case, net, data[0], data[1]),
    )


def derive_source_from_exact(case):
    """Source that makes ``case.exact`` satisfy the interior equation.

    The exact solution is pushed through the operator with dual numbers over
    arrays, so each smooth piece is differentiated in closed form; nothing is
    differentiated across a discontinuity.
    """
    if case.exact is None:
        raise UsageError(f"case {case.name!r} has no exact solution")
    exact = case.exact

    def source(P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        V, coef = case.transport(P)
        xs = [ad.Dual(P[:, j], V[:, j]) for j in range(P.shape[1])]
        with np.errstate(over="ignore", invalid="ignore"):
            y = exact(xs)
        if not isinstance(y, ad.Dual):
            y = ad.Dual(y, 0.0)
        val = np.asarray(y.primal, dtype=float) * np.ones(len(P))
        der = np.asarray(y.tangent, dtype=float) * np.ones(len(P))
        s = der + coef * val
        if case.blackbody is not None:
            s = s - case.index(P) ** 2 * case.ka * np.asarray(case.blackbody(P))
        Q, C = case.scatter_stencil(P)
        if C.size:
            M = C.shape[1]
            flat = Q.reshape(-1, Q.shape[2])
            vals = np.asarray(exact([flat[:, j] for j in range(flat.shape[1])])) * np.ones(len(flat))
            s = s - np.sum(C * vals.reshape(len(P), M), axis=1)
        return s

    return source


def with_source(case, source):
    return replace(case, source=source)


def piecewise(cond, then_fn, else_fn):
    """Select between two branches for scalars, arrays or duals of arrays."""
    if np.ndim(cond) == 0:
        return then_fn() if bool(cond) else else_fn()
    a, b = then_fn(), else_fn()
    if isinstance(a, ad.Dual) or isinstance(b, ad.Dual):
        a = a if isinstance(a, ad.Dual) else ad.Dual(a, 0.0)
        b = b if isinstance(b, ad.Dual) else ad.Dual(b, 0.0)
        return ad.Dual(np.where(cond, a.primal, b.primal), np.where(cond, a.tangent, b.tangent))
    return np.where(cond, a, b)


__all__ = [
    "CaseSpec",
    "POLE_MARGIN",
    "ResidualBundle",
    "boundary_residual",
    "data_residual",
    "derive_source_from_exact",
    "interior_residual",
    "interior_residual_var",
    "interior_residuals",
    "family_residuals",
    "isotropic",
    "piecewise",
    "residual_bundle",
    "scattering_integral",
    "sigma_g",
    "temporal_residual",
    "with_source",
]
