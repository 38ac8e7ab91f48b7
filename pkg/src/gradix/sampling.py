"""Quadrature rules and collocation-point families."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

# Joe & Kuo (new-joe-kuo-6.21201) primitive polynomials for dimensions 2..8:
# (degree s, coefficient bits a, initial direction integers m_1..m_s)
_JOE_KUO = [
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
]
_BITS = 32
MAX_SOBOL_DIM = len(_JOE_KUO) + 1


def _direction_integers(dim):
    """V[j][k] = m_k * 2^(BITS-k), k = 1..BITS, for each dimension j."""
    out = [[1 << (_BITS - k) for k in range(1, _BITS + 1)]]
    for s, a, m_init in _JOE_KUO[:dim - 1]:
        m = list(m_init)
        for k in range(s, _BITS):
            new = m[k - s] ^ (m[k - s] << s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    new ^= m[k - i] << i
            m.append(new)
        out.append([m[k] << (_BITS - 1 - k) for k in range(_BITS)])
    return out


def sobol(dim, n):
    """First ``n`` points of the unscrambled Sobol sequence, origin skipped.

    Returns an ``(n, dim)`` array in [0, 1). Gray-code ordering, so the
    points coincide with the standard Joe-Kuo construction.
    """
    if not 1 <= dim <= MAX_SOBOL_DIM:
        raise UsageError(f"sobol supports 1..{MAX_SOBOL_DIM} dimensions, got {dim}")
    if n < 1:
        raise UsageError("n must be at least 1")
    if n >= 1 << _BITS:
        raise UsageError("too many points")
    V = _direction_integers(dim)
    x = [0] * dim
    out = np.empty((n, dim))
    scale = 1.0 / (1 << _BITS)
    for i in range(n):
        # rightmost zero bit of i
        c, k = 0, i
        while k & 1:
            k >>= 1
            c += 1
        for j in range(dim):
            x[j] ^= V[j][c]
            out[i, j] = x[j] * scale
    return out


@dataclass
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, f):
        return float(np.sum(self.weights * f(self.nodes)))


def _legendre(n, x):
    """P_n(x) and P_n'(x) by the three-term recurrence."""
    p0, p1 = np.ones_like(x), x
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def gauss_legendre(n, a=-1.0, b=1.0):
    """n-point Gauss-Legendre rule on [a, b]; exact to degree 2n-1."""
    if not 1 <= n <= 64:
        raise UsageError("gauss_legendre supports 1..64 nodes")
    if not a < b:
        raise UsageError("need a < b")
    x = np.cos(math.pi * (np.arange(1, n + 1) - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-14:
            break
    _, dp = _legendre(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    x, w = x[::-1], w[::-1]
    half = 0.5 * (b - a)
    return QuadratureRule(nodes=(half * x + 0.5 * (a + b))[:, None], weights=half * w, order=n)


def sphere_rule(n_polar, n_azimuth=None):
    """Product rule on the unit sphere: Gauss in cos(theta) times Gauss in phi.

    Nodes are ``(theta, phi)`` pairs; weights sum to 4 pi.
    """
    n_azimuth = 2 * n_polar if n_azimuth is None else n_azimuth
    mu = gauss_legendre(n_polar, -1.0, 1.0)
    ph = gauss_legendre(n_azimuth, 0.0, 2.0 * math.pi)
    theta = np.arccos(mu.nodes[:, 0])
    T, P = np.meshgrid(theta, ph.nodes[:, 0], indexing="ij")
    W = np.outer(mu.weights, ph.weights)
    return QuadratureRule(nodes=np.column_stack([T.ravel(), P.ravel()]), weights=W.ravel(), order=n_polar)


def directions(angles):
    """Unit vectors for an ``(N, 2)`` array of (theta, phi)."""
    th, ph = angles[:, 0], angles[:, 1]
    st = np.sin(th)
    return np.column_stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)])


@dataclass
class Family:
    """One collocation family: points, positive weights, optional targets."""

    points: np.ndarray
    weights: np.ndarray
    targets: np.ndarray = None

    def __len__(self):
        return len(self.weights)

    @classmethod
    def empty(cls, dim):
        return cls(np.empty((0, dim)), np.empty(0), np.empty(0))


@dataclass
class TrainingSet:
    interior: Family
    spatial_boundary: Family
    temporal_boundary: Family
    data: Family
    coords: tuple = field(default=())

    def families(self):
        return {
            "int": self.interior,
            "sb": self.spatial_boundary,
            "tb": self.temporal_boundary,
            "d": self.data,
        }

    def counts(self):
        return {
            "N_int": len(self.interior),
            "N_sb": len(self.spatial_boundary),
            "N_tb": len(self.temporal_boundary),
            "N_d": len(self.data),
        }

    def to_csv(self, path):
        """Write ``kind,<coords...>,weight`` rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", *self.coords, "weight"])
            for kind, fam in self.families().items():
                for p, w in zip(fam.points, fam.weights):
                    writer.writerow([kind, *(repr(float(v)) for v in p), repr(float(w))])


def _unit_points(strategy, dim, n, rng):
    if n == 0:
        return np.empty((0, dim))
    if strategy == "sobol":
        return sobol(dim, n)
    if strategy == "uniform-random":
        return rng.random((n, dim))
    raise UsageError(f"unknown sampling strategy {strategy!r}")


def _scale(U, bounds):
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    return lo + U * (hi - lo)


def _volume(bounds):
    return float(np.prod([b[1] - b[0] for b in bounds])) if bounds else 1.0


def inflow_faces(case):
    """Boundary faces on which radiation enters the domain.

    Each face is ``(axis, value, phi_interval, measure)``; ``phi_interval`` is
    the azimuth range with Omega . n < 0 for angular cases, else None.
    """
    faces = []
    box = case.bounds
    spatial = case.spatial_axes
    for axis in spatial:
        lo, hi = box[axis]
        others = [box[j] for j in range(len(box)) if j != axis and j not in case.angular_axes]
        extent = _volume(others)
        k = spatial.index(axis)
        if case.angular:
            th_lo, th_hi = box[case.angular_axes[0]]
            ang = (th_hi - th_lo) * math.pi
            # azimuth half-ranges where the in-plane direction points inward
            inward_lo = [(-0.5 * math.pi, 0.5 * math.pi), (0.0, math.pi)][k]
            inward_hi = [(0.5 * math.pi, 1.5 * math.pi), (math.pi, 2.0 * math.pi)][k]
            faces.append((axis, lo, inward_lo, extent * ang))
            faces.append((axis, hi, inward_hi, extent * ang))
        else:
            omega = case.direction[k]
            if omega > 0:
                faces.append((axis, lo, None, extent))
            elif omega < 0:
                faces.append((axis, hi, None, extent))
    return faces


def _boundary_family(case, n, strategy, rng):
    dim = len(case.coords)
    if n == 0:
        return Family.empty(dim)
    faces = inflow_faces(case)
    if not faces:
        raise UsageError(f"case {case.name!r} has no inflow boundary")
    measures = np.array([f[3] for f in faces])
    total = float(measures.sum())
    cum = np.cumsum(measures) / total
    U = _unit_points(strategy, dim, n, rng)
    choice = np.minimum(np.searchsorted(cum, U[:, 0], side="right"), len(faces) - 1)
    P = np.empty((n, dim))
    for i in range(n):
        axis, value, phi_range, _ = faces[choice[i]]
        u = iter(U[i, 1:])
        for j in range(dim):
            if j == axis:
                P[i, j] = value
            elif phi_range is not None and j == case.angular_axes[1]:
                P[i, j] = (phi_range[0] + next(u) * (phi_range[1] - phi_range[0])) % (2 * math.pi)
            else:
                lo, hi = case.bounds[j]
                P[i, j] = lo + next(u) * (hi - lo)
    return Family(P, np.full(n, total / n), case.boundary_value(P))


def build_training_set(case, counts, strategy="sobol", seed=0):
    """Sample the four collocation families for ``case``.

    ``counts`` maps ``N_int``, ``N_sb``, ``N_tb``, ``N_d`` to non-negative
    integers (missing keys mean 0). Quasi-Monte Carlo weights are the region
    measure divided by the number of points.
    """
    n_int = int(counts.get("N_int", 0))
    n_sb = int(counts.get("N_sb", 0))
    n_tb = int(counts.get("N_tb", 0))
    n_d = int(counts.get("N_d", 0))
    if min(n_int, n_sb, n_tb, n_d) < 0:
        raise UsageError("point counts must be non-negative")
    if n_tb and case.steady:
        raise UsageError(f"case {case.name!r} is steady; N_tb must be 0")
    if n_d and case.data_box is None:
        raise UsageError(f"case {case.name!r} declares no data subdomain")
    if n_sb and not case.use_boundary:
        raise UsageError(f"case {case.name!r} excludes boundary conditions; N_sb must be 0")
    rng = np.random.default_rng(seed)
    dim = len(case.coords)

    U = _unit_points(strategy, dim, n_int, rng)
    interior = Family(_scale(U, case.bounds), np.full(n_int, _volume(case.bounds) / max(n_int, 1)))

    sb = _boundary_family(case, n_sb, strategy, rng)

    if n_tb:
        t_axis = case.time_axis
        rest = [b for j, b in enumerate(case.bounds) if j != t_axis]
        U = _unit_points(strategy, dim - 1, n_tb, rng)
        P = np.insert(_scale(U, rest), t_axis, case.bounds[t_axis][0], axis=1)
        tb = Family(P, np.full(n_tb, _volume(rest) / n_tb), case.initial_value(P))
    else:
        tb = Family.empty(dim)

    if n_d:
        box = case.data_bounds()
        U = _unit_points(strategy, dim, n_d, rng)
        P = _scale(U, box)
        data = Family(P, np.full(n_d, _volume(box) / n_d), case.measurement(P))
    else:
        data = Family.empty(dim)

    return TrainingSet(interior, sb, tb, data, coords=tuple(case.coords))
