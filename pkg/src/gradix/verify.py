"""Self-check suite behind ``gradix verify``.

Each check returns ``(passed, detail)``. Checks are independent so a single
broken component shows up under its own name.
"""

import math
import time

import numpy as np

from . import autodiff as ad
from . import special
from .metrics import BoundInputs, forward_bound, steady_forward_bound, training_errors
from .network import Architecture, TapedParams, flatten, forward, init, jet, jet_vjp, unflatten
from .rte import catalog, manufactured
from .rte.case import interior_residual, scattering_integral
from .rte.oracle import oracle_integrate_characteristic
from .sampling import build_training_set, gauss_legendre, sobol, sphere_rule
from .training.loss import LossConfig, PinnLoss, loss_forward

# First points of the unscrambled Joe-Kuo Sobol sequence (origin skipped).
SOBOL_REFERENCE = np.array([
    [0.5, 0.5, 0.5],
    [0.75, 0.25, 0.25],
    [0.25, 0.75, 0.75],
    [0.375, 0.375, 0.625],
    [0.875, 0.875, 0.125],
    [0.625, 0.125, 0.875],
    [0.125, 0.625, 0.375],
])


def _rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def check_erf():
    xs = [0.1, 0.5, 1.0, 1.5, 2.0, -0.7]
    worst = max(abs(special.erf(x) - special.erf_series(x, 60)) for x in xs)
    odd = max(abs(special.erf(-x) + special.erf(x)) for x in xs)
    return worst <= 1.5e-7 and odd == 0.0 and special.erf(0.0) == 0.0, f"max dev {worst:.1e}"


def check_autodiff_fd():
    def f(v):
        x, y, z = v
        return ad.exp(x * y) / (ad.cos(z) + 2.0) + ad.tanh(x - z) * y ** 3 + ad.erf(y * 0.5) * ad.sin(x)

    point = [0.3, -0.7, 1.1]
    tape = ad.Tape()
    xs = [tape.lift(v) for v in point]
    grad = ad.reverse_gradient(f(xs), xs)
    h = 1e-6
    fd = []
    for i in range(3):
        up, dn = list(point), list(point)
        up[i] += h
        dn[i] -= h
        fd.append((f(up) - f(dn)) / (2 * h))
    err = _rel(grad, fd)
    return err < 1e-6, f"rel err {err:.1e}"


def check_mixed_derivative():
    arch = Architecture((2, 5, 5, 1))
    params = init(arch, 3)
    point, v = [0.4, -0.2], [0.6, 0.8]
    tape = ad.Tape()
    tp = TapedParams(params, tape)
    out = ad.input_derivative(lambda xs: forward(tp, xs), point, v, tape)
    mixed = np.array(ad.reverse_gradient(out.tangent, tp.leaves))

    def param_grad(p):
        t = ad.Tape()
        q = TapedParams(params, t)
        return np.array(ad.reverse_gradient(forward(q, p), q.leaves))

    h = 1e-5
    up = [a + h * b for a, b in zip(point, v)]
    dn = [a - h * b for a, b in zip(point, v)]
    fd = (param_grad(up) - param_grad(dn)) / (2 * h)
    err = _rel(mixed, fd)
    return err < 1e-4, f"rel err {err:.1e}"


def check_batched_kernel():
    case = catalog.case_2d_gaussian(ke=1.0)
    sets = build_training_set(case, {"N_int": 6, "N_sb": 4})
    arch = Architecture((2, 4, 4, 1))
    params = init(arch, 11)
    tape = ad.Tape()
    tp = TapedParams(params, tape)
    cfg = LossConfig(lam=0.5)
    ref = loss_forward(tp, sets, case, cfg)
    g_ref = np.array(ad.reverse_gradient(ref, tp.leaves))
    val, grad = PinnLoss(case, sets, arch, cfg)(flatten(params))
    err = max(_rel([val], [ref.value]), _rel(grad, g_ref))
    return err < 1e-10, f"rel err {err:.1e}"


def check_gauss_legendre():
    worst = 0.0
    for n in range(1, 21):
        rule = gauss_legendre(n, -1.0, 1.0)
        x = rule.nodes[:, 0]
        for k in range(2 * n):
            exact = 0.0 if k % 2 else 2.0 / (k + 1)
            worst = max(worst, abs(float(np.sum(rule.weights * x ** k)) - exact))
    return worst < 1e-12, f"max err {worst:.1e}"


def check_sobol():
    got = sobol(3, len(SOBOL_REFERENCE))
    return bool(np.array_equal(got, SOBOL_REFERENCE)), "first 7 points of dims 1-3"


def check_scattering():
    case = manufactured.manufactured_graded_case("linear", phase=lambda a, b: np.ones((len(a), len(b))))
    value = scattering_integral(case, lambda xs: 2.5, [0.3, 0.4, 1.0, 2.0], sphere_rule(3))
    err = abs(value - case.ks * 2.5)
    return err < 1e-10, f"abs err {err:.1e}"


def _box_points(case, n, skip=None):
    lo = np.array([b[0] for b in case.bounds])
    hi = np.array([b[1] for b in case.bounds])
    P = lo + sobol(len(lo), n) * (hi - lo)
    if skip is not None:
        P = P[skip(P)]
    return P


def check_residual_at_exact():
    cases = [
        (catalog.case_1d_gaussian(ke=10.0), None),
        (catalog.case_slab_discontinuous(ke=2.0), lambda P: np.abs(P[:, 0] - 5.0) > 1e-9),
        (catalog.case_square_diagonal(ke=5.0), lambda P: np.abs(P[:, 0] + P[:, 1] - 1.0) > 1e-9),
        (catalog.case_2d_gaussian(ke=1.0), None),
        (catalog.case_diag_gaussian(ke=2.0), None),
    ]
    worst = 0.0
    for case, skip in cases:
        for p in _box_points(case, 40, skip):
            worst = max(worst, abs(interior_residual(case, case.exact, p)))
    return worst < 1e-5, f"max |R| {worst:.1e}"


def check_oracle_1d():
    worst = 0.0
    X = np.linspace(0.025, 0.975, 20)[:, None]
    for ke in (0.1, 10.0):
        case = catalog.case_1d_gaussian(ke=ke)
        worst = max(worst, float(np.max(np.abs(oracle_integrate_characteristic(case, X, 4000)
                                                  - case.exact_values(X)))))
    return worst < 1e-6, f"max diff {worst:.1e}"


def check_oracle_2d():
    case = catalog.case_2d_gaussian(ke=1.0)
    X = sobol(2, 20)
    diff = float(np.max(np.abs(oracle_integrate_characteristic(case, X, 4000) - case.exact_values(X))))
    return diff < 1e-5, f"max diff {diff:.1e}"


def check_manufactured(profile):
    def run():
        case = manufactured.manufactured_graded_case(profile)
        worst = max(abs(interior_residual(case, case.exact, p)) for p in _box_points(case, 20))
        return worst < 1e-5, f"max |R| {worst:.1e}"

    return run


def check_training_identity():
    case = catalog.case_slab_discontinuous(ke=1.0)
    sets = build_training_set(case, {"N_int": 64, "N_sb": 8})
    arch = Architecture((1, 6, 6, 1))
    params = init(arch, 5)
    e = training_errors(params, sets, case)
    loss = PinnLoss(case, sets, arch, LossConfig(lam=1.0))
    R = loss.residuals(flatten(params))
    term = float(np.sum(sets.interior.weights * R["int"] ** 2))
    err = abs(e.int ** 2 - term) / term
    return err < 1e-12, f"rel diff {err:.1e}"


def _bound_duplicate(b, e_int, e_sb, e_tb, steady):
    """Second, independent transcription of the two bound formulas."""
    L = math.log
    if steady:
        k = b.N_S ** (-2 * b.a)
        big_v = max([2 / b.l, 2 * b.hk_sb ** 2 / b.l, 2 * b.C_eps * b.hk_int ** 2 / b.l,
                     2 * b.C_eps * b.v_bar * k / b.l])
        return big_v * (b.nu * e_sb ** 2 + b.nu * e_int ** 2) + big_v * (
            L(b.N_sb) ** (2 * b.d) / b.N_sb + b.nu * L(b.N_int) ** (2 * b.d) / b.N_int + b.nu * k)
    v_1 = b.nu * 2 * (b.sigma_g_inf + b.ks_inf) / (4 * math.pi)
    big_v = b.T + b.nu * v_1 * b.T * b.T * math.exp(b.nu * v_1 * b.T)
    v_2 = max([b.hk_tb ** 2, b.hk_sb ** 2, b.hk_int ** 2, b.v_bar])
    return big_v * (e_tb ** 2 + b.nu * e_sb ** 2 + b.c * e_int ** 2) + big_v * v_2 * (
        L(b.N_tb) ** (2 * b.d) / b.N_tb + b.c * L(b.N_sb) ** (2 * b.d) / b.N_sb
        + b.c * L(b.N_int) ** (2 * b.d + 1) / b.N_int + b.c * b.N_S ** (-2 * b.a))


def random_bound_inputs(rng):
    return BoundInputs(
        N_int=int(rng.integers(64, 10 ** 6)), N_sb=int(rng.integers(64, 10 ** 6)),
        N_tb=int(rng.integers(64, 10 ** 6)), N_S=int(rng.integers(2, 64)), a=float(rng.uniform(0.5, 4)),
        d=int(rng.integers(1, 3)), T=float(rng.uniform(0.1, 3)), nu=float(rng.uniform(0.1, 3)),
        c=float(rng.uniform(0.1, 3)), ks_inf=float(rng.uniform(0, 2)), sigma_g_inf=float(rng.uniform(0, 13)),
        hk_tb=float(rng.uniform(0, 3)), hk_sb=float(rng.uniform(0, 3)), hk_int=float(rng.uniform(0, 3)),
        v_bar=float(rng.uniform(0, 3)), l=float(rng.uniform(0.05, 5)), C_eps=float(rng.uniform(0.1, 3)),
    )


def check_bounds_duplicate():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        b = random_bound_inputs(rng)
        e = rng.uniform(0, 1e-2, size=3)
        errors = {"int": e[0], "sb": e[1], "tb": e[2]}
        for steady, fn in ((False, forward_bound), (True, steady_forward_bound)):
            ref = _bound_duplicate(b, e[0], e[1], e[2], steady)
            worst = max(worst, abs(fn(b, errors) - ref) / abs(ref))
    return worst < 1e-12, f"max rel diff {worst:.1e}"


def check_bounds_monotone():
    Ns = np.unique(np.geomspace(64, 10 ** 6, 200).astype(int))
    errors = {"int": 1e-3, "sb": 1e-3, "tb": 1e-3}
    base = dict(N_int=4096, N_sb=4096, N_tb=4096, N_S=16, a=2.0, d=1)
    ok = True
    for key in ("N_int", "N_sb", "N_tb"):
        for fn in (forward_bound, steady_forward_bound):
            if fn is steady_forward_bound and key == "N_tb":
                continue
            vals = [fn(BoundInputs(**{**base, key: int(n)}), errors) for n in Ns]
            ok &= bool(np.all(np.diff(vals) <= 0)) and min(vals) >= 0
    return ok, f"N in [64, 1e6], {len(Ns)} values"


CHECKS = [
    ("erf", check_erf),
    ("autodiff-vs-fd", check_autodiff_fd),
    ("forward-over-reverse", check_mixed_derivative),
    ("batched-kernel-vs-tape", check_batched_kernel),
    ("gauss-legendre-exactness", check_gauss_legendre),
    ("sobol-reference", check_sobol),
    ("scattering-isotropic", check_scattering),
    ("residual-at-exact", check_residual_at_exact),
    ("oracle-1d-gaussian", check_oracle_1d),
    ("oracle-2d-gaussian", check_oracle_2d),
    ("manufactured-linear", check_manufactured("linear")),
    ("manufactured-radial", check_manufactured("radial")),
    ("training-error-identity", check_training_identity),
    ("bounds-duplicate", check_bounds_duplicate),
    ("bounds-monotone", check_bounds_monotone),
]


def run_checks(checks=None):
    """Run every check; returns a list of ``(name, passed, detail, seconds)``."""
    results = []
    for name, fn in checks or CHECKS:
        start = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(passed), detail, time.perf_counter() - start))
    return results
