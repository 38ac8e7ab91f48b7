"""Training and generalization errors, error-bound formulas and run reports."""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AssumptionError, UsageError
from .network import evaluate_batch
from .rte.case import family_residuals
from .sampling import sobol

FAMILIES = ("int", "sb", "tb", "d")


@dataclass(frozen=True)
class TrainingErrors:
    int: float = 0.0
    sb: float = 0.0
    tb: float = 0.0
    d: float = 0.0

    def as_dict(self):
        return {k: getattr(self, k) for k in FAMILIES}


def training_errors(net, sets, case):
    """``sqrt(sum_j w_j R(z_j)^2)`` for each family; empty families give 0."""
    R = family_residuals(case, net, sets)
    fams = sets.families()
    return TrainingErrors(**{k: float(np.sqrt(np.sum(fams[k].weights * R[k] ** 2))) for k in FAMILIES})


@dataclass(frozen=True)
class TestSet:
    points: np.ndarray
    weights: np.ndarray
    kind: str

    def __len__(self):
        return len(self.weights)


def test_set(case, n=None):
    """Evaluation points for the generalization error.

    Midpoint grid of 512 cells in 1D and 128 x 128 in 2D; cases with
    angular or time inputs use ``n`` (default 4096) Sobol points. Weights are
    the domain measure over the number of points.
    """
    box = case.bounds
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    m = len(box)
    if m == 1:
        n = 512 if n is None else n
        P = (lo + (np.arange(n) + 0.5)[:, None] * (hi - lo) / n)
        kind = f"midpoint-{n}"
    elif m == 2:
        n = 128 if n is None else n
        gx = lo[0] + (np.arange(n) + 0.5) * (hi[0] - lo[0]) / n
        gy = lo[1] + (np.arange(n) + 0.5) * (hi[1] - lo[1]) / n
        A, B = np.meshgrid(gx, gy, indexing="ij")
        P = np.column_stack([A.ravel(), B.ravel()])
        kind = f"midpoint-{n}x{n}"
    else:
        n = 4096 if n is None else n
        P = lo + sobol(m, n) * (hi - lo)
        kind = f"sobol-{n}"
    return TestSet(P, np.full(len(P), case.measure() / len(P)), kind)


def generalization_error(net, case, test=None):
    """Absolute and relative L2 distance to the exact solution on ``test``."""
    if case.exact is None:
        raise UsageError(f"case {case.name!r} has no exact solution")
    test = test_set(case) if test is None else test
    exact = case.exact_values(test.points)
    pred, _ = evaluate_batch(net, test.points)
    err = math.sqrt(float(np.sum(test.weights * (pred - exact) ** 2)))
    norm = math.sqrt(float(np.sum(test.weights * exact ** 2)))
    return err, (err / norm if norm > 0 else math.inf)


# bounds ----------------------------------------------------------------------

@dataclass(frozen=True)
class BoundInputs:
    """Constants and sample sizes entering the error-bound formulas.

    The theorem constants (``nu``, ``c``, ``C_eps``, Hardy-Krause variations,
    ``v_bar``) are not computable from first principles and default to 1.
    """

    N_int: int
    N_sb: int
    N_tb: int = 1
    N_S: int = 16
    a: float = 2.0
    d: int = 1
    T: float = 1.0
    nu: float = 1.0
    c: float = 1.0
    ks_inf: float = 0.0
    sigma_g_inf: float = 0.0
    hk_tb: float = 1.0
    hk_sb: float = 1.0
    hk_int: float = 1.0
    v_bar: float = 1.0
    l: float = 1.0
    C_eps: float = 1.0

    def __post_init__(self):
        if min(self.N_int, self.N_sb, self.N_tb, self.N_S) <= 0:
            raise UsageError("sample counts must be positive")
        if min(self.nu, self.c, self.C_eps, self.a, self.d) <= 0 or self.T < 0:
            raise UsageError("bound constants must be positive")
        if min(self.ks_inf, self.sigma_g_inf, self.hk_tb, self.hk_sb, self.hk_int, self.v_bar) < 0:
            raise UsageError("norms and variations must be non-negative")


def _errors(errors):
    if isinstance(errors, TrainingErrors):
        return errors
    if isinstance(errors, dict):
        return TrainingErrors(**{k: float(errors.get(k, 0.0)) for k in FAMILIES})
    return TrainingErrors(*[float(v) for v in errors])


def _koksma(N, power):
    return math.log(N) ** power / N


def forward_bound(inputs, errors):
    """Squared generalization-error bound for the transient forward problem."""
    e = _errors(errors)
    b = inputs
    v1 = 2.0 * b.nu * (b.ks_inf + b.sigma_g_inf) / (4.0 * math.pi)
    V = b.T + b.nu * v1 * b.T ** 2 * math.exp(b.nu * v1 * b.T)
    V2 = max(b.hk_tb ** 2, b.hk_sb ** 2, b.hk_int ** 2, b.v_bar)
    train = e.tb ** 2 + b.nu * e.sb ** 2 + b.c * e.int ** 2
    quad = (_koksma(b.N_tb, 2 * b.d) + b.c * _koksma(b.N_sb, 2 * b.d)
            + b.c * _koksma(b.N_int, 2 * b.d + 1) + b.c * b.N_S ** (-2.0 * b.a))
    return V * train + V * V2 * quad


def steady_forward_bound(inputs, errors):
    """Squared generalization-error bound for the steady forward problem."""
    e = _errors(errors)
    b = inputs
    if not b.l > 0:
        raise AssumptionError(f"coercivity margin l = {b.l} must be positive")
    tail = b.N_S ** (-2.0 * b.a)
    V = max(2.0 / b.l, 2.0 / b.l * b.hk_sb ** 2, 2.0 * b.C_eps / b.l * b.hk_int ** 2,
            2.0 * b.C_eps / b.l * b.v_bar * tail)
    train = b.nu * e.sb ** 2 + b.nu * e.int ** 2
    quad = _koksma(b.N_sb, 2 * b.d) + b.nu * _koksma(b.N_int, 2 * b.d) + b.nu * tail
    return V * train + V * quad


def coercivity_margin(ke_min, ks_min, ks_max, sigma_g_inf, M_min=0.0, nu=1.0):
    """Left side of the steady-bound assumption; the bound needs it > 0."""
    return (ke_min + M_min - ks_min - 1.0) - 2.0 * nu * (ks_max + sigma_g_inf) / (4.0 * math.pi)


# reports ---------------------------------------------------------------------

@dataclass
class ErrorReport:
    case: str
    ke: float
    N_int: int
    N_sb: int
    N_tb: int
    N_d: int
    layers: int
    width: int
    lam: float
    E_T: dict
    E_G: dict
    bound: dict = None
    seconds: float = 0.0
    seed: int = 0
    test: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        values = list(self.E_T.values()) + list(self.E_G.values())
        if any(not (v >= 0 and math.isfinite(v)) for v in values):
            raise UsageError(f"error entries must be finite and non-negative: {values}")

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["lam"] = d.pop("lambda")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def table_row(self):
        """Columns: case, N_int, N_sb (or N_d), K-1, width, lambda, E_T, L2, seconds."""
        n_b = self.N_d if self.N_d else self.N_sb
        e_t = math.sqrt(sum(v * v for v in self.E_T.values()))
        return (f"{self.case} k_e={self.ke:g} | {self.N_int} | {n_b} | {self.layers} | {self.width} | "
                f"{self.lam:g} | {e_t:.2e} | {self.E_G['abs']:.2e} | {self.seconds:.0f}")


def report(result, case, test=None, bound_inputs=None):
    """Assemble an :class:`ErrorReport` for a finished training run."""
    E_T = result.errors.as_dict() if hasattr(result.errors, "as_dict") else dict(result.errors)
    if case.exact is not None:
        err_abs, err_rel = generalization_error(result.params, case, test)
    else:
        err_abs = err_rel = 0.0
    bound = None
    if bound_inputs is not None:
        key = "steady" if case.steady else "forward"
        fn = steady_forward_bound if case.steady else forward_bound
        bound = {key: fn(bound_inputs, E_T)}
    counts = result.counts
    arch = result.params.arch
    return ErrorReport(
        case=case.name, ke=float(case.ke), N_int=counts["N_int"], N_sb=counts["N_sb"],
        N_tb=counts["N_tb"], N_d=counts["N_d"], layers=arch.hidden_layers, width=arch.widths[1],
        lam=float(result.loss_cfg.lam), E_T=E_T, E_G={"abs": err_abs, "rel": err_rel}, bound=bound,
        seconds=float(result.seconds), seed=int(result.seed),
        test=(test or test_set(case)).kind,
    )
