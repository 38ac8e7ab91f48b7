"""Forward and inverse training drivers and ensemble retraining."""

import itertools
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import TrainingAbort, UsageError
from ..metrics import TrainingErrors, training_errors
from ..network import Architecture, flatten, init
from ..sampling import build_training_set
from .loss import LossConfig, PinnLoss
from .optim import AdamConfig, LbfgsConfig, adam_minimize, lbfgs_minimize

HISTORY_STRIDE = 10


@dataclass(frozen=True)
class OptimizerConfig:
    adam: AdamConfig = AdamConfig()
    lbfgs: LbfgsConfig = LbfgsConfig()

    @classmethod
    def from_dict(cls, d):
        d = d or {}
        return cls(AdamConfig(**d.get("adam", {})), LbfgsConfig(**d.get("lbfgs", {})))

    def halved(self):
        """Same settings with both iteration budgets halved."""
        return OptimizerConfig(
            AdamConfig(**{**asdict(self.adam), "max_iters": self.adam.max_iters // 2}),
            LbfgsConfig(**{**asdict(self.lbfgs), "max_iters": self.lbfgs.max_iters // 2}),
        )


@dataclass(frozen=True)
class EnsembleConfig:
    """Grid over hidden-layer count, width and lambda, each retrained ``n_theta`` times."""

    hidden_layers: tuple = (4,)
    widths: tuple = (20,)
    lams: tuple = (1.0,)
    n_theta: int = 1

    def __post_init__(self):
        for name in ("hidden_layers", "widths", "lams"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise UsageError(f"ensemble grid axis {name!r} is empty")
        if self.n_theta < 1:
            raise UsageError("n_theta must be at least 1")

    def grid(self):
        return list(itertools.product(self.hidden_layers, self.widths, self.lams))

    def __len__(self):
        return len(self.grid()) * self.n_theta


@dataclass
class TrainResult:
    params: object
    final_loss: float
    history: list
    errors: TrainingErrors
    seconds: float
    seed: int
    counts: dict
    loss_cfg: LossConfig
    opt_cfg: OptimizerConfig
    case: str
    iterations: dict = field(default_factory=dict)
    message: str = ""

    def to_dict(self, stride=HISTORY_STRIDE):
        """JSON-ready summary; the loss history is kept every ``stride`` iterations."""
        return {
            "case": self.case,
            "seed": self.seed,
            "final_loss": self.final_loss,
            "errors": self.errors.as_dict(),
            "counts": dict(self.counts),
            "architecture": list(self.params.arch.widths),
            "loss": asdict(self.loss_cfg),
            "optimizer": {"adam": asdict(self.opt_cfg.adam), "lbfgs": asdict(self.opt_cfg.lbfgs)},
            "iterations": dict(self.iterations),
            "message": self.message,
            "history_stride": stride,
            "history": [float(v) for v in self.history[::stride]],
            "seconds": self.seconds,
        }


def input_scaling(case):
    """Map each input box [lo, hi] onto [-1, 1]."""
    return [((lo + hi) / 2.0, (hi - lo) / 2.0) for lo, hi in case.bounds]


def _train(case, counts, arch, loss_cfg, opt_cfg, seed, inverse, strategy):
    if arch.n_inputs != len(case.coords):
        raise UsageError(f"architecture takes {arch.n_inputs} inputs, case has {len(case.coords)}")
    start = time.perf_counter()
    sets = build_training_set(case, counts, strategy=strategy, seed=seed)
    objective = PinnLoss(case, sets, arch, loss_cfg, inverse=inverse, scale=input_scaling(case))
    theta = objective.from_physical(init(arch, seed))
    try:
        warm = adam_minimize(objective, theta, opt_cfg.adam)
        fine = lbfgs_minimize(objective, warm.theta, opt_cfg.lbfgs)
    except TrainingAbort as exc:
        if exc.snapshot is not None and "theta" in exc.snapshot:
            exc.snapshot["params"] = objective.to_physical(exc.snapshot.pop("theta"))
        raise
    best = fine if fine.loss <= warm.loss else warm
    params = objective.to_physical(best.theta)
    return TrainResult(
        params=params,
        final_loss=float(best.loss),
        history=list(warm.history) + list(fine.history[1:]),
        errors=training_errors(params, sets, case),
        seconds=time.perf_counter() - start,
        seed=int(seed),
        counts=sets.counts(),
        loss_cfg=loss_cfg,
        opt_cfg=opt_cfg,
        case=case.name,
        iterations={"adam": warm.iterations, "lbfgs": fine.iterations,
                    "evaluations": warm.evaluations + fine.evaluations},
        message=fine.message,
    )


def train_forward(case, counts, arch, loss_cfg=LossConfig(), opt_cfg=OptimizerConfig(), seed=0,
                  strategy="sobol"):
    """Adam warm-up followed by L-BFGS on the forward PINN loss."""
    if case.inverse:
        raise UsageError(f"case {case.name!r} is an inverse problem; use train_inverse")
    return _train(case, counts, arch, loss_cfg, opt_cfg, seed, False, strategy)


def train_inverse(case, counts, arch, loss_cfg=LossConfig(), opt_cfg=OptimizerConfig(), seed=0,
                  strategy="sobol"):
    """As :func:`train_forward` with the data-assimilation loss."""
    if not case.inverse:
        raise UsageError(f"case {case.name!r} has no data subdomain")
    return _train(case, counts, arch, loss_cfg, opt_cfg, seed, True, strategy)


@dataclass
class EnsembleResult:
    best: TrainResult
    leaderboard: list


def thread_cap():
    env = os.environ.get("GRADIX_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"GRADIX_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise UsageError("GRADIX_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


def ensemble_train(case, counts, ens_cfg, loss_cfg=LossConfig(), opt_cfg=OptimizerConfig(), seed=0,
                   strategy="sobol", threads=None):
    """Retrain every grid configuration ``n_theta`` times and keep the lowest loss.

    Run ``i`` of a configuration uses seed ``seed + i``. The leaderboard is
    sorted by final loss, ties broken by seed and then by configuration.
    """
    trainer = train_inverse if case.inverse else train_forward
    jobs = []
    for layers, width, lam in ens_cfg.grid():
        arch = Architecture.mlp(len(case.coords), layers, width)
        cfg = LossConfig(lam=lam, lam_reg=loss_cfg.lam_reg, q=loss_cfg.q)
        for i in range(ens_cfg.n_theta):
            jobs.append((layers, width, lam, seed + i, arch, cfg))

    def run(job):
        layers, width, lam, s, arch, cfg = job
        try:
            return trainer(case, counts, arch, cfg, opt_cfg, s, strategy), None
        except TrainingAbort as exc:
            return None, str(exc)

    workers = min(threads or thread_cap(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, jobs))
    else:
        outcomes = [run(job) for job in jobs]

    rows = []
    for (layers, width, lam, s, _, _), (res, err) in zip(jobs, outcomes):
        rows.append({
            "layers": layers, "width": width, "lambda": lam, "seed": s,
            "final_loss": res.final_loss if res else float("inf"),
            "status": "ok" if res else f"abort: {err}",
            "seconds": res.seconds if res else 0.0,
            "_result": res,
        })
    rows.sort(key=lambda r: (r["final_loss"], r["seed"], r["layers"], r["width"], r["lambda"]))
    ok = [r for r in rows if r["_result"] is not None]
    if not ok:
        detail = "; ".join(f"layers={r['layers']} width={r['width']} lambda={r['lambda']} seed={r['seed']}: "
                           f"{r['status']}" for r in rows)
        raise TrainingAbort(f"every ensemble run failed: {detail}")
    best = ok[0]["_result"]
    for r in rows:
        r.pop("_result")
    return EnsembleResult(best, rows)


def params_checksum(params):
    """Stable digest of a parameter vector, handy for determinism checks."""
    import hashlib

    return hashlib.sha256(np.ascontiguousarray(flatten(params)).tobytes()).hexdigest()
