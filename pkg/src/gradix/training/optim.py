"""Adam and L-BFGS on flat parameter vectors.

Both take ``objective(theta) -> (loss, grad)`` and return an
:class:`OptimResult` holding the best iterate seen.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import line_search

from ..errors import NonFiniteError, TrainingAbort, UsageError


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iters: int = 500
    grad_tol: float = 1e-12

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise UsageError("Adam betas must lie in (0, 1)")
        if not (self.lr > 0 and self.eps > 0 and self.grad_tol > 0) or self.max_iters < 0:
            raise UsageError("invalid Adam settings")


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 50
    max_iters: int = 2000
    grad_tol: float = 1e-9
    c1: float = 1e-4
    c2: float = 0.9
    stall_window: int = 20
    stall_tol: float = 1e-14

    def __post_init__(self):
        if self.memory < 1 or self.max_iters < 0:
            raise UsageError("L-BFGS needs memory >= 1 and max_iters >= 0")
        if not (0 < self.c1 < self.c2 < 1):
            raise UsageError("need 0 < c1 < c2 < 1")
        if not (self.grad_tol > 0 and self.stall_tol > 0):
            raise UsageError("tolerances must be positive")


@dataclass
class OptimResult:
    theta: np.ndarray
    loss: float
    history: list = field(default_factory=list)
    iterations: int = 0
    evaluations: int = 0
    message: str = ""


class _Tracker:
    """Counts evaluations and remembers the best point seen.

    Losses that agree to a few ulps are ties; among those the point with the
    smaller gradient wins, so a run that ends on the gradient tolerance
    returns the point that met it.
    """

    def __init__(self, objective):
        self.objective = objective
        self.evaluations = 0
        self.best_theta, self.best_loss, self.best_gnorm = None, np.inf, np.inf
        self._last = None

    def __call__(self, theta):
        if self._last is not None and np.array_equal(theta, self._last[0]):
            return self._last[1], self._last[2]
        theta = np.array(theta, dtype=float)
        try:
            loss, grad = self.objective(theta)
        except NonFiniteError as exc:
            raise TrainingAbort(str(exc), snapshot=self._snapshot()) from exc
        self.evaluations += 1
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingAbort("non-finite loss or gradient", snapshot=self._snapshot())
        grad = np.asarray(grad, dtype=float)
        gnorm = float(np.linalg.norm(grad))
        tie = abs(loss - self.best_loss) <= 4 * np.finfo(float).eps * abs(self.best_loss)
        if loss < self.best_loss and not tie or tie and gnorm < self.best_gnorm:
            self.best_loss, self.best_theta, self.best_gnorm = float(loss), theta.copy(), gnorm
        self._last = (theta, float(loss), grad)
        return float(loss), grad

    def _snapshot(self):
        return None if self.best_theta is None else {"theta": self.best_theta.copy(), "loss": self.best_loss}


def adam_minimize(objective, theta0, cfg=AdamConfig()):
    """Plain Adam with bias correction; stops on max_iters or small gradient."""
    track = _Tracker(objective)
    theta = np.array(theta0, dtype=float)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    loss, grad = track(theta)
    history = [loss]
    it = 0
    message = "max iterations"
    while True:
        if np.linalg.norm(grad) < cfg.grad_tol:
            message = "gradient tolerance"
            break
        if it >= cfg.max_iters:
            break
        it += 1
        m = cfg.beta1 * m + (1 - cfg.beta1) * grad
        v = cfg.beta2 * v + (1 - cfg.beta2) * grad * grad
        mhat = m / (1 - cfg.beta1 ** it)
        vhat = v / (1 - cfg.beta2 ** it)
        theta = theta - cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)
        loss, grad = track(theta)
        history.append(loss)
    return OptimResult(track.best_theta, track.best_loss, history, it, track.evaluations, message)


def _two_loop(grad, pairs):
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _seed(loss, grad):
    # fake previous value so the line search opens with a step near 1 / |g|
    return loss + 0.5 * float(np.linalg.norm(grad))


def _approx_wolfe(track, theta, direction, loss, grad, cfg, eps=1e-12):
    """Unit step accepted under the approximate Wolfe conditions.

    Near a minimum the loss stops resolving decrease at round-off level and
    the Armijo test fails spuriously. The step is taken when the loss has
    not grown beyond ``eps |loss|`` and the slope along ``direction`` obeys
    ``c2 g0 <= g1 <= (2 delta - 1) g0`` with ``delta = 0.1`` (Hager and
    Zhang's approximate Wolfe test).
    """
    g0 = float(grad @ direction)
    new_loss, new_grad = track(theta + direction)
    g1 = float(new_grad @ direction)
    if new_loss <= loss + eps * abs(loss) and cfg.c2 * g0 <= g1 <= -0.8 * g0:
        return 1.0
    return None


def lbfgs_minimize(objective, theta0, cfg=LbfgsConfig()):
    """Limited-memory BFGS with a strong-Wolfe line search.

    Curvature pairs with ``s.y <= 1e-12 |s| |y|`` are dropped. When the line search
    fails a unit step is tried under the approximate Wolfe test; failing that
    the memory is cleared and one steepest-descent step is attempted, and a
    second consecutive failure ends the run. Without curvature pairs the
    first trial step is scaled to about ``1 / |g|``.
    """
    track = _Tracker(objective)
    theta = np.array(theta0, dtype=float)
    loss, grad = track(theta)
    history = [loss]
    pairs = []
    prev_loss = None
    failed = False
    message = "max iterations"
    it = 0
    f = lambda x: track(x)[0]
    fprime = lambda x: track(x)[1]
    while True:
        if np.linalg.norm(grad) <= cfg.grad_tol:
            message = "gradient tolerance"
            break
        if it >= cfg.max_iters:
            break
        if len(history) > cfg.stall_window and history[-cfg.stall_window - 1] - history[-1] < cfg.stall_tol:
            message = "stalled"
            break
        direction = _two_loop(grad, pairs)
        if direction @ grad >= 0:
            pairs.clear()
            direction = -grad
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            step, *_ = line_search(f, fprime, theta, direction, gfk=grad, old_fval=loss,
                                   old_old_fval=prev_loss if pairs else _seed(loss, grad),
                                   c1=cfg.c1, c2=cfg.c2, maxiter=20)
        if step is None:
            step = _approx_wolfe(track, theta, direction, loss, grad, cfg)
        if step is None:
            if failed:
                message = "line search failed"
                break
            failed = True
            pairs.clear()
            direction = -grad
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                step, *_ = line_search(f, fprime, theta, direction, gfk=grad, old_fval=loss,
                                       old_old_fval=_seed(loss, grad), c1=cfg.c1, c2=cfg.c2, maxiter=20)
            if step is None:
                message = "line search failed"
                break
        else:
            failed = False
        new_theta = theta + step * direction
        new_loss, new_grad = track(new_theta)
        s, y = new_theta - theta, new_grad - grad
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            pairs.append((s, y, 1.0 / sy))
            if len(pairs) > cfg.memory:
                pairs.pop(0)
        prev_loss = loss
        theta, loss, grad = new_theta, new_loss, new_grad
        history.append(loss)
        it += 1
    return OptimResult(track.best_theta, track.best_loss, history, it, track.evaluations, message)
