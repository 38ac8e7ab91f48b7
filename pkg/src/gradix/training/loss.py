"""PINN objectives.

Two evaluation routes compute the same weighted least-squares loss:

* :func:`loss_forward` / :func:`loss_inverse` build it on the scalar tape, one
  collocation point at a time, and return a :class:`~gradix.autodiff.Var`.
* :class:`PinnLoss` evaluates it for the whole batch with the numpy jet
  kernels and returns ``(loss, gradient)``; the optimizers use this route.
"""

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import NonFiniteError, UsageError
from ..network import MlpParams, TapedParams, as_callable, flatten, jet, jet_vjp, param_count, unflatten
from ..rte.case import interior_residual_var


@dataclass(frozen=True)
class LossConfig:
    """Interior weight ``lam``, regularization weight ``lam_reg`` and order ``q``."""

    lam: float = 1.0
    lam_reg: float = 0.0
    q: int = 2

    def __post_init__(self):
        if not self.lam > 0:
            raise UsageError("lambda must be positive")
        if not 0 <= self.lam_reg < 0.1:
            raise UsageError("lambda_reg must lie in [0, 0.1)")
        if self.q not in (1, 2):
            raise UsageError("regularization order must be 1 or 2")


def _check_families(case, sets, inverse):
    counts = sets.counts()
    if inverse:
        if counts["N_d"] == 0:
            raise UsageError("the inverse loss needs a non-empty data family")
    else:
        if case.inverse or counts["N_d"]:
            raise UsageError(f"case {case.name!r} carries data; use the inverse loss")
        if counts["N_sb"] == 0:
            raise UsageError("the forward loss needs spatial boundary points")
        if not case.steady and counts["N_tb"] == 0:
            raise UsageError("a transient forward loss needs temporal boundary points")


def _finite(value, point, kind):
    if not np.isfinite(ad.value_of(value)):
        raise NonFiniteError(f"non-finite {kind} residual at {list(map(float, point))}", point=point)


def _tape_loss(params, sets, case, cfg, inverse, tape):
    if isinstance(params, TapedParams):
        tp, tape = params, params.tape
    elif isinstance(params, MlpParams):
        tape = ad.Tape() if tape is None else tape
        tp = TapedParams(params, tape)
    else:
        # a plain callable stands in for the network; it has no parameters
        tape = ad.Tape() if tape is None else tape
        tp = params
    f = as_callable(tp)

    total = tape.lift(0.0)
    for kind in ("sb", "tb", "d"):
        fam = sets.families()[kind]
        for p, w, g in zip(fam.points, fam.weights, fam.targets):
            r = f([float(v) for v in p]) - float(g)
            _finite(r, p, kind)
            total = total + r * r * float(w)
    interior = tape.lift(0.0)
    for p, w in zip(sets.interior.points, sets.interior.weights):
        r = interior_residual_var(case, tp, p, tape)
        _finite(r, p, "interior")
        interior = interior + r * r * float(w)
    total = total + interior * cfg.lam
    if cfg.lam_reg and isinstance(tp, TapedParams):
        reg = tape.lift(0.0)
        for leaf in tp.leaves:
            reg = reg + (leaf * leaf if cfg.q == 2 else (leaf if leaf.value >= 0 else -leaf))
        total = total + reg * cfg.lam_reg
    if not isinstance(total, ad.Var):
        total = tape.lift(ad.value_of(total))
    return total


def loss_forward(params, sets, case, cfg=LossConfig(), tape=None):
    """Forward-problem loss as a tape variable.

    Pass :class:`~gradix.network.TapedParams` to differentiate with
    :func:`~gradix.autodiff.reverse_gradient` against ``params.leaves``.
    """
    _check_families(case, sets, inverse=False)
    return _tape_loss(params, sets, case, cfg, False, tape)


def loss_inverse(params, sets, case, cfg=LossConfig(), tape=None):
    """Inverse-problem loss (data term, optional boundary term) as a tape variable."""
    _check_families(case, sets, inverse=True)
    return _tape_loss(params, sets, case, cfg, True, tape)


class PinnLoss:
    """Batched loss and gradient for one case and training set.

    Parameters
    ----------
    case : CaseSpec
    sets : TrainingSet
    arch : Architecture
    cfg : LossConfig
    inverse : bool
        Select the inverse objective (data family required).
    scale : tuple of (offset, half_width) per input, optional
        Affine input map ``u = (z - offset) / half_width`` applied before the
        network. Parameters handled here live in the scaled coordinates; use
        :meth:`to_physical` to fold the map into the first layer.
    """

    def __init__(self, case, sets, arch, cfg=LossConfig(), inverse=False, scale=None):
        _check_families(case, sets, inverse)
        self.case, self.sets, self.arch, self.cfg = case, sets, arch, cfg
        m = len(case.coords)
        if arch.n_inputs != m:
            raise UsageError(f"network takes {arch.n_inputs} inputs, case has {m}")
        if scale is None:
            scale = [(0.0, 1.0)] * m
        self.offset = np.array([s[0] for s in scale], dtype=float)
        self.half = np.array([s[1] for s in scale], dtype=float)
        self.n_params = param_count(arch)

        fam = sets.interior
        self.X = fam.points
        self.w_int = fam.weights
        if len(fam):
            V, coef = case.transport(fam.points)
            self.V, self.coef = V, coef
            self.q_int = case.forcing(fam.points)
            Q, C = case.scatter_stencil(fam.points)
        else:
            self.V = np.empty((0, m))
            self.coef = self.q_int = np.empty(0)
            Q, C = np.empty((0, 0, m)), np.empty((0, 0))
        self.C = C
        self.Q = Q.reshape(-1, m)
        self.fits = [(k, f) for k, f in sets.families().items() if k != "int" and len(f)]

    # coordinates ---------------------------------------------------------
    def _u(self, Z):
        return (Z - self.offset) / self.half

    def to_physical(self, theta):
        """Parameters acting on raw inputs, equivalent to ``theta`` on scaled ones."""
        p = unflatten(self.arch, theta)
        W0 = p.weights[0] / self.half
        b0 = p.biases[0] - W0 @ self.offset
        return type(p)(p.arch, (W0,) + p.weights[1:], (b0,) + p.biases[1:])

    def from_physical(self, params):
        W0 = params.weights[0] * self.half
        b0 = params.biases[0] + params.weights[0] @ self.offset
        return flatten(type(params)(params.arch, (W0,) + params.weights[1:], (b0,) + params.biases[1:]))

    # evaluation -----------------------------------------------------------
    def _check(self, R, P, kind):
        bad = ~np.isfinite(R)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise NonFiniteError(f"non-finite {kind} residual at {P[i].tolist()}", point=P[i])

    def residuals(self, theta):
        """Per-family residual vectors (scaled-coordinate parameters)."""
        p = unflatten(self.arch, theta)
        out = {}
        if len(self.X):
            I, dI, _ = jet(p, self._u(self.X), self.V / self.half)
            R = dI + self.coef * I - self.q_int
            if self.C.size:
                Is, _, _ = jet(p, self._u(self.Q))
                R = R - np.sum(self.C * Is.reshape(self.C.shape), axis=1)
            out["int"] = R
        else:
            out["int"] = np.empty(0)
        for kind, fam in self.fits:
            I, _, _ = jet(p, self._u(fam.points))
            out[kind] = I - fam.targets
        for kind in ("sb", "tb", "d"):
            out.setdefault(kind, np.empty(0))
        return out

    def components(self, theta):
        """Training errors ``sqrt(sum w R^2)`` per family."""
        R = self.residuals(theta)
        fams = self.sets.families()
        return {k: float(np.sqrt(np.sum(fams[k].weights * R[k] ** 2))) for k in ("int", "sb", "tb", "d")}

    def __call__(self, theta):
        """Return ``(loss, gradient)`` at flat scaled parameters ``theta``."""
        theta = np.asarray(theta, dtype=float)
        p = unflatten(self.arch, theta)
        loss = 0.0
        grad = np.zeros(self.n_params)
        lam = self.cfg.lam
        if len(self.X):
            I, dI, cache = jet(p, self._u(self.X), self.V / self.half)
            R = dI + self.coef * I - self.q_int
            if self.C.size:
                Is, _, cache_s = jet(p, self._u(self.Q))
                R = R - np.sum(self.C * Is.reshape(self.C.shape), axis=1)
            self._check(R, self.X, "interior")
            loss += lam * float(np.sum(self.w_int * R * R))
            gR = 2.0 * lam * self.w_int * R
            grad += jet_vjp(p, cache, gR * self.coef, gR)
            if self.C.size:
                grad += jet_vjp(p, cache_s, -(gR[:, None] * self.C).ravel())
        for kind, fam in self.fits:
            I, _, cache = jet(p, self._u(fam.points))
            R = I - fam.targets
            self._check(R, fam.points, kind)
            loss += float(np.sum(fam.weights * R * R))
            grad += jet_vjp(p, cache, 2.0 * fam.weights * R)
        if self.cfg.lam_reg:
            phys = flatten(self.to_physical(theta))
            if self.cfg.q == 2:
                loss += self.cfg.lam_reg * float(phys @ phys)
                g_phys = 2.0 * self.cfg.lam_reg * phys
            else:
                loss += self.cfg.lam_reg * float(np.sum(np.abs(phys)))
                g_phys = self.cfg.lam_reg * np.sign(phys)
            grad += self._pullback_physical(g_phys)
        return loss, grad

    def _pullback_physical(self, g_phys):
        """Chain rule through :meth:`to_physical` (linear in theta)."""
        gp = unflatten(self.arch, g_phys)
        gW0 = gp.weights[0] / self.half - np.outer(gp.biases[0], self.offset / self.half)
        return flatten(type(gp)(gp.arch, (gW0,) + gp.weights[1:], gp.biases))
