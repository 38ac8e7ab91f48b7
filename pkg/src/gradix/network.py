"""Feed-forward tanh network, its parameters and two evaluation engines.

``forward`` evaluates one point on the scalar tape (any mix of floats, Var
and Dual). ``jet`` / ``jet_vjp`` evaluate a whole batch with numpy: the output,
one directional input derivative per row, and the gradient of any linear
functional of both with respect to the parameters. The batched path is the
hand-written equivalent of forward-over-reverse on the tape and is checked
against it in the test suite.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import UsageError


@dataclass(frozen=True)
class Architecture:
    """Layer widths ``[d_1, ..., d_K]`` with ``d_K = 1``."""

    widths: tuple
    activation: str = "tanh"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 3:
            raise UsageError("need at least one hidden layer (K >= 3)")
        if any(w < 1 for w in widths):
            raise UsageError(f"layer widths must be positive: {widths}")
        if widths[-1] != 1:
            raise UsageError("output layer must have width 1")
        if self.activation != "tanh":
            raise UsageError(f"unsupported activation {self.activation!r}")

    @classmethod
    def mlp(cls, n_inputs, hidden_layers, width):
        return cls((n_inputs,) + (width,) * hidden_layers + (1,))

    @property
    def n_inputs(self):
        return self.widths[0]

    @property
    def hidden_layers(self):
        return len(self.widths) - 2

    @property
    def shapes(self):
        return [(self.widths[k + 1], self.widths[k]) for k in range(len(self.widths) - 1)]


@dataclass(frozen=True)
class MlpParams:
    """Weights ``W_k`` (d_{k+1} x d_k) and biases ``b_k`` per affine layer."""

    arch: Architecture
    weights: tuple
    biases: tuple

    def __post_init__(self):
        if len(self.weights) != len(self.arch.shapes) or len(self.biases) != len(self.weights):
            raise UsageError("layer count does not match architecture")
        for (rows, cols), W, b in zip(self.arch.shapes, self.weights, self.biases):
            if np.shape(W) != (rows, cols) or np.shape(b) != (rows,):
                raise UsageError(f"parameter shape mismatch, expected W {(rows, cols)}")


def param_count(arch):
    """Total number of weights and biases, sum of (d_k + 1) d_{k+1}."""
    w = arch.widths
    return sum((w[k] + 1) * w[k + 1] for k in range(len(w) - 1))


def init(arch, seed):
    """Xavier-uniform weights, zero biases; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for rows, cols in arch.shapes:
        bound = math.sqrt(6.0 / (rows + cols))
        weights.append(rng.uniform(-bound, bound, size=(rows, cols)))
        biases.append(np.zeros(rows))
    return MlpParams(arch, tuple(weights), tuple(biases))


def zeros(arch):
    return unflatten(arch, np.zeros(param_count(arch)))


def flatten(params):
    """Layer-major vector: each layer's weights row-major, then its biases."""
    parts = []
    for W, b in zip(params.weights, params.biases):
        parts.append(np.asarray(W, dtype=float).ravel())
        parts.append(np.asarray(b, dtype=float).ravel())
    return np.concatenate(parts)


def unflatten(arch, vector):
    vector = np.asarray(vector, dtype=float)
    if vector.ndim != 1 or vector.size != param_count(arch):
        raise UsageError(f"expected {param_count(arch)} parameters, got {vector.size}")
    weights, biases, pos = [], [], 0
    for rows, cols in arch.shapes:
        weights.append(vector[pos:pos + rows * cols].reshape(rows, cols).copy())
        pos += rows * cols
        biases.append(vector[pos:pos + rows].copy())
        pos += rows
    return MlpParams(arch, tuple(weights), tuple(biases))


class TapedParams:
    """Parameters lifted onto a tape; ``leaves`` follow the flatten order."""

    def __init__(self, params, tape):
        self.arch = params.arch
        self.tape = tape
        self.leaves = []
        self.weights, self.biases = [], []
        for W, b in zip(params.weights, params.biases):
            rows = []
            for row in np.asarray(W):
                rows.append([tape.lift(v) for v in row])
                self.leaves.extend(rows[-1])
            bias = [tape.lift(v) for v in np.asarray(b)]
            self.leaves.extend(bias)
            self.weights.append(rows)
            self.biases.append(bias)


def forward(params, inputs):
    """Evaluate the network at one point.

    ``params`` is :class:`MlpParams` (constant weights) or :class:`TapedParams`
    (differentiable weights); ``inputs`` may hold floats, Var or Dual.
    """
    inputs = list(inputs)
    if len(inputs) != params.arch.n_inputs:
        raise UsageError(f"network expects {params.arch.n_inputs} inputs, got {len(inputs)}")
    z = inputs
    n_layers = len(params.weights)
    for k in range(n_layers):
        W, b = params.weights[k], params.biases[k]
        out = []
        for j in range(len(b)):
            acc = b[j]
            row = W[j]
            for i, zi in enumerate(z):
                acc = zi * row[i] + acc
            out.append(acc)
        z = out if k == n_layers - 1 else [ad.tanh(a) for a in out]
    return z[0]


def as_callable(params):
    """Wrap parameters as ``f(inputs)``; callables pass through unchanged."""
    if isinstance(params, (MlpParams, TapedParams)):
        return lambda xs: forward(params, xs)
    return params


def jet(params, X, V=None):
    """Batched output and directional derivative.

    Returns ``(I, dI, cache)`` where ``I[n]`` is the network at ``X[n]`` and
    ``dI[n]`` its derivative along ``V[n]`` (``None`` when ``V`` is None).
    """
    Z = np.asarray(X, dtype=float)
    T = None if V is None else np.asarray(V, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != params.arch.n_inputs:
        raise UsageError(f"batch must be (N, {params.arch.n_inputs})")
    cache = []
    n_layers = len(params.weights)
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        A = Z @ W.T + b
        TA = None if T is None else T @ W.T
        if k == n_layers - 1:
            cache.append((Z, T, None, None, None))
            return A[:, 0], (None if TA is None else TA[:, 0]), cache
        H = np.tanh(A)
        S = 1.0 - H * H
        cache.append((Z, T, H, S, TA))
        Z = H
        T = None if TA is None else S * TA
    raise AssertionError("unreachable")


def jet_vjp(params, cache, g_out, g_tangent=None):
    """Flat gradient of ``sum(g_out * I + g_tangent * dI)`` w.r.t. the parameters."""
    n_layers = len(params.weights)
    gA = np.asarray(g_out, dtype=float)[:, None]
    gTA = None if g_tangent is None else np.asarray(g_tangent, dtype=float)[:, None]
    grads = [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        Z, T, _, _, _ = cache[k]
        W = params.weights[k]
        gW = gA.T @ Z
        if gTA is not None:
            gW = gW + gTA.T @ T
        grads[k] = (gW, gA.sum(axis=0))
        if k == 0:
            break
        gH = gA @ W
        gTH = None if gTA is None else gTA @ W
        _, _, H, S, TA = cache[k - 1]
        gA = gH * S
        if gTH is not None:
            gA = gA - 2.0 * gTH * TA * H * S
            gTA = gTH * S
    return np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])


def evaluate_batch(net, X, V=None):
    """Values (and directional derivatives along ``V``) of ``net`` on a batch.

    ``net`` is :class:`MlpParams` or a callable taking a list of coordinate
    columns; callables are differentiated with dual numbers over arrays.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(net, MlpParams):
        I, dI, _ = jet(net, X, V)
        return I, dI
    cols = [X[:, j] for j in range(X.shape[1])]
    ones = np.ones(len(X))
    if V is None:
        y = net(cols)
        return np.asarray(ad.value_of(y), dtype=float) * ones, None
    V = np.asarray(V, dtype=float)
    y = net([ad.Dual(c, V[:, j]) for j, c in enumerate(cols)])
    if not isinstance(y, ad.Dual):
        y = ad.Dual(y, 0.0)
    return np.asarray(y.primal, dtype=float) * ones, np.asarray(y.tangent, dtype=float) * ones


def save_params(path, params):
    """Write a ``.params.json`` snapshot (architecture + flat vector)."""
    doc = {
        "architecture": {"widths": list(params.arch.widths), "activation": params.arch.activation},
        "params": [float(v) for v in flatten(params)],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_params(path):
    with open(path) as fh:
        doc = json.load(fh)
    arch = Architecture(tuple(doc["architecture"]["widths"]), doc["architecture"].get("activation", "tanh"))
    return unflatten(arch, np.array(doc["params"], dtype=float))
