"""Minimal dense neural-network engine.

One reverse-mode implementation serves the regression surrogate, gradient
descent in input space, and the actor-critic heads.  Layers are affine maps
with ReLU between them; the output is left linear, passed through ReLU (for
feature trunks), or normalized with a softmax (for policies).  ``backward``
returns gradients for every parameter *and* for the input vector, which is
what input-space optimization needs.

Arrays are batch-first: a 2-D input of shape (B, n_in) produces (B, n_out),
and parameter gradients are sums over the batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

OUTPUT_ACTIVATIONS = ("identity", "relu", "softmax")

_FORMAT = "sillopt-net"
_VERSION = 1


class NonFiniteGradientError(ValueError):
    """A gradient contained NaN or infinity."""


@dataclass
class GradientBundle:
    """Gradients matching a network's parameters, plus the input gradient."""

    weight_grads: list
    bias_grads: list
    input_grad: np.ndarray

    def parameter_grads(self) -> list:
        """Flat list interleaved as (W0, b0, W1, b1, ...)."""
        out = []
        for w, b in zip(self.weight_grads, self.bias_grads):
            out.extend((w, b))
        return out


class DenseNetwork:
    """Fully connected network; y = act(... relu(x @ W0 + b0) ... @ Wk + bk)."""

    def __init__(self, sizes, weights, biases, output_activation="identity"):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {output_activation!r}")
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ValueError("parameter count does not match layer sizes")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ValueError(f"layer {i}: shape mismatch for sizes {sizes}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i}: non-finite parameters")
        self.sizes = sizes
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.output_activation = output_activation

    @classmethod
    def initialize(cls, sizes, seed, output_activation="identity") -> "DenseNetwork":
        """He-style uniform init, U(-sqrt(6/fan_in), +sqrt(6/fan_in)); zero biases."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / n_in)
            weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
            biases.append(np.zeros(n_out))
        return cls(sizes, weights, biases, output_activation)

    @property
    def input_size(self) -> int:
        return self.sizes[0]

    @property
    def output_size(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def load_parameters(self, params):
        if len(params) != 2 * len(self.weights):
            raise ValueError("parameter list length mismatch")
        for i in range(len(self.weights)):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ValueError(f"layer {i}: parameter shape mismatch")
            self.weights[i] = np.asarray(w, dtype=float)
            self.biases[i] = np.asarray(b, dtype=float)

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            self.sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.output_activation,
        )

    def _trace(self, x2d):
        """Activations [a0..aL] and pre-activations [z1..zL] for backprop."""
        acts = [x2d]
        pres = []
        a = x2d
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            pres.append(z)
            if i < last:
                a = np.maximum(z, 0.0)
            else:
                a = _output_act(z, self.output_activation)
            acts.append(a)
        return acts, pres

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2d = x[None, :] if single else x
        if x2d.shape[1] != self.input_size:
            raise ValueError(f"expected input size {self.input_size}, got {x2d.shape[1]}")
        y = self._trace(x2d)[0][-1]
        return y[0] if single else y

    def backward(self, x, upstream) -> GradientBundle:
        """Reverse-mode gradients for dL/d(output) = ``upstream``.

        Parameter gradients are summed over the batch; the input gradient has
        the same shape as ``x``.
        """
        x = np.asarray(x, dtype=float)
        upstream = np.asarray(upstream, dtype=float)
        single = x.ndim == 1
        x2d = x[None, :] if single else x
        u2d = upstream[None, :] if single else upstream
        if u2d.shape != (x2d.shape[0], self.output_size):
            raise ValueError(
                f"upstream shape {upstream.shape} does not match output size {self.output_size}"
            )
        acts, pres = self._trace(x2d)

        dz = _output_act_backward(u2d, acts[-1], pres[-1], self.output_activation)
        weight_grads = [None] * len(self.weights)
        bias_grads = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            weight_grads[i] = acts[i].T @ dz
            bias_grads[i] = dz.sum(axis=0)
            da = dz @ self.weights[i].T
            if i > 0:
                dz = da * (pres[i - 1] > 0)
        input_grad = da[0] if single else da
        return GradientBundle(weight_grads, bias_grads, input_grad)

    def to_json_obj(self) -> dict:
        return {
            "format": _FORMAT,
            "version": _VERSION,
            "sizes": list(self.sizes),
            "hidden_activation": "relu",
            "output_activation": self.output_activation,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_json_obj(cls, obj) -> "DenseNetwork":
        if obj.get("format") != _FORMAT:
            raise ValueError(f"not a {_FORMAT} object")
        if obj.get("version") != _VERSION:
            raise ValueError(f"unsupported {_FORMAT} version {obj.get('version')!r}")
        return cls(
            tuple(obj["sizes"]),
            [np.asarray(w, dtype=float) for w in obj["weights"]],
            [np.asarray(b, dtype=float) for b in obj["biases"]],
            obj["output_activation"],
        )


def _output_act(z, kind):
    if kind == "identity":
        return z
    if kind == "relu":
        return np.maximum(z, 0.0)
    # softmax, shifted for stability; strictly positive rows summing to 1
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _output_act_backward(u, a, z, kind):
    if kind == "identity":
        return u
    if kind == "relu":
        return u * (z > 0)
    # softmax Jacobian: dL/dz_j = p_j * (u_j - sum_k u_k p_k)
    dot = (u * a).sum(axis=1, keepdims=True)
    return a * (u - dot)


@dataclass
class AdamState:
    """Moment accumulators for one parameter list."""

    step: int
    m: list
    v: list
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def initialize(cls, params, lr) -> "AdamState":
        return cls(
            step=0,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            lr=lr,
        )


def adam_step(params, grads, state: AdamState) -> tuple[list, AdamState]:
    """One bias-corrected Adam update; pure in (params, grads, state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and state must have matching lengths")
    for g in grads:
        if not np.isfinite(g).all():
            raise NonFiniteGradientError("gradient contains NaN or infinity")
    t = state.step + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m2 = state.beta1 * m + (1 - state.beta1) * g
        v2 = state.beta2 * v + (1 - state.beta2) * g * g
        m_hat = m2 / (1 - state.beta1**t)
        v_hat = v2 / (1 - state.beta2**t)
        new_params.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m2)
        new_v.append(v2)
    return new_params, AdamState(t, new_m, new_v, state.lr, state.beta1, state.beta2, state.eps)


@dataclass
class GradientCheckReport:
    max_rel_error: float
    worst: str
    passed: bool


def gradient_check(net: DenseNetwork, x, loss, h: float = 1e-5, tol: float = 1e-4) -> GradientCheckReport:
    """Compare analytic gradients against central finite differences.

    ``loss`` maps the network output to ``(value, dvalue_doutput)``.  The
    relative error of each element uses a denominator floored at 1e-3 times
    the largest gradient magnitude, so elements that are incidentally tiny do
    not dominate the report with finite-difference noise.
    """
    x = np.asarray(x, dtype=float)
    _, dldy = loss(net.forward(x))
    bundle = net.backward(x, dldy)

    def central_diff(flat, evaluate):
        g = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = evaluate()
            flat[i] = orig - h
            down = evaluate()
            flat[i] = orig
            g[i] = (up - down) / (2 * h)
        return g

    def loss_value_at_x():
        return loss(net.forward(x))[0]

    pairs = []  # (label, analytic, numeric)
    for li in range(len(net.weights)):
        for label, arr, ana in (
            (f"W{li}", net.weights[li], bundle.weight_grads[li]),
            (f"b{li}", net.biases[li], bundle.bias_grads[li]),
        ):
            num = central_diff(arr.reshape(-1), loss_value_at_x)
            pairs.append((label, ana.reshape(-1), num))

    x_probe = x.copy()
    num_x = central_diff(
        x_probe.reshape(-1), lambda: loss(net.forward(x_probe))[0]
    )
    pairs.append(("x", bundle.input_grad.reshape(-1), num_x))

    gmax = max(
        max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0)) for _, a, n in pairs
    )
    floor = max(1e-3 * gmax, 1e-12)
    worst, worst_err = "", 0.0
    for label, a, n in pairs:
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        errs = np.abs(a - n) / denom
        if errs.size and errs.max() > worst_err:
            worst_err = float(errs.max())
            worst = label
    return GradientCheckReport(worst_err, worst, worst_err <= tol)


def save_network(net: DenseNetwork, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(net.to_json_obj(), f)
        f.write("\n")


def load_network(path) -> DenseNetwork:
    with open(path, encoding="utf-8") as f:
        return DenseNetwork.from_json_obj(json.load(f))
