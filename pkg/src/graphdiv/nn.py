"""Dense layers, losses, Adam, and gradient checking on float64 numpy arrays.

Gradients are hand-derived per layer; there is no autodiff. Everything is a
pure function over caller-owned buffers, so independent trainings can run in
parallel processes without shared state.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np


class NumericsFault(ArithmeticError):
    """A NaN/Inf showed up where only finite values are allowed."""


class ShapeError(ValueError):
    pass


def check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise NumericsFault(f"non-finite values in {name}")


def sigmoid(z):
    # piecewise form avoids overflow in exp for large |z|
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(z):
    """log(1 + exp(z)), overflow-safe."""
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def softmax(z, axis=-1):
    shifted = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


ACTIVATIONS = ("identity", "relu", "sigmoid", "softmax")


@dataclass
class DenseLayer:
    """y = act(x W^T + b); weight is (out, in), inputs are batched row-wise."""
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError("weight must be (out, in) with bias of length out")

    @property
    def out_dim(self):
        return self.weight.shape[0]

    @property
    def in_dim(self):
        return self.weight.shape[1]


def init_dense(out_dim, in_dim, activation, rng):
    """Uniform weights in [-1/sqrt(fan_in), +1/sqrt(fan_in)], zero bias."""
    bound = 1.0 / np.sqrt(in_dim)
    w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    return DenseLayer(w, np.zeros(out_dim), activation)


def _apply_activation(act, z):
    if act == "identity":
        return z
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "sigmoid":
        return sigmoid(z)
    return softmax(z, axis=-1)


def _activation_backward(act, z, out, grad_out):
    if act == "identity":
        return grad_out
    if act == "relu":
        return grad_out * (z > 0)
    if act == "sigmoid":
        return grad_out * out * (1.0 - out)
    # softmax, per row
    inner = np.sum(grad_out * out, axis=-1, keepdims=True)
    return out * (grad_out - inner)


def forward(layers, x):
    """Run a layer stack over a batch; returns (output, tape for backward)."""
    h = np.atleast_2d(np.asarray(x, dtype=float))
    tape = []
    for k, layer in enumerate(layers):
        if h.shape[1] != layer.in_dim:
            raise ShapeError(f"layer {k}: input width {h.shape[1]} != expected {layer.in_dim}")
        z = h @ layer.weight.T + layer.bias
        out = _apply_activation(layer.activation, z)
        tape.append((h, z, out))
        h = out
    return h, tape


def backward(layers, tape, grad_out):
    """Backprop grad_out through the stack.

    Returns (per-layer [(grad_weight, grad_bias)], grad_input).
    """
    grads = [None] * len(layers)
    g = grad_out
    for k in range(len(layers) - 1, -1, -1):
        h, z, out = tape[k]
        gz = _activation_backward(layers[k].activation, z, out, g)
        grads[k] = (gz.T @ h, gz.sum(axis=0))
        g = gz @ layers[k].weight
    return grads, g


def multilabel_bce_loss(logits, targets):
    """Summed binary cross-entropy from logits; grad wrt logits is sigma(z) - t."""
    z = np.asarray(logits, dtype=float)
    t = np.asarray(targets, dtype=float)
    if z.shape != t.shape:
        raise ShapeError(f"logits {z.shape} vs targets {t.shape}")
    loss = float(np.sum(softplus(z) - t * z))
    return loss, sigmoid(z) - t


def multiclass_ce_loss(logits, target_dist):
    """Cross-entropy of softmax(logits) against a probability vector."""
    z = np.asarray(logits, dtype=float)
    p = np.asarray(target_dist, dtype=float)
    if z.shape != p.shape:
        raise ShapeError(f"logits {z.shape} vs target_dist {p.shape}")
    shifted = z - np.max(z, axis=-1, keepdims=True)
    log_q = shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    loss = float(-np.sum(p * log_q))
    return loss, softmax(z, axis=-1) - p


@dataclass
class AdamState:
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_step(params, grads, state, lr):
    """One Adam update (with bias correction) over a dict of named arrays.

    Mutates params and state in place; returns params.
    """
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericsFault(f"non-finite gradient for parameter {name!r}")
        m = state.first_moment.setdefault(name, np.zeros_like(p))
        v = state.second_moment.setdefault(name, np.zeros_like(p))
        m += (1 - b1) * (g - m)
        v += (1 - b2) * (g * g - v)
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params


def gradient_check(params, loss_and_grads, eps=1e-5):
    """Max relative error between analytic and central-difference gradients.

    `loss_and_grads(params) -> (loss, {name: grad})`; every parameter entry is
    perturbed, so keep the models small.
    """
    _, analytic = loss_and_grads(params)
    worst = 0.0
    for name, p in params.items():
        flat = p.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lo_plus, _ = loss_and_grads(params)
            flat[i] = orig - eps
            lo_minus, _ = loss_and_grads(params)
            flat[i] = orig
            numeric = (lo_plus - lo_minus) / (2 * eps)
            err = abs(a_flat[i] - numeric) / max(abs(a_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


# --- checkpoints -------------------------------------------------------------
#
# Versioned JSON with hexadecimal float encoding: decimal round-tripping is
# exact, so a reloaded model is bit-identical to the saved one.

CHECKPOINT_VERSION = 1


def _values_checksum(values):
    blob = json.dumps(values, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def params_to_checkpoint(params, meta=None):
    shapes = {name: list(a.shape) for name, a in params.items()}
    values = {name: [float(x).hex() for x in a.reshape(-1)] for name, a in params.items()}
    ckpt = {"version": CHECKPOINT_VERSION, "shapes": shapes, "values": values,
            "checksum": _values_checksum(values)}
    if meta:
        ckpt["meta"] = meta
    return ckpt


class CheckpointError(ValueError):
    pass


def params_from_checkpoint(ckpt):
    if ckpt.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {ckpt.get('version')!r}")
    if _values_checksum(ckpt["values"]) != ckpt.get("checksum"):
        raise CheckpointError("checkpoint checksum mismatch (corrupted file)")
    params = {}
    for name, shape in ckpt["shapes"].items():
        flat = np.array([float.fromhex(h) for h in ckpt["values"][name]])
        params[name] = flat.reshape(shape)
    return params


def save_checkpoint(params, path, meta=None):
    with open(path, "w") as f:
        json.dump(params_to_checkpoint(params, meta=meta), f)


def load_checkpoint(path):
    with open(path) as f:
        ckpt = json.load(f)
    return params_from_checkpoint(ckpt), ckpt.get("meta")
