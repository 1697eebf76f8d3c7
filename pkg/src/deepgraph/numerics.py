"""Dense/sparse products, activations, loss, RMSProp and a gradient oracle.

Training runs in float64; losses can also be evaluated in extended precision
for the gradient oracle. Dense products go through numpy's BLAS; the
sparse product goes through :mod:`deepgraph.kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def matmul(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return a @ b


def spmm(adj, h):
    """``adj @ h`` for a :class:`~deepgraph.graph.NormalizedAdjacency`."""
    return adj.matmul(h)


def relu(x):
    """Returns ``(y, mask)``; ``mask`` marks entries where ``x > 0``."""
    mask = x > 0
    return np.where(mask, x, 0.0), mask


def relu_backward(dy, mask):
    return np.where(mask, dy, 0.0)


def dropout(x, rate, rng, training):
    """Inverted dropout. Returns ``(y, scale_mask)`` where ``scale_mask`` is
    ``None`` when nothing was dropped."""
    if not training or rate <= 0.0:
        return x, None
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    keep = rng.random(x.shape) >= rate
    scale = keep / (1.0 - rate)
    return x * scale, scale


def softmax_cross_entropy(logits, labels, mask):
    """Mean NLL over ``mask``-selected rows and its gradient w.r.t. logits."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("empty supervision mask")
    z = logits[idx]
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    y = labels[idx]
    loss = np.mean(logsum - z[np.arange(idx.size), y])
    probs = np.exp(z - logsum[:, None])
    probs[np.arange(idx.size), y] -= 1.0
    grad = np.zeros_like(logits)
    grad[idx] = probs / idx.size
    return loss, grad


def glorot_uniform(fan_in, fan_out, rng):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class Parameter:
    name: str
    value: np.ndarray
    grad: np.ndarray = None

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad.fill(0.0)


@dataclass
class RmsPropState:
    decay: float = 0.9
    epsilon: float = 1e-8
    accumulators: dict = field(default_factory=dict)


def rmsprop_step(params, state, lr):
    """s <- decay*s + (1-decay)*g^2; w <- w - lr*g/(sqrt(s)+eps); zero grads."""
    for p in params:
        s = state.accumulators.get(p.name)
        if s is None:
            s = state.accumulators[p.name] = np.zeros_like(p.value)
        s *= state.decay
        s += (1.0 - state.decay) * p.grad * p.grad
        p.value -= lr * p.grad / (np.sqrt(s) + state.epsilon)
        p.zero_grad()


def finite_difference_check(loss_fn, params, eps=1e-6, max_coords=None, rng=None):
    """Compare analytic gradients (already in ``p.grad``) to central differences.

    ``loss_fn()`` must evaluate the loss at the current parameter values
    without touching the gradients. Returns ``(max_rel_error, per_param)``
    where ``per_param`` maps names to their own maximum. The relative error
    uses ``max(|analytic|, |numeric|, 1e-8)`` as denominator.
    """
    coords = [(k, idx) for k, p in enumerate(params) for idx in range(p.value.size)]
    if max_coords is not None and len(coords) > max_coords:
        rng = rng or np.random.default_rng(0)
        pick = np.sort(rng.choice(len(coords), size=max_coords, replace=False))
        coords = [coords[i] for i in pick]
    per_param = {p.name: 0.0 for p in params}
    worst = 0.0
    for k, idx in coords:
        p = params[k]
        flat = p.value.reshape(-1)
        orig = flat[idx]
        flat[idx] = orig + eps
        f_plus = loss_fn()
        flat[idx] = orig - eps
        f_minus = loss_fn()
        flat[idx] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise FloatingPointError("non-finite loss during finite differences")
        numeric = (f_plus - f_minus) / (2.0 * eps)
        analytic = p.grad.reshape(-1)[idx]
        err = float(abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
        per_param[p.name] = max(per_param[p.name], err)
        worst = max(worst, err)
    return worst, per_param
