"""Named parameter collections, initialization and optimizer steps."""
from __future__ import annotations

from collections import OrderedDict

import numpy as np

from .errors import TrainingStateError
from .tensor import Tensor, get_default_dtype


class NetworkParams:
    """Ordered ``name -> Tensor`` mapping; ``requires_grad`` is the trainable flag."""

    def __init__(self, tensors=None):
        self._tensors = OrderedDict()
        self.optim_state = {}
        for name, t in (tensors or {}).items():
            self[name] = t

    def __getitem__(self, name):
        return self._tensors[name]

    def __setitem__(self, name, tensor):
        if not isinstance(tensor, Tensor):
            tensor = Tensor(tensor, requires_grad=True)
        self._tensors[name] = tensor

    def __contains__(self, name):
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def names(self):
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def is_trainable(self, name):
        return self._tensors[name].requires_grad

    def set_trainable(self, name, flag):
        self._tensors[name].requires_grad = bool(flag)

    def freeze(self, prefix=""):
        for name, t in self._tensors.items():
            if name.startswith(prefix):
                t.requires_grad = False

    def unfreeze(self, prefix=""):
        for name, t in self._tensors.items():
            if name.startswith(prefix):
                t.requires_grad = True

    def trainable_flags(self):
        return {n: t.requires_grad for n, t in self._tensors.items()}

    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = np.zeros_like(t.data) if t.requires_grad else None

    def clear_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def num_values(self):
        return sum(t.size for t in self._tensors.values())

    def astype(self, dtype):
        out = NetworkParams()
        for name, t in self._tensors.items():
            out[name] = Tensor(t.data.astype(dtype), requires_grad=t.requires_grad)
        return out

    def copy(self):
        out = NetworkParams()
        for name, t in self._tensors.items():
            out[name] = Tensor(t.data.copy(), requires_grad=t.requires_grad)
        return out


def glorot_uniform(rng, shape, fan_in, fan_out, dtype=None):
    s = np.sqrt(6.0 / (fan_in + fan_out))
    dtype = dtype or get_default_dtype()
    return Tensor(rng.uniform(-s, s, size=shape).astype(dtype, copy=False), requires_grad=True)


def zeros(shape, dtype=None):
    return Tensor(np.zeros(shape, dtype=dtype or get_default_dtype()), requires_grad=True)


def _trainable_with_grads(params):
    out = []
    for name, t in params.items():
        if not t.requires_grad:
            continue
        if t.grad is None:
            raise TrainingStateError(f"trainable tensor {name!r} has no gradient; run backward first")
        out.append((name, t))
    return out


def sgd_step(params, lr):
    for _, t in _trainable_with_grads(params):
        t.data -= lr * t.grad
    params.clear_grad()


def adam_step(params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; moment estimates live on ``params.optim_state``."""
    for name, t in _trainable_with_grads(params):
        st = params.optim_state.get(name)
        if st is None:
            st = params.optim_state[name] = {"m": np.zeros_like(t.data), "v": np.zeros_like(t.data), "t": 0}
        st["t"] += 1
        g = t.grad
        st["m"] = beta1 * st["m"] + (1 - beta1) * g
        st["v"] = beta2 * st["v"] + (1 - beta2) * g * g
        m_hat = st["m"] / (1 - beta1 ** st["t"])
        v_hat = st["v"] / (1 - beta2 ** st["t"])
        t.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    params.clear_grad()
