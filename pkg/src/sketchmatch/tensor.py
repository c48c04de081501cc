"""Dense tensors with tape-based reverse-mode differentiation.

Every op records its parents and a closure mapping the output gradient to
parent gradients. ``Tensor.backward`` orders the recorded graph
topologically and visits each node once.

Convolutions follow the cross-correlation convention (kernels are not
flipped), matching common learning frameworks.
"""
from __future__ import annotations

import contextlib

import numpy as np

from .errors import ContractError, DegenerateEmbeddingError, DimensionError

_DEFAULT_DTYPE = np.float64

# op name -> multiplier applied to that op's parent gradients (test hook)
_BACKWARD_FAULTS: dict[str, float] = {}
_KINK_TAPE = None


def get_default_dtype():
    return _DEFAULT_DTYPE


def set_default_dtype(dtype):
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported precision {dtype}")
    _DEFAULT_DTYPE = dtype.type


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the dtype used for newly created tensors."""
    old = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(old)


@contextlib.contextmanager
def inject_backward_fault(op, scale=1.5):
    """Scale the gradients produced by ``op`` during backward (negative control)."""
    _BACKWARD_FAULTS[op] = scale
    try:
        yield
    finally:
        _BACKWARD_FAULTS.pop(op, None)


class _KinkTape:
    """Sign masks of relu / leaky relu / abs inputs, in evaluation order."""

    def __init__(self):
        self.masks = []
        self.pos = 0
        self.replaying = False
        self.flipped = 0  # elements whose live sign differed from the pinned one


@contextlib.contextmanager
def record_kinks():
    """Record the sign pattern at every relu, leaky relu and abs evaluated in the block."""
    global _KINK_TAPE
    prev, _KINK_TAPE = _KINK_TAPE, _KinkTape()
    try:
        yield _KINK_TAPE
    finally:
        _KINK_TAPE = prev


@contextlib.contextmanager
def replay_kinks(tape):
    """Evaluate piecewise-linear ops on the linear pieces stored in ``tape``.

    The same computation must run in the same order as when it was recorded.
    Near a point where no kink input is exactly zero this is the function the
    analytic gradient differentiates, so finite differences stay smooth even
    when a probe step would cross a kink.
    """
    global _KINK_TAPE
    tape.pos, tape.replaying = 0, True
    prev, _KINK_TAPE = _KINK_TAPE, tape
    try:
        yield tape
    finally:
        _KINK_TAPE = prev
        tape.replaying = False


def _kink_sign(data):
    pos = data > 0
    tape = _KINK_TAPE
    if tape is None:
        return pos
    if not tape.replaying:
        tape.masks.append(pos)
        return pos
    if tape.pos >= len(tape.masks) or tape.masks[tape.pos].shape != pos.shape:
        raise ContractError("kink replay diverged from the recorded computation")
    pinned = tape.masks[tape.pos]
    tape.pos += 1
    tape.flipped += int(np.count_nonzero(pinned != pos))
    return pinned


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, _parents=(), _grad_fn=None, _op=""):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        # Python numbers and lists follow the default dtype; float arrays keep theirs
        if not isinstance(data, np.ndarray) or arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(_DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._grad_fn = _grad_fn
        self._op = _op

    # -- basic properties -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def __len__(self):
        return self.shape[0]

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    # -- autodiff ----------------------------------------------------------
    def backward(self, grad=None):
        if grad is None:
            if self.size != 1:
                raise ContractError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.dtype)
        if grad.shape != self.shape:
            raise DimensionError(f"gradient shape {grad.shape} != tensor shape {self.shape}")

        order = _topological_order(self)
        grads = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._grad_fn is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = node._grad_fn(g)
            scale = _BACKWARD_FAULTS.get(node._op)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if scale is not None:
                    pg = pg * scale
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # -- operators ---------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, grad_fn, op):
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=tuple(parents) if req else (),
                  _grad_fn=grad_fn if req else None, _op=op)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise arithmetic -------------------------------------------------
def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape),
                              _unbroadcast(g * a.data, b.shape)), "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return _result(out, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.shape),
                              _unbroadcast(-g * out / b.data, b.shape)), "div")


def power(a, p):
    a = as_tensor(a)
    p = float(p)
    return _result(a.data ** p, (a,), lambda g: (g * p * a.data ** (p - 1),), "pow")


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    a = as_tensor(a)
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def tabs(a):
    a = as_tensor(a)
    if _KINK_TAPE is not None:
        sign = np.where(_kink_sign(a.data), 1.0, -1.0) * (a.data != 0)
        return _result(sign * a.data, (a,), lambda g: (g * sign,), "abs")
    return _result(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),), "abs")


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: axis 1 of left ({a.shape[1]}) != axis 0 of right ({b.shape[0]})")
    return _result(a.data @ b.data, (a, b),
                   lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


# -- reductions and shape ops -----------------------------------------------
def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(out, (a,), grad_fn, "sum")


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / n)


def reshape(a, shape):
    a = as_tensor(a)
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def flatten(a):
    return reshape(a, (a.shape[0], -1))


def getitem(a, idx):
    a = as_tensor(a)

    def grad_fn(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _result(a.data[idx], (a,), grad_fn, "getitem")


def take_rows(a, indices):
    """Gather rows ``a[indices]``; repeated indices accumulate in backward."""
    return getitem(a, np.asarray(indices, dtype=np.intp))


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return _result(np.concatenate([t.data for t in tensors], axis=axis), tensors,
                   lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


# -- activations --------------------------------------------------------------
def _stable_sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x):
    x = as_tensor(x)
    out = _stable_sigmoid(x.data)
    return _result(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh_act(x):
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _result(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def leaky_relu(x, slope=0.2):
    x = as_tensor(x)
    pos = _kink_sign(x.data)
    return _result(np.where(pos, x.data, slope * x.data), (x,),
                   lambda g: (np.where(pos, g, slope * g),), "leaky_relu")


def relu(x):
    return leaky_relu(x, 0.0)


def l2_normalize(x):
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"l2_normalize expects [B,D], got {x.shape}")
    norms = np.sqrt((x.data * x.data).sum(axis=1, keepdims=True))
    if np.any(norms == 0):
        rows = np.flatnonzero(norms[:, 0] == 0).tolist()
        raise DegenerateEmbeddingError(f"cannot normalize zero rows {rows}")
    out = x.data / norms

    def grad_fn(g):
        return ((g - out * (g * out).sum(axis=1, keepdims=True)) / norms,)

    return _result(out, (x,), grad_fn, "l2_normalize")


def softmax(x):
    x = as_tensor(x)
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def grad_fn(g):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return _result(out, (x,), grad_fn, "softmax")


def log_softmax(x):
    x = as_tensor(x)
    z = x.data - x.data.max(axis=1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    p = np.exp(out)
    return _result(out, (x,), lambda g: (g - p * g.sum(axis=1, keepdims=True),), "log_softmax")


# -- layers -------------------------------------------------------------------
def linear(x, w, b):
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.ndim != 2 or w.ndim != 2 or b.ndim != 1:
        raise DimensionError(f"linear expects x[B,I], w[I,O], b[O]; got {x.shape}, {w.shape}, {b.shape}")
    if x.shape[1] != w.shape[0]:
        raise DimensionError(f"linear: x axis 1 ({x.shape[1]}) != w axis 0 ({w.shape[0]})")
    if w.shape[1] != b.shape[0]:
        raise DimensionError(f"linear: w axis 1 ({w.shape[1]}) != b axis 0 ({b.shape[0]})")
    return _result(x.data @ w.data + b.data, (x, w, b),
                   lambda g: (g @ w.data.T, x.data.T @ g, g.sum(axis=0)), "linear")


def conv_output_size(n, k, stride, pad):
    return (n + 2 * pad - k) // stride + 1


def _check_conv(x_shape, k_shape, stride, pad, name):
    if len(x_shape) != 4 or len(k_shape) != 4:
        raise DimensionError(f"{name} expects 4-D input and kernel, got {x_shape} and {k_shape}")
    if stride < 1 or pad < 0:
        raise DimensionError(f"{name}: stride must be >= 1 and pad >= 0 (got {stride}, {pad})")


def _pad(x, pad):
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _conv_forward(x, k, stride, pad):
    _, _, kh, kw = k.shape
    xp = _pad(x, pad)
    oh = conv_output_size(x.shape[2], kh, stride, pad)
    ow = conv_output_size(x.shape[3], kw, stride, pad)
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : (oh - 1) * stride + 1 : stride, : (ow - 1) * stride + 1 : stride]
    # win: [B, C, OH, OW, KH, KW]
    out = np.tensordot(win, k, axes=([1, 4, 5], [1, 2, 3]))  # [B, OH, OW, F]
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _conv_grad_input(gy, k, x_shape, stride, pad):
    b, c, h, w = x_shape
    _, _, kh, kw = k.shape
    oh, ow = gy.shape[2], gy.shape[3]
    gxp = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=gy.dtype)
    # [B, F, OH, OW] x [F, C, KH, KW] -> [B, C, KH, KW, OH, OW]
    cols = np.tensordot(gy, k, axes=([1], [0])).transpose(0, 3, 4, 5, 1, 2)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i : i + (oh - 1) * stride + 1 : stride,
                j : j + (ow - 1) * stride + 1 : stride] += cols[:, :, i, j]
    if pad:
        gxp = gxp[:, :, pad:-pad, pad:-pad]
    return np.ascontiguousarray(gxp)


def _conv_grad_kernel(gy, x, k_shape, stride, pad):
    _, _, kh, kw = k_shape
    oh, ow = gy.shape[2], gy.shape[3]
    xp = _pad(x, pad)
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : (oh - 1) * stride + 1 : stride, : (ow - 1) * stride + 1 : stride]
    return np.tensordot(gy, win, axes=([0, 2, 3], [0, 2, 3]))  # [F, C, KH, KW]


def conv2d(x, k, stride=1, pad=0):
    """2-D cross-correlation of ``x[B,C,H,W]`` with ``k[F,C,Kh,Kw]``."""
    x, k = as_tensor(x), as_tensor(k)
    _check_conv(x.shape, k.shape, stride, pad, "conv2d")
    if x.shape[1] != k.shape[1]:
        raise DimensionError(f"conv2d: input channels (axis 1 = {x.shape[1]}) != kernel channels (axis 1 = {k.shape[1]})")
    hp, wp = x.shape[2] + 2 * pad, x.shape[3] + 2 * pad
    if k.shape[2] > hp or k.shape[3] > wp:
        raise DimensionError(f"conv2d: kernel {k.shape[2]}x{k.shape[3]} larger than padded input {hp}x{wp}")
    out = _conv_forward(x.data, k.data, stride, pad)

    def grad_fn(g):
        gx = _conv_grad_input(g, k.data, x.shape, stride, pad) if x.requires_grad else None
        gk = _conv_grad_kernel(g, x.data, k.shape, stride, pad) if k.requires_grad else None
        return gx, gk

    return _result(out, (x, k), grad_fn, "conv2d")


def conv2d_transpose(x, k, stride=1, pad=0, out_hw=None):
    """Adjoint of :func:`conv2d` with the same kernel ``k[F,C,Kh,Kw]``.

    ``x`` has F channels and the result has C. The default spatial size is
    ``(H-1)*stride - 2*pad + K``; pass ``out_hw`` when the forward conv
    floored away rows.
    """
    x, k = as_tensor(x), as_tensor(k)
    _check_conv(x.shape, k.shape, stride, pad, "conv2d_transpose")
    if x.shape[1] != k.shape[0]:
        raise DimensionError(f"conv2d_transpose: input channels (axis 1 = {x.shape[1]}) != kernel filters (axis 0 = {k.shape[0]})")
    _, c, kh, kw = k.shape
    if out_hw is None:
        out_hw = ((x.shape[2] - 1) * stride - 2 * pad + kh, (x.shape[3] - 1) * stride - 2 * pad + kw)
    oh, ow = out_hw
    if oh < 1 or ow < 1 or kh > oh + 2 * pad or kw > ow + 2 * pad:
        raise DimensionError(f"conv2d_transpose: kernel {kh}x{kw} larger than padded output {oh + 2 * pad}x{ow + 2 * pad}")
    if (conv_output_size(oh, kh, stride, pad), conv_output_size(ow, kw, stride, pad)) != x.shape[2:]:
        raise DimensionError(f"conv2d_transpose: output {oh}x{ow} is not the preimage of input {x.shape[2]}x{x.shape[3]}")
    out_shape = (x.shape[0], c, oh, ow)
    out = _conv_grad_input(x.data, k.data, out_shape, stride, pad)

    def grad_fn(g):
        gx = _conv_forward(g, k.data, stride, pad) if x.requires_grad else None
        gk = _conv_grad_kernel(x.data, g, k.shape, stride, pad) if k.requires_grad else None
        return gx, gk

    return _result(out, (x, k), grad_fn, "conv2d_transpose")


def add_channel_bias(x, b):
    """Add a per-channel bias ``b[C]`` to ``x[B,C,H,W]``."""
    return add(x, reshape(as_tensor(b), (1, -1, 1, 1)))


# -- patches ---------------------------------------------------------------------
def patch_starts(h, w, size, stride):
    rows = (h - size) // stride + 1
    cols = (w - size) // stride + 1
    return [(r * stride, c * stride) for r in range(rows) for c in range(cols)]


def unfold_patches(x, size, stride):
    """Cut ``x[B,C,H,W]`` into patches ``[B*n,C,P,P]`` (image-major order)."""
    x = as_tensor(x)
    b, c, h, w = x.shape
    starts = patch_starts(h, w, size, stride)
    out = np.stack([x.data[:, :, r:r + size, q:q + size] for r, q in starts], axis=1)
    out = out.reshape(b * len(starts), c, size, size)

    def grad_fn(g):
        g = g.reshape(b, len(starts), c, size, size)
        gx = np.zeros_like(x.data)
        for n, (r, q) in enumerate(starts):
            gx[:, :, r:r + size, q:q + size] += g[:, n]
        return (gx,)

    return _result(out, (x,), grad_fn, "unfold_patches")


def fold_patches(p, height, width, stride):
    """Average overlapping patches ``[B*n,C,P,P]`` back into ``[B,C,H,W]``."""
    p = as_tensor(p)
    _, c, size, _ = p.shape
    starts = patch_starts(height, width, size, stride)
    n = len(starts)
    if p.shape[0] % n:
        raise DimensionError(f"fold_patches: {p.shape[0]} patches is not a multiple of {n} per image")
    b = p.shape[0] // n
    pd = p.data.reshape(b, n, c, size, size)
    acc = np.zeros((b, c, height, width), dtype=p.dtype)
    cnt = np.zeros((height, width), dtype=p.dtype)
    for k, (r, q) in enumerate(starts):
        acc[:, :, r:r + size, q:q + size] += pd[:, k]
        cnt[r:r + size, q:q + size] += 1
    out = acc / cnt

    def grad_fn(g):
        gs = g / cnt
        parts = [gs[:, :, r:r + size, q:q + size] for r, q in starts]
        return (np.stack(parts, axis=1).reshape(p.shape),)

    return _result(out, (p,), grad_fn, "fold_patches")


# -- gradient verification ---------------------------------------------------------
def _eval_scalar(f, x):
    out = f(x)
    out = as_tensor(out)
    if out.size != 1:
        raise ContractError(f"grad_check needs a scalar-valued function, got shape {out.shape}")
    return out


def grad_check_report(f, x, eps=1e-5, coords=None, pin_kinks=False):
    """Compare analytic and central-difference gradients of scalar ``f`` at ``x``.

    ``coords`` restricts the comparison to the given flat indices (all by
    default). With ``pin_kinks`` both probes reuse the relu / abs sign
    pattern of the unperturbed evaluation; ``"flipped"`` then counts the kink
    inputs that a plain probe would have pushed across zero. Returns a dict
    with the worst coordinate and its values.
    """
    old_flag = x.requires_grad
    x.requires_grad = True
    x.grad = None
    try:
        with record_kinks() if pin_kinks else contextlib.nullcontext() as tape:
            out = _eval_scalar(f, x)
        out.backward()
        analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()
        x.grad = None
        flat = x.data.reshape(-1)
        if coords is None:
            coords = range(flat.size)
        worst = {"max_rel_err": 0.0, "index": None, "analytic": 0.0, "numeric": 0.0, "flipped": 0}

        def probe():
            if not pin_kinks:
                return _eval_scalar(f, x).item()
            with replay_kinks(tape):
                v = _eval_scalar(f, x).item()
            if tape.pos != len(tape.masks):
                raise ContractError("kink replay diverged from the recorded computation")
            return v

        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            fp = probe()
            flat[i] = orig - eps
            fm = probe()
            flat[i] = orig
            num = (fp - fm) / (2 * eps)
            ana = analytic.reshape(-1)[i]
            err = abs(ana - num) / max(1.0, abs(ana), abs(num))
            if worst["index"] is None or err > worst["max_rel_err"]:
                worst.update(max_rel_err=float(err), index=np.unravel_index(i, x.shape),
                             analytic=float(ana), numeric=float(num))
        if pin_kinks:
            worst["flipped"] = tape.flipped
        x.grad = None
        return worst
    finally:
        x.requires_grad = old_flag


def grad_check(f, x, eps=1e-5, coords=None):
    """Max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|)."""
    return grad_check_report(f, x, eps, coords)["max_rel_err"]
