"""Finite-difference gradient checks for every op and for the assembled model."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .config import RunConfig
from .networks import discriminator_forward, generator_forward
from .objectives import mine_batch_negatives, total_discriminator_loss, total_generator_loss
from .synthetic import make_pairs
from .training import build_models

DEFAULT_TOLERANCE = 1e-4
DEFAULT_EPS = 1e-5


@dataclass
class CheckRow:
    name: str
    shape: tuple
    max_rel_err: float
    index: tuple | None = None
    flipped: int = 0  # kink inputs a plain probe would have pushed across zero


@dataclass
class GradcheckReport:
    rows: list = field(default_factory=list)
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def max_rel_err(self):
        return max((r.max_rel_err for r in self.rows), default=0.0)

    @property
    def worst(self):
        return max(self.rows, key=lambda r: r.max_rel_err) if self.rows else None

    @property
    def passed(self):
        return bool(self.rows) and self.max_rel_err < self.tolerance

    @property
    def failures(self):
        return [r for r in self.rows if not r.max_rel_err < self.tolerance]

    def format(self):
        lines = [f"{r.name:32s} {str(r.shape):22s} {r.max_rel_err:.3e}"
                 + (f"  kink crossings pinned: {r.flipped}" if r.flipped else "") for r in self.rows]
        w = self.worst
        status = "PASS" if self.passed else "FAIL"
        lines.append(f"{status}: max rel err {self.max_rel_err:.3e} ({w.name if w else '-'}), "
                     f"tolerance {self.tolerance:g}")
        return "\n".join(lines)


def _weighted(out, weights):
    """Scalar probe sum(out * w) so every output element contributes."""
    return T.tsum(out * weights)


def _op_cases(rng):
    """(name, input array, f) triples covering each differentiable op on several shapes."""
    r = lambda *s: rng.standard_normal(s)  # noqa: E731
    pos = lambda *s: rng.uniform(0.5, 2.0, s)  # noqa: E731
    cases = []

    def away(*s):  # values kept clear of a kink at zero
        v = r(*s)
        return v + np.sign(v) * 0.5

    def add(name, x, fn):
        cases.append((name, x, fn))

    for s in [(3,), (2, 4), (2, 3, 4)]:
        other = r(*s)
        add("add", r(*s), lambda t, o=other: t + o)
        add("sub", r(*s), lambda t, o=other: o - t)
        add("mul", r(*s), lambda t, o=other: t * o)
        add("div", r(*s), lambda t, o=pos(*s): o / (t * t + 1.0))
        add("power", pos(*s), lambda t: t ** 3)
        add("exp", r(*s), T.exp)
        add("log", pos(*s), T.log)
        add("abs", away(*s), T.tabs)
        add("sum_axis0", r(*s), lambda t: T.tsum(t, axis=0))
        add("mean", r(*s), lambda t: T.mean(t, axis=-1, keepdims=True))
        add("reshape", r(*s), lambda t: T.reshape(t, (-1,)))
        add("sigmoid", r(*s) * 3, T.sigmoid)
        add("tanh", r(*s) * 2, T.tanh_act)
        add("leaky_relu", away(*s), T.leaky_relu)
        add("relu", away(*s), T.relu)
        add("getitem", r(*s), lambda t: t[..., :2])
    for b, i, o in [(1, 3, 2), (2, 4, 5), (3, 5, 1)]:
        w_, b_ = r(i, o), r(o)
        add("matmul", r(b, i), lambda t, w=w_: t @ w)
        add("matmul_rhs", r(i, o), lambda t, x=r(b, i): T.matmul(x, t))
        add("linear", r(b, i), lambda t, w=w_, bb=b_: T.linear(t, w, bb))
        add("linear_w", r(i, o), lambda t, x=r(b, i), bb=b_: T.linear(x, t, bb))
        add("linear_b", r(o), lambda t, x=r(b, i), w=w_: T.linear(x, w, t))
        add("take_rows", r(b + 1, i), lambda t, n=b: T.take_rows(t, [n, 0, n]))
        add("concat", r(b, i), lambda t, u=r(b, o): T.concat([u, t], axis=1))
        add("flatten", r(b, i, o), T.flatten)
        add("l2_normalize", r(b, i + 1), T.l2_normalize)
        add("softmax", r(b, i), T.softmax)
        add("log_softmax", r(b, i), T.log_softmax)
    conv_shapes = [((1, 1, 5, 5), (2, 1, 3, 3), 1, 0), ((2, 2, 6, 6), (3, 2, 4, 4), 2, 1),
                   ((1, 3, 7, 5), (2, 3, 2, 3), 1, 1)]
    for xs, ks, st, pd in conv_shapes:
        k_ = r(*ks)
        add("conv2d", r(*xs), lambda t, k=k_, s=st, p=pd: T.conv2d(t, k, s, p))
        add("conv2d_kernel", k_.copy(), lambda t, x=r(*xs), s=st, p=pd: T.conv2d(x, t, s, p))
        add("add_channel_bias", r(*xs), lambda t, bb=r(xs[1]): T.add_channel_bias(t, bb))
        add("add_channel_bias_b", r(xs[1]), lambda t, x=r(*xs): T.add_channel_bias(x, t))
    tconv_shapes = [((1, 2, 3, 3), (2, 1, 3, 3), 1, 0), ((2, 3, 4, 4), (3, 2, 4, 4), 2, 1),
                    ((1, 1, 2, 3), (1, 2, 2, 2), 2, 0)]
    for xs, ks, st, pd in tconv_shapes:
        k_ = r(*ks)
        add("conv2d_transpose", r(*xs), lambda t, k=k_, s=st, p=pd: T.conv2d_transpose(t, k, s, p))
        add("conv2d_transpose_kernel", k_.copy(),
            lambda t, x=r(*xs), s=st, p=pd: T.conv2d_transpose(x, t, s, p))
    for xs, size, st in [((1, 1, 4, 4), 2, 2), ((2, 1, 6, 6), 4, 2), ((1, 2, 5, 5), 3, 1)]:
        add("unfold_patches", r(*xs), lambda t, p=size, s=st: T.unfold_patches(t, p, s))
        n = ((xs[2] - size) // st + 1) * ((xs[3] - size) // st + 1)
        add("fold_patches", r(xs[0] * n, xs[1], size, size),
            lambda t, h=xs[2], w=xs[3], s=st: T.fold_patches(t, h, w, s))
    return cases


def check_ops(seed=0, eps=DEFAULT_EPS, tolerance=DEFAULT_TOLERANCE):
    """Gradient-check every differentiable op on several input shapes."""
    rng = np.random.default_rng(seed)
    report = GradcheckReport(tolerance=tolerance)
    with T.precision(np.float64):
        for name, x, fn in _op_cases(rng):
            probe = {}

            def f(t, fn=fn, probe=probe):
                out = T.as_tensor(fn(t))
                if "w" not in probe:
                    probe["w"] = rng.standard_normal(out.shape)
                return _weighted(out, probe["w"])

            xt = T.Tensor(np.asarray(x, dtype=np.float64))
            res = T.grad_check_report(f, xt, eps)
            report.rows.append(CheckRow(name, xt.shape, res["max_rel_err"], res["index"]))
    return report


def model_loss_fn(config=None, seed=0, batch=2, n_attributes=2):
    """Build tiny models plus a fixed batch; return (params, loss closure).

    The closure evaluates total_G + total_D with every loss term active and
    the hard negatives frozen at their initially mined rows, so the scalar is
    a smooth function of all weights.
    """
    config = config or RunConfig.tiny(seed=seed)
    photos, sketches, ids, attrs = make_pairs(batch, 1, size=config.image_size, seed=seed,
                                              n_attributes=n_attributes)
    with T.precision(np.float64):
        models = build_models(config.replace(precision="f64"), n_attributes)
    g, d = models.generator, models.discriminator
    weights = config.loss_weights
    x, y = T.Tensor(photos), T.Tensor(sketches)
    neg = mine_batch_negatives(discriminator_forward(d, y).feature.data, list(ids))
    attrs = attrs if n_attributes else None

    def loss():
        fake = generator_forward(g, x)
        out_r = discriminator_forward(d, y)
        out_f = discriminator_forward(d, fake)
        ld = total_discriminator_loss(weights, out_r, out_f, T.take_rows(out_r.feature, neg), attrs)
        lg = total_generator_loss(weights, out_f, fake, y, attrs)
        return ld.total + lg.total

    return models.params(), loss


def check_model(config=None, seed=0, coords_per_tensor=2, eps=DEFAULT_EPS, tolerance=DEFAULT_TOLERANCE):
    """Gradient-check every weight tensor of the tiny generator+discriminator+losses.

    Each tensor is probed at its largest-magnitude analytic coordinate plus
    ``coords_per_tensor`` random ones. A bias in an early layer shifts every
    downstream activation, so a +/-eps probe almost always moves some leaky
    relu input across zero, and the difference quotient then mixes two linear
    pieces. Probes therefore run with the activation pattern pinned to the
    unperturbed one, the piece whose derivative backprop computes.
    """
    rng = np.random.default_rng(seed)
    report = GradcheckReport(tolerance=tolerance)
    with T.precision(np.float64):
        params, loss = model_loss_fn(config, seed)
        params.zero_grad()
        loss().backward()
        analytic = {n: t.grad.copy() for n, t in params.items()}
        for name, t in params.items():
            params.clear_grad()
            flat = np.abs(analytic[name]).reshape(-1)
            coords = {int(np.argmax(flat))}
            coords.update(int(i) for i in rng.choice(flat.size, min(coords_per_tensor, flat.size), replace=False))
            res = T.grad_check_report(lambda _t: loss(), t, eps, sorted(coords), pin_kinks=True)
            report.rows.append(CheckRow(name, t.shape, res["max_rel_err"], res["index"], res["flipped"]))
        params.clear_grad()
    return report


def run_gradcheck(config=None, seed=0, eps=DEFAULT_EPS, tolerance=DEFAULT_TOLERANCE, coords_per_tensor=2):
    """Op-level and model-level checks combined into one report."""
    ops = check_ops(seed, eps, tolerance)
    model = check_model(config, seed, coords_per_tensor, eps, tolerance)
    return GradcheckReport(ops.rows + model.rows, tolerance)
