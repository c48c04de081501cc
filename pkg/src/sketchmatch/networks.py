"""Generator, two-branch discriminator and feed-forward identity classifier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimensionError, GeometryError
from .params import NetworkParams, glorot_uniform, zeros

FULL_CHANNELS = (64, 128, 256, 512)
TINY_CHANNELS = (4, 8, 16, 32)
DISC_INPUT_SIZE = 128
FEATURE_DIM = 1024
LEAK = 0.2


def _conv_params(params, rng, name, c_in, c_out, k, transpose=False, dtype=None):
    fan_in, fan_out = c_in * k * k, c_out * k * k
    shape = (c_in, c_out, k, k) if transpose else (c_out, c_in, k, k)
    params[f"{name}.w"] = glorot_uniform(rng, shape, fan_in, fan_out, dtype)
    params[f"{name}.b"] = zeros((c_out,), dtype)


def _linear_params(params, rng, name, n_in, n_out, dtype=None):
    params[f"{name}.w"] = glorot_uniform(rng, (n_in, n_out), n_in, n_out, dtype)
    params[f"{name}.b"] = zeros((n_out,), dtype)


def _conv(params, name, x, stride, pad):
    y = T.conv2d(x, params[f"{name}.w"], stride, pad)
    return T.add_channel_bias(y, params[f"{name}.b"])


def _deconv(params, name, x, stride, pad):
    y = T.conv2d_transpose(x, params[f"{name}.w"], stride, pad)
    return T.add_channel_bias(y, params[f"{name}.b"])


# -- generator --------------------------------------------------------------------
@dataclass
class Generator:
    """U-Net style encoder/decoder.

    Each encoder level halves the resolution with a 4x4/stride-2 conv; the
    decoder mirrors it with transpose convs and concatenates the matching
    encoder map. With ``input_skip`` the photo itself is concatenated before
    a final 3x3 conv so fine detail need not pass through the bottleneck.
    """

    params: NetworkParams
    channels: tuple
    input_skip: bool = True

    @property
    def depth(self):
        return len(self.channels)

    @classmethod
    def create(cls, channels=FULL_CHANNELS, seed=0, input_skip=True, dtype=None):
        rng = np.random.default_rng(seed)
        channels = tuple(int(c) for c in channels)
        if not channels:
            raise ValueError("generator needs at least one level")
        p = NetworkParams()
        c_prev = 1
        for i, c in enumerate(channels):
            _conv_params(p, rng, f"gen.enc{i}", c_prev, c, 4, dtype=dtype)
            c_prev = c
        d = len(channels)
        for i in reversed(range(d)):
            c_in = channels[i] if i == d - 1 else 2 * channels[i]
            c_out = channels[i - 1] if i > 0 else channels[0]
            _conv_params(p, rng, f"gen.dec{i}", c_in, c_out, 4, transpose=True, dtype=dtype)
        _conv_params(p, rng, "gen.out", channels[0] + (1 if input_skip else 0), 1, 3, dtype=dtype)
        return cls(p, channels, input_skip)

    def set_output_level(self, level):
        """Set the output bias so a zero pre-activation maps to intensity ``level``.

        Starting at the mean target intensity spares the network from
        learning a global brightness shift, which otherwise tends to
        overshoot into tanh saturation early in training.
        """
        z = float(np.clip(2.0 * level - 1.0, -0.99, 0.99))
        b = self.params["gen.out.b"]
        b.data[...] = np.arctanh(z)


def generator_forward(g, photo):
    """Map photos ``[B,1,H,W]`` to sketches of the same shape with values in [0,1]."""
    photo = T.as_tensor(photo)
    if photo.ndim != 4 or photo.shape[1] != 1:
        raise DimensionError(f"generator expects [B,1,H,W], got {photo.shape}")
    h, w = photo.shape[2:]
    m = 2 ** g.depth
    if h % m or w % m:
        raise GeometryError(f"generator input {h}x{w} must be divisible by 2^{g.depth} = {m}")
    p = g.params
    skips = []
    photo = photo * 2.0 - 1.0  # work in [-1, 1] internally
    x = photo
    for i in range(g.depth):
        x = T.leaky_relu(_conv(p, f"gen.enc{i}", x, 2, 1), LEAK)
        skips.append(x)
    for i in reversed(range(g.depth)):
        if i < g.depth - 1:
            x = T.concat([x, skips[i]], axis=1)
        x = T.leaky_relu(_deconv(p, f"gen.dec{i}", x, 2, 1), LEAK)
    if g.input_skip:
        x = T.concat([x, photo], axis=1)
    y = T.tanh_act(_conv(p, "gen.out", x, 1, 1))
    return (y + 1.0) * 0.5


def generator_forward_patches(g, photo, patch_size, stride):
    """Run the generator per overlapping patch and average the patches back together."""
    photo = T.as_tensor(photo)
    h, w = photo.shape[2:]
    patches = T.unfold_patches(photo, patch_size, stride)
    return T.fold_patches(generator_forward(g, patches), h, w, stride)


# -- discriminator ------------------------------------------------------------------
@dataclass
class DiscriminatorOutput:
    patch_map: T.Tensor  # [B,1,7,7] in (0,1)
    feature: T.Tensor  # [B,feature_dim], unit rows
    attributes: T.Tensor | None = None  # [B,A] logits
    patch_logits: T.Tensor | None = None  # pre-sigmoid patch scores


@dataclass
class Discriminator:
    """Shared conv trunk with a real/fake patch head, an identity feature head
    and an optional attribute head."""

    params: NetworkParams
    channels: tuple
    feature_dim: int = FEATURE_DIM
    n_attributes: int = 0
    input_size: int = DISC_INPUT_SIZE

    @classmethod
    def create(cls, channels=FULL_CHANNELS, seed=0, feature_dim=FEATURE_DIM, n_attributes=0,
               input_size=DISC_INPUT_SIZE, dtype=None):
        channels = tuple(int(c) for c in channels)
        trunk = discriminator_trunk_size(input_size, len(channels))
        head = T.conv_output_size(trunk, 2, 1, 0)
        if input_size == DISC_INPUT_SIZE and len(channels) == 4:
            assert trunk == 8 and head == 7, (trunk, head)
        if head < 1:
            raise GeometryError(f"input size {input_size} leaves no room for the 2x2 head")
        rng = np.random.default_rng(seed)
        p = NetworkParams()
        c_prev = 1
        for i, c in enumerate(channels):
            _conv_params(p, rng, f"disc.trunk{i}", c_prev, c, 4, dtype=dtype)
            c_prev = c
        _conv_params(p, rng, "disc.head", c_prev, 1, 2, dtype=dtype)
        _linear_params(p, rng, "disc.feature", c_prev * trunk * trunk, feature_dim, dtype=dtype)
        if n_attributes:
            _linear_params(p, rng, "disc.attr", feature_dim, n_attributes, dtype=dtype)
        return cls(p, channels, feature_dim, n_attributes, input_size)

    @property
    def patch_map_size(self):
        return T.conv_output_size(discriminator_trunk_size(self.input_size, len(self.channels)), 2, 1, 0)


def discriminator_trunk_size(input_size, depth):
    s = input_size
    for _ in range(depth):
        s = T.conv_output_size(s, 4, 2, 1)
    return s


def discriminator_forward(d, sketch):
    sketch = T.as_tensor(sketch)
    if sketch.ndim != 4 or sketch.shape[1] != 1 or sketch.shape[2:] != (d.input_size, d.input_size):
        raise GeometryError(
            f"discriminator expects [B,1,{d.input_size},{d.input_size}], got {sketch.shape}")
    p = d.params
    x = sketch * 2.0 - 1.0
    for i in range(len(d.channels)):
        x = T.leaky_relu(_conv(p, f"disc.trunk{i}", x, 2, 1), LEAK)
    logits = _conv(p, "disc.head", x, 1, 0)
    patch_map = T.sigmoid(logits)
    feat = T.l2_normalize(T.linear(T.flatten(x), p["disc.feature.w"], p["disc.feature.b"]))
    attrs = None
    if d.n_attributes:
        attrs = T.linear(feat, p["disc.attr.w"], p["disc.attr.b"])
    return DiscriminatorOutput(patch_map, feat, attrs, logits)


# -- multilayer feed-forward classifier ---------------------------------------------------
@dataclass
class Mlff:
    params: NetworkParams
    layer_sizes: tuple  # (input, hidden..., classes)

    @classmethod
    def create(cls, n_inputs, n_classes, hidden=(64,), seed=0, dtype=None):
        if not hidden:
            raise ValueError("an MLFF needs at least one hidden layer")
        rng = np.random.default_rng(seed)
        sizes = (int(n_inputs), *(int(h) for h in hidden), int(n_classes))
        p = NetworkParams()
        for i in range(len(sizes) - 1):
            _linear_params(p, rng, f"mlff.layer{i}", sizes[i], sizes[i + 1], dtype=dtype)
        return cls(p, sizes)


def mlff_logits(m, features):
    x = T.as_tensor(features)
    if x.ndim != 2 or x.shape[1] != m.layer_sizes[0]:
        raise DimensionError(f"MLFF expects features of width {m.layer_sizes[0]}, got shape {x.shape}")
    n = len(m.layer_sizes) - 1
    for i in range(n):
        x = T.linear(x, m.params[f"mlff.layer{i}.w"], m.params[f"mlff.layer{i}.b"])
        if i < n - 1:
            x = T.tanh_act(x)
    return x


def mlff_classify(m, features):
    """Class probabilities, one softmax row per input."""
    return T.softmax(mlff_logits(m, features))
