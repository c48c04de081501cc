"""Image preprocessing: grayscale, resize, patches, affine augmentation, PGM/PPM I/O.

Images are float numpy arrays in [0, 1], shaped ``(H, W)`` for one channel
or ``(H, W, 3)`` for colour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GeometryError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

AUGMENT_SCALE_RANGE = (0.9, 1.1)
AUGMENT_ROTATION_RANGE = (-10.0, 10.0)
AUGMENT_MAX_SHIFT = 0.05


def check_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] not in (1, 3)):
        raise GeometryError(f"expected an (H, W) or (H, W, 3) image, got shape {img.shape}")
    if img.size == 0:
        raise GeometryError("empty image")
    if not np.all(np.isfinite(img)) or img.min() < 0 or img.max() > 1:
        raise ValueError("pixel values must lie in [0, 1]")
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    return img


def to_grayscale(img):
    img = check_image(img)
    if img.ndim == 2:
        return img
    gray = img @ np.asarray(LUMA_WEIGHTS)
    return np.clip(gray, 0.0, 1.0)


def _bilinear_sample(img, ys, xs):
    """Sample a 2-D image at float coordinates; out-of-frame neighbours count as 0."""
    h, w = img.shape
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    fy = ys - y0
    fx = xs - x0
    out = np.zeros(ys.shape, dtype=np.float64)
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            yy, xx = y0 + dy, x0 + dx
            ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            vals = np.zeros(ys.shape)
            vals[ok] = img[yy[ok], xx[ok]]
            out += wy * wx * vals
    return out


def _per_channel(img, fn):
    if img.ndim == 2:
        return fn(img)
    return np.stack([fn(img[:, :, c]) for c in range(img.shape[2])], axis=2)


def resize(img, out_h, out_w):
    """Bilinear resize with half-pixel centre alignment (edges clamp)."""
    img = check_image(img)
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.minimum(np.floor(ys).astype(np.intp), h - 1)
    x0 = np.minimum(np.floor(xs).astype(np.intp), w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]

    def one(ch):
        top = ch[y0][:, x0] * (1 - fx) + ch[y0][:, x1] * fx
        bot = ch[y1][:, x0] * (1 - fx) + ch[y1][:, x1] * fx
        return np.clip(top * (1 - fy) + bot * fy, 0.0, 1.0)

    return _per_channel(img, one)


@dataclass
class PatchGrid:
    patch_size: int
    stride: int
    patches: np.ndarray  # (rows * cols, P, P), row-major over the grid
    rows: int
    cols: int
    height: int
    width: int


def check_patch_geometry(h, w, size, stride):
    if size < 1 or size > min(h, w):
        raise GeometryError(f"patch size {size} must lie in [1, {min(h, w)}] for a {h}x{w} image")
    if stride < 1 or stride > size:
        raise GeometryError(f"stride {stride} must lie in [1, {size}]")
    if (h - size) % stride or (w - size) % stride:
        raise GeometryError(
            f"({h}-{size}) and ({w}-{size}) must be divisible by stride {stride}; resize the image first")


def extract_patches(img, size, stride):
    img = check_image(img)
    if img.ndim != 2:
        raise GeometryError("extract_patches expects a single-channel image; convert to grayscale first")
    h, w = img.shape
    check_patch_geometry(h, w, size, stride)
    rows = (h - size) // stride + 1
    cols = (w - size) // stride + 1
    patches = np.stack([img[r * stride:r * stride + size, c * stride:c * stride + size]
                        for r in range(rows) for c in range(cols)])
    return PatchGrid(size, stride, patches, rows, cols, h, w)


def stitch_patches(grid):
    """Reassemble a grid; each pixel is the mean of every patch covering it."""
    p, s = grid.patch_size, grid.stride
    try:
        check_patch_geometry(grid.height, grid.width, p, s)
    except GeometryError as exc:
        raise GeometryError(f"inconsistent patch grid: {exc}") from None
    rows = (grid.height - p) // s + 1
    cols = (grid.width - p) // s + 1
    if (rows, cols) != (grid.rows, grid.cols) or grid.patches.shape != (rows * cols, p, p):
        raise GeometryError(
            f"inconsistent patch grid: expected {rows}x{cols} patches of {p}x{p}, "
            f"got rows={grid.rows}, cols={grid.cols}, patches {grid.patches.shape}")
    acc = np.zeros((grid.height, grid.width))
    cnt = np.zeros((grid.height, grid.width))
    for k, patch in enumerate(grid.patches):
        r, c = divmod(k, cols)
        acc[r * s:r * s + p, c * s:c * s + p] += patch
        cnt[r * s:r * s + p, c * s:c * s + p] += 1
    return acc / cnt


@dataclass(frozen=True)
class AffineTransform:
    scale: float = 1.0
    rotation_deg: float = 0.0
    tx: float = 0.0  # pixels
    ty: float = 0.0


def sample_affine(rng, height, width):
    return AffineTransform(
        scale=float(rng.uniform(*AUGMENT_SCALE_RANGE)),
        rotation_deg=float(rng.uniform(*AUGMENT_ROTATION_RANGE)),
        tx=float(rng.uniform(-AUGMENT_MAX_SHIFT, AUGMENT_MAX_SHIFT) * width),
        ty=float(rng.uniform(-AUGMENT_MAX_SHIFT, AUGMENT_MAX_SHIFT) * height),
    )


def augment(img, t=None, seed=None):
    """Apply an affine transform about the image centre by inverse mapping.

    With ``t=None`` the parameters are drawn from the default ranges using
    ``seed``. Positive rotation turns the content counter-clockwise as
    displayed (row 0 at the top). Samples falling outside the frame read 0.
    """
    img = check_image(img)
    if t is None:
        t = sample_affine(np.random.default_rng(seed), *img.shape[:2])
    if t.scale == 0:
        raise ValueError("affine scale must be non-zero")
    h, w = img.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    theta = math.radians(t.rotation_deg)
    cos, sin = math.cos(theta), math.sin(theta)
    if t.rotation_deg % 90 == 0:
        cos, sin = round(cos), round(sin)
    # output p = c + s*R(p_src - c) + shift, R rotating counter-clockwise on screen
    dy = yy - cy - t.ty
    dx = xx - cx - t.tx
    src_x = cx + (cos * dx - sin * dy) / t.scale
    src_y = cy + (sin * dx + cos * dy) / t.scale
    out = _per_channel(img, lambda ch: _bilinear_sample(ch, src_y, src_x))
    return np.clip(out, 0.0, 1.0)


# -- netpbm I/O -------------------------------------------------------------------
def _read_token(buf, pos):
    n = len(buf)
    while pos < n:
        ch = buf[pos:pos + 1]
        if ch == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    return buf[start:pos], pos


def read_netpbm(path):
    """Read an 8-bit binary PGM (P5) or PPM (P6), scaled to [0, 1]."""
    buf = Path(path).read_bytes()
    magic, pos = _read_token(buf, 0)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported netpbm magic {magic!r}")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        fields.append(int(tok))
    width, height, maxval = fields
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit netpbm files are supported (maxval={maxval})")
    pos += 1  # single whitespace after maxval
    channels = 3 if magic == b"P6" else 1
    count = width * height * channels
    raw = np.frombuffer(buf, dtype=np.uint8, count=count, offset=pos)
    img = raw.astype(np.float64) / maxval
    return img.reshape(height, width, channels) if channels == 3 else img.reshape(height, width)


def write_netpbm(path, img):
    img = check_image(img)
    data = np.rint(img * 255).astype(np.uint8)
    magic = b"P6" if img.ndim == 3 else b"P5"
    h, w = img.shape[:2]
    Path(path).write_bytes(magic + f"\n{w} {h}\n255\n".encode("ascii") + data.tobytes())


def load_gray(path, size=None):
    """Read an image, convert to grayscale and optionally resize to ``size`` x ``size``."""
    img = to_grayscale(read_netpbm(path))
    if size is not None:
        img = resize(img, size, size)
    return img
