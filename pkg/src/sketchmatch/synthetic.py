"""Procedural photo/sketch face pairs for tests and demos.

Each identity draws its own facial geometry (face outline, eye spacing and
size, brows, nose, mouth, hairline); variants of one identity jitter the
position and lighting slightly. Photos are shaded renderings, sketches are
line drawings of the same geometry on a white ground.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imageproc import write_netpbm

# off-white ground keeps targets inside the generator's unsaturated output range
PAPER_TONE = 0.92


@dataclass
class FaceGeometry:
    face_rx: float
    face_ry: float
    eye_dx: float
    eye_y: float
    eye_r: float
    brow_lift: float
    nose_len: float
    mouth_y: float
    mouth_w: float
    hair_y: float
    skin: float
    n_attributes: int = 0
    attributes: tuple = ()


def identity_geometry(seed, n_attributes=0):
    rng = np.random.default_rng(seed)
    attrs = tuple(int(b) for b in rng.integers(0, 2, size=n_attributes))
    return FaceGeometry(
        face_rx=rng.uniform(0.52, 0.72),
        face_ry=rng.uniform(0.68, 0.86),
        eye_dx=rng.uniform(0.18, 0.34),
        eye_y=rng.uniform(-0.25, -0.05),
        eye_r=rng.uniform(0.05, 0.11),
        brow_lift=rng.uniform(0.08, 0.2),
        nose_len=rng.uniform(0.12, 0.3),
        mouth_y=rng.uniform(0.3, 0.5),
        mouth_w=rng.uniform(0.12, 0.3),
        hair_y=rng.uniform(-0.75, -0.45),
        skin=rng.uniform(0.55, 0.8),
        n_attributes=n_attributes,
        attributes=attrs,
    )


def _soft(d, width):
    """Smooth step: ~1 where d < 0, ~0 where d > 0."""
    return 1.0 / (1.0 + np.exp(np.clip(d / width, -50, 50)))


def render_pair(geom, size=128, shift=(0.0, 0.0), light=0.0):
    """Return ``(photo, sketch)`` as float arrays in [0, 1]."""
    lin = (np.arange(size) + 0.5) / size * 2 - 1
    yy, xx = np.meshgrid(lin, lin, indexing="ij")
    yy = yy - shift[0]
    xx = xx - shift[1]
    w = 2.0 / size  # about one pixel of softness

    face_d = np.sqrt((xx / geom.face_rx) ** 2 + (yy / geom.face_ry) ** 2) - 1
    face = _soft(face_d, w * 1.5)
    hair = face * _soft(yy - geom.hair_y, w * 2) + _soft(yy - geom.hair_y + 0.15, w * 2) * _soft(face_d - 0.12, w * 2)
    hair = np.clip(hair, 0, 1)

    eyes = np.zeros_like(xx)
    brows = np.zeros_like(xx)
    for sx in (-1, 1):
        ed = np.sqrt((xx - sx * geom.eye_dx) ** 2 + (yy - geom.eye_y) ** 2) - geom.eye_r
        eyes = np.maximum(eyes, _soft(ed, w))
        by = geom.eye_y - geom.eye_r - geom.brow_lift * 0.5
        bd = np.maximum(np.abs(xx - sx * geom.eye_dx) - geom.eye_r * 1.3, np.abs(yy - by) - 0.02)
        brows = np.maximum(brows, _soft(bd, w))
    nose_d = np.maximum(np.abs(xx) - 0.025, np.abs(yy - (geom.eye_y + geom.nose_len / 2 + 0.05)) - geom.nose_len / 2)
    nose = _soft(nose_d, w)
    mouth_d = np.maximum(np.abs(xx) - geom.mouth_w, np.abs(yy - geom.mouth_y) - 0.03)
    mouth = _soft(mouth_d, w)

    shading = 0.12 * (xx * 0.6 - yy * 0.4) + light
    photo = 0.12 + face * (geom.skin - 0.12 + shading)
    photo = photo * (1 - hair) + 0.22 * hair
    photo = photo * (1 - nose * 0.35)
    photo = photo * (1 - eyes) + 0.05 * eyes
    photo = photo * (1 - brows) + 0.08 * brows
    photo = photo * (1 - mouth) + 0.3 * mouth

    outline = _soft(np.abs(face_d) - 0.012, w)
    sketch = np.full_like(xx, PAPER_TONE)
    sketch = sketch * (1 - 0.35 * hair)
    sketch = sketch * (1 - 0.8 * outline)
    sketch = sketch * (1 - 0.5 * nose)
    sketch = sketch * (1 - 0.85 * eyes)
    sketch = sketch * (1 - 0.9 * brows)
    sketch = sketch * (1 - 0.75 * mouth)
    return np.clip(photo, 0, 1), np.clip(sketch, 0, 1)


def make_pairs(n_identities, pairs_per_identity=1, size=128, seed=0, n_attributes=0, jitter=True):
    """Synthetic dataset arrays.

    Returns ``photos`` and ``sketches`` shaped ``[N,1,size,size]``, integer
    identity labels and an ``[N, n_attributes]`` 0/1 array.
    """
    rng = np.random.default_rng(seed)
    id_seeds = rng.integers(0, 2 ** 31, size=n_identities)
    photos, sketches, ids, attrs = [], [], [], []
    for i, s in enumerate(id_seeds):
        geom = identity_geometry(int(s), n_attributes)
        for k in range(pairs_per_identity):
            if jitter and k > 0:
                shift = tuple(rng.uniform(-0.04, 0.04, size=2))
                light = float(rng.uniform(-0.05, 0.05))
            else:
                shift, light = (0.0, 0.0), 0.0
            p, sk = render_pair(geom, size, shift, light)
            photos.append(p)
            sketches.append(sk)
            ids.append(i)
            attrs.append(geom.attributes)
    photos = np.stack(photos)[:, None]
    sketches = np.stack(sketches)[:, None]
    return photos, sketches, np.asarray(ids), np.asarray(attrs, dtype=np.float64).reshape(len(ids), n_attributes)


def write_dataset(root, n_identities, pairs_per_identity=2, size=128, seed=0, n_attributes=0):
    """Write a dataset tree in the layout ``ingest`` expects."""
    root = Path(root)
    (root / "photos").mkdir(parents=True, exist_ok=True)
    (root / "sketches").mkdir(parents=True, exist_ok=True)
    photos, sketches, ids, attrs = make_pairs(n_identities, pairs_per_identity, size, seed, n_attributes)
    counters = {}
    for p, s, i in zip(photos, sketches, ids):
        k = counters.get(int(i), 0)
        counters[int(i)] = k + 1
        stem = f"id{int(i):03d}_{k}"
        write_netpbm(root / "photos" / f"{stem}.pgm", p[0])
        write_netpbm(root / "sketches" / f"{stem}.pgm", s[0])
    if n_attributes:
        lines = ["identity," + ",".join(f"attr{j}" for j in range(n_attributes))]
        seen = set()
        for i, a in zip(ids, attrs):
            if int(i) in seen:
                continue
            seen.add(int(i))
            lines.append(f"id{int(i):03d}," + ",".join(str(int(v)) for v in a))
        (root / "attributes.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root
