"""Alternating discriminator/generator training with in-batch hard-negative mining."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import ConfigError, StructuralError
from .imageproc import augment
from .model_io import save_weights
from .networks import (Discriminator, Generator, discriminator_forward, generator_forward,
                       generator_forward_patches)
from .objectives import (mine_batch_negatives, reconstruction_loss, total_discriminator_loss,
                         total_generator_loss)
from .params import NetworkParams, adam_step, sgd_step

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("step", "L_adv_D", "L_adv_G", "L_rec", "L_trip", "L_attr", "total_G", "total_D")


@dataclass
class TrainingData:
    photos: np.ndarray  # [N,1,H,W]
    sketches: np.ndarray
    identities: np.ndarray
    attributes: np.ndarray | None = None  # [N,A] of 0/1

    def __post_init__(self):
        self.identities = np.asarray(self.identities)
        if self.photos.shape != self.sketches.shape or self.photos.ndim != 4 or self.photos.shape[1] != 1:
            raise ValueError(f"photos {self.photos.shape} and sketches {self.sketches.shape} must both be [N,1,H,W]")
        if len(self.identities) != len(self.photos):
            raise ValueError("one identity label per pair is required")
        if self.attributes is not None and (self.attributes.size == 0 or self.attributes.shape[1] == 0):
            self.attributes = None

    def __len__(self):
        return len(self.photos)

    @property
    def n_attributes(self):
        return 0 if self.attributes is None else self.attributes.shape[1]


@dataclass
class Models:
    generator: Generator
    discriminator: Discriminator

    def params(self):
        """Both networks' tensors in one collection (``gen.*`` then ``disc.*``)."""
        merged = NetworkParams()
        for name, t in self.generator.params.items():
            merged[name] = t
        for name, t in self.discriminator.params.items():
            merged[name] = t
        return merged


def build_models(config, n_attributes=0):
    with T.precision(config.dtype):
        g = Generator.create(config.gen_channels, seed=config.seed, input_skip=config.input_skip)
        d = Discriminator.create(config.disc_channels, seed=config.seed + 1, feature_dim=config.feature_dim,
                                 n_attributes=n_attributes, input_size=config.image_size)
    return Models(g, d)


def models_from_params(params):
    """Rebuild both networks from an archive's tensors (architecture is read off the shapes)."""
    gen, disc = NetworkParams(), NetworkParams()
    for name, t in params.items():
        if name.startswith("gen."):
            gen[name] = t
        elif name.startswith("disc."):
            disc[name] = t
    try:
        depth = sum(1 for n in gen if n.startswith("gen.enc") and n.endswith(".w"))
        gch = tuple(gen[f"gen.enc{i}.w"].shape[0] for i in range(depth))
        input_skip = gen["gen.out.w"].shape[1] == gch[0] + 1
        ddepth = sum(1 for n in disc if n.startswith("disc.trunk") and n.endswith(".w"))
        dch = tuple(disc[f"disc.trunk{i}.w"].shape[0] for i in range(ddepth))
        flat, feature_dim = disc["disc.feature.w"].shape
        trunk = int(round(math.sqrt(flat // dch[-1])))
        n_attr = disc["disc.attr.w"].shape[1] if "disc.attr.w" in disc else 0
    except KeyError as exc:
        raise StructuralError(f"archive lacks tensor {exc}") from None
    g = Generator(gen, gch, input_skip)
    d = Discriminator(disc, dch, feature_dim, n_attr, trunk * 2 ** ddepth)
    return Models(g, d)


def synthesize(generator, photos, patch=None):
    """Generator output for ``photos`` ``[B,1,H,W]``; ``patch=(P, S)`` runs patch-wise."""
    if patch:
        return generator_forward_patches(generator, photos, *patch)
    return generator_forward(generator, photos)


def batch_schedule(n, batch_size, epochs, max_steps, seed):
    rng = np.random.default_rng(seed)
    batches = []
    for _ in range(max(epochs, 1) if max_steps else epochs):
        order = rng.permutation(n)
        batches.extend(order[i:i + batch_size] for i in range(0, n, batch_size))
    if max_steps:
        while len(batches) < max_steps:
            order = rng.permutation(n)
            batches.extend(order[i:i + batch_size] for i in range(0, n, batch_size))
        batches = batches[:max_steps]
    return batches


@dataclass
class TrainResult:
    models: Models
    metrics: list = field(default_factory=list)
    mining_calls: int = 0
    archives: list = field(default_factory=list)


def _optimizer_step(config, params, lr):
    if config.optimizer == "adam":
        adam_step(params, lr, config.beta1, config.beta2, config.adam_eps)
    else:
        sgd_step(params, lr)


def step_learning_rate(config, lr, step, total):
    """Learning rate for 1-based ``step``: linear warmup, then constant or cosine decay to zero."""
    scale = 1.0
    if config.warmup_steps and step <= config.warmup_steps:
        return lr * step / config.warmup_steps
    if config.lr_schedule == "cosine":
        span = max(total - config.warmup_steps, 1)
        scale = 0.5 * (1.0 + math.cos(math.pi * (step - config.warmup_steps - 1) / span))
    return lr * scale


def train(config, data, models=None, out_dir=None, lr_scale=1.0, step_offset=0):
    """Run the configured number of alternating D/G steps.

    Returns the trained models, one metrics row per step and the number of
    hard-negative mining calls. Archives go to ``out_dir`` when given.
    """
    weights = config.loss_weights
    batches = batch_schedule(len(data), config.batch_size, config.epochs, config.max_steps, config.seed)
    if weights.trip > 0:
        for b, idx in enumerate(batches):
            if len(set(data.identities[idx].tolist())) < 2:
                raise ConfigError(f"batch {b} holds fewer than two identities; triplet mining needs at least "
                                  "two (increase batch_size or set lambda_trip = 0)")
    dtype = np.dtype(config.dtype)
    if models is None:
        models = build_models(config, data.n_attributes)
        models.generator.set_output_level(float(data.sketches.mean()))
    g, d = models.generator, models.discriminator
    if data.photos.shape[2:] != (d.input_size, d.input_size):
        raise ConfigError(f"images are {data.photos.shape[2:]}, discriminator expects {d.input_size}")
    patch = (config.patch_size, config.patch_stride) if config.patch_mode else None
    lr = config.lr * lr_scale
    aug_rng = np.random.default_rng(config.seed + 7)
    result = TrainResult(models)
    out_dir = Path(out_dir) if out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    with T.precision(dtype):
        for step, idx in enumerate(batches, start=1):
            photos, sketches = data.photos[idx], data.sketches[idx]
            if config.augment:
                photos, sketches = _augment_pairs(photos, sketches, aug_rng)
            x = T.Tensor(photos.astype(dtype))
            y = T.Tensor(sketches.astype(dtype))
            ids = data.identities[idx]
            attrs = None if data.attributes is None else data.attributes[idx].astype(dtype)

            # discriminator step
            fake = synthesize(g, x, patch).detach()
            out_r = discriminator_forward(d, y)
            out_f = discriminator_forward(d, fake)
            negative = None
            if weights.trip > 0:
                neg = mine_batch_negatives(out_r.feature.data, ids.tolist())
                result.mining_calls += len(neg)
                negative = T.take_rows(out_r.feature, neg)
            loss_d = total_discriminator_loss(weights, out_r, out_f, negative, attrs)
            d.params.zero_grad()
            loss_d.total.backward()
            step_lr = step_learning_rate(config, lr, step, len(batches))
            _optimizer_step(config, d.params, step_lr)

            # generator step
            fake = synthesize(g, x, patch)
            out_f = None
            if weights.adv > 0 or (weights.attr > 0 and attrs is not None):
                out_f = discriminator_forward(d, fake)
            loss_g = total_generator_loss(weights, out_f, fake, y, attrs)
            rec_value = loss_g.terms.get("rec", reconstruction_loss(fake.detach(), y).item())
            g.params.zero_grad()
            loss_g.total.backward()
            _optimizer_step(config, g.params, step_lr)
            d.params.clear_grad()

            row = {
                "step": step + step_offset,
                "L_adv_D": loss_d.terms.get("adv_D", 0.0),
                "L_adv_G": loss_g.terms.get("adv_G", 0.0),
                "L_rec": rec_value,
                "L_trip": loss_d.terms.get("trip", 0.0),
                "L_attr": loss_d.terms.get("attr", 0.0),
                "total_G": loss_g.terms["total_G"],
                "total_D": loss_d.terms["total_D"],
            }
            result.metrics.append(row)
            if step % 20 == 0 or step == len(batches):
                log.info("step %d  rec=%.4f  G=%.4f  D=%.4f", row["step"], rec_value, row["total_G"], row["total_D"])
            if out_dir and config.save_every and step % config.save_every == 0:
                path = out_dir / f"model_step{row['step']:06d}.fsrw"
                save_weights(models.params(), path)
                result.archives.append(path)
    if out_dir:
        path = out_dir / "model.fsrw"
        save_weights(models.params(), path)
        result.archives.append(path)
        write_metrics_csv(out_dir / "metrics.csv", result.metrics)
    return result


def _augment_pairs(photos, sketches, rng):
    photos, sketches = photos.copy(), sketches.copy()
    for i in range(len(photos)):
        seed = int(rng.integers(2 ** 31))
        photos[i, 0] = augment(photos[i, 0], seed=seed)
        # sketches share the photo's transform so the pair stays aligned
        sketches[i, 0] = 1.0 - augment(1.0 - sketches[i, 0], seed=seed)
    return photos, sketches


def format_metric(v):
    return str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))


def write_metrics_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in rows:
            w.writerow([format_metric(row[c]) for c in METRIC_COLUMNS])
