"""Training losses and hard-negative mining."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, MiningError

UNIT_NORM_TOL = 1e-6


@dataclass
class LossWeights:
    adv: float = 1.0
    rec: float = 100.0
    trip: float = 1.0
    attr: float = 0.5
    margin: float = 0.5

    def __post_init__(self):
        lams = (self.adv, self.rec, self.trip, self.attr)
        if any(l < 0 for l in lams):
            raise ValueError(f"loss weights must be non-negative, got {lams}")
        if not any(l > 0 for l in lams):
            raise ValueError("at least one loss weight must be positive")
        if self.margin <= 0:
            raise ValueError(f"triplet margin must be positive, got {self.margin}")

    def scaled(self, factor):
        return LossWeights(self.adv * factor, self.rec * factor, self.trip * factor,
                           self.attr * factor, self.margin)


def adversarial_loss(patch_map, target_real):
    """Mean binary cross-entropy of every patch score against an all-real or all-fake target."""
    patch_map = T.as_tensor(patch_map)
    p = patch_map.data
    if np.any(p <= 0) or np.any(p >= 1):
        raise ContractError("patch scores must lie strictly inside (0, 1)")
    if target_real:
        return -T.mean(T.log(patch_map))
    return -T.mean(T.log(1.0 - patch_map))


def _softplus(z):
    return T.relu(z) + T.log(1.0 + T.exp(-T.tabs(z)))


def adversarial_loss_from_logits(logits, target_real):
    """Same value as :func:`adversarial_loss` on ``sigmoid(logits)``, without overflow."""
    logits = T.as_tensor(logits)
    # -log s(z) = softplus(-z);  -log(1 - s(z)) = softplus(z)
    return T.mean(_softplus(-logits if target_real else logits))


def _adv(out, target_real):
    if out.patch_logits is not None:
        return adversarial_loss_from_logits(out.patch_logits, target_real)
    return adversarial_loss(out.patch_map, target_real)


def reconstruction_loss(fake, truth):
    """Mean absolute pixel error."""
    fake, truth = T.as_tensor(fake), T.as_tensor(truth)
    if fake.shape != truth.shape:
        raise ContractError(f"shape mismatch {fake.shape} vs {truth.shape}")
    return T.mean(T.tabs(fake - truth))


def _check_unit(name, f):
    norms = np.sqrt((f.data * f.data).sum(axis=1))
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
        raise ContractError(f"{name} embeddings must be unit-norm (max deviation {np.abs(norms - 1).max():.2e})")


def triplet_loss(fa, fp, fn, margin):
    """Mean over rows of max(0, |fa-fp|^2 - |fa-fn|^2 + margin)."""
    fa, fp, fn = T.as_tensor(fa), T.as_tensor(fp), T.as_tensor(fn)
    if not (fa.shape == fp.shape == fn.shape) or fa.ndim != 2:
        raise ContractError(f"triplet slots need equal [B,D] shapes, got {fa.shape}, {fp.shape}, {fn.shape}")
    for name, f in (("anchor", fa), ("positive", fp), ("negative", fn)):
        _check_unit(name, f)
    d_pos = T.tsum((fa - fp) ** 2, axis=1)
    d_neg = T.tsum((fa - fn) ** 2, axis=1)
    return T.mean(T.relu(d_pos - d_neg + margin))


def squared_distances(query, rows):
    diff = np.asarray(rows) - np.asarray(query)[None, :]
    return (diff * diff).sum(axis=1)


def mine_hard_negative(anchor_truth, candidates, anchor_identity):
    """Index of the differing-identity candidate nearest (squared L2) to ``anchor_truth``.

    ``candidates`` is a sequence of ``(feature, identity)`` pairs. Ties go
    to the lowest index.
    """
    anchor_truth = np.asarray(getattr(anchor_truth, "data", anchor_truth), dtype=np.float64)
    best, best_d = None, np.inf
    for i, (feat, ident) in enumerate(candidates):
        if ident == anchor_identity:
            continue
        feat = np.asarray(getattr(feat, "data", feat), dtype=np.float64)
        d = float(((feat - anchor_truth) ** 2).sum())
        if d < best_d:
            best, best_d = i, d
    if best is None:
        raise MiningError(f"no candidate with identity other than {anchor_identity!r}; "
                          "batches need at least two identities")
    return best


def mine_batch_negatives(features, identities):
    """Hard negative row index for every row of a batch of ground-truth features."""
    feats = np.asarray(getattr(features, "data", features))
    cands = list(zip(feats, identities))
    return [mine_hard_negative(feats[i], cands, identities[i]) for i in range(len(identities))]


def attribute_loss(logits, attrs):
    """Mean per-attribute sigmoid cross-entropy, computed stably from logits."""
    logits = T.as_tensor(logits)
    a = np.asarray(getattr(attrs, "data", attrs), dtype=logits.dtype)
    if a.shape != logits.shape:
        raise ContractError(f"attribute targets {a.shape} do not match logits {logits.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise ContractError("attribute targets must be 0/1")
    # softplus(z) - a*z == -[a log s(z) + (1-a) log(1-s(z))]
    return T.mean(_softplus(logits) - logits * a)


@dataclass
class LossTerms:
    total: T.Tensor
    terms: dict  # name -> float


def total_generator_loss(weights, fake_out, fake, truth, attrs=None):
    """adv * adv(fake as real) + rec * L1(fake, truth) + attr * attr(fake).

    ``fake_out`` is the discriminator's output on ``fake`` (may be None when
    neither the adversarial nor the attribute term is active).
    """
    terms = {}
    total = T.Tensor(0.0)
    if weights.adv:
        l = _adv(fake_out, True)
        terms["adv_G"] = l.item()
        total = total + weights.adv * l
    if weights.rec:
        l = reconstruction_loss(fake, truth)
        terms["rec"] = l.item()
        total = total + weights.rec * l
    if weights.attr and attrs is not None and fake_out is not None and fake_out.attributes is not None:
        l = attribute_loss(fake_out.attributes, attrs)
        terms["attr_G"] = l.item()
        total = total + weights.attr * l
    terms["total_G"] = total.item()
    return LossTerms(total, terms)


def total_discriminator_loss(weights, real_out, fake_out, negative=None, attrs=None):
    """adv * (adv(real)+adv(fake))/2 + trip * triplet + attr * attr(real).

    The triplet uses the fake sketch's feature as anchor, the real sketch's
    feature as positive and ``negative`` (mined rows) as negative.
    """
    terms = {}
    total = T.Tensor(0.0)
    if weights.adv:
        l = (_adv(real_out, True) + _adv(fake_out, False)) * 0.5
        terms["adv_D"] = l.item()
        total = total + weights.adv * l
    if weights.trip and negative is not None:
        l = triplet_loss(fake_out.feature, real_out.feature, negative, weights.margin)
        terms["trip"] = l.item()
        total = total + weights.trip * l
    if weights.attr and attrs is not None and real_out.attributes is not None:
        l = attribute_loss(real_out.attributes, attrs)
        terms["attr"] = l.item()
        total = total + weights.attr * l
    terms["total_D"] = total.item()
    return LossTerms(total, terms)
