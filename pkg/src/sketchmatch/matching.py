"""Sketch-to-photo identification and CMC evaluation.

Gallery photos are pushed through the generator into the sketch domain and
embedded with the discriminator's feature branch; probe sketches are
embedded directly. Gallery entries are ranked by squared Euclidean distance.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .networks import discriminator_forward
from .training import synthesize


@dataclass
class MatchResult:
    probe_id: object
    ranked: list  # [(gallery identity, squared distance)], distance ascending
    true_rank: int | None = None  # 1-based rank of the probe's identity

    @property
    def distances(self):
        return [d for _, d in self.ranked]


@dataclass
class Gallery:
    identities: list
    embeddings: np.ndarray  # (G, D), unit rows


def embed_sketches(discriminator, sketches, batch_size=16):
    """Unit feature vectors for ``sketches`` ``[N,1,H,W]``."""
    sketches = np.asarray(sketches)
    out = []
    for i in range(0, len(sketches), batch_size):
        out.append(discriminator_forward(discriminator, T.Tensor(sketches[i:i + batch_size])).feature.data)
    return np.concatenate(out, axis=0)


def synthesize_batch(generator, photos, patch=None, batch_size=16):
    photos = np.asarray(photos)
    out = [synthesize(generator, T.Tensor(photos[i:i + batch_size]), patch).data
           for i in range(0, len(photos), batch_size)]
    return np.concatenate(out, axis=0)


def build_gallery(generator, discriminator, photos, identities, patch=None, batch_size=16):
    if len(photos) == 0:
        raise ValueError("gallery is empty")
    sketches = synthesize_batch(generator, photos, patch, batch_size)
    return Gallery(list(identities), embed_sketches(discriminator, sketches, batch_size))


def rank_gallery(gallery, probe_embedding, probe_id=None):
    """Rank every gallery entry for one probe; ties keep gallery order."""
    if len(gallery.identities) == 0:
        raise ValueError("gallery is empty")
    probe = np.asarray(probe_embedding, dtype=np.float64).reshape(-1)
    diff = gallery.embeddings - probe[None, :]
    dist = (diff * diff).sum(axis=1)
    order = np.argsort(dist, kind="stable")
    ranked = [(gallery.identities[i], float(dist[i])) for i in order]
    true_rank = None
    if probe_id is not None:
        for r, (ident, _) in enumerate(ranked, start=1):
            if ident == probe_id:
                true_rank = r
                break
    return MatchResult(probe_id, ranked, true_rank)


def match(generator, discriminator, probe_sketch, gallery_photos, gallery_ids, probe_id=None, patch=None):
    """Rank gallery identities for a single probe sketch ``[H,W]`` or ``[1,1,H,W]``."""
    gallery = build_gallery(generator, discriminator, gallery_photos, gallery_ids, patch)
    probe = np.asarray(probe_sketch).reshape(1, 1, *np.asarray(probe_sketch).shape[-2:])
    return rank_gallery(gallery, embed_sketches(discriminator, probe)[0], probe_id)


def identify(gallery, probe_embeddings, probe_ids=None):
    probe_ids = [None] * len(probe_embeddings) if probe_ids is None else list(probe_ids)
    return [rank_gallery(gallery, e, pid) for e, pid in zip(probe_embeddings, probe_ids)]


def cmc_curve(results, k_max=None):
    """accuracy@k for k = 1..k_max: share of probes whose identity is within the top k.

    Probes whose identity is absent from the gallery count as misses.
    """
    if not results:
        raise ValueError("no match results")
    g = len(results[0].ranked)
    k_max = min(10, g) if k_max is None else k_max
    ranks = np.array([r.true_rank if r.true_rank is not None else np.inf for r in results])
    return np.array([(ranks <= k).mean() for k in range(1, k_max + 1)])


def write_cmc_csv(path, curve):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "accuracy"])
        for k, acc in enumerate(curve, start=1):
            w.writerow([k, repr(float(acc))])


def write_match_csv(path, result):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "identity", "distance"])
        for r, (ident, dist) in enumerate(result.ranked, start=1):
            w.writerow([r, ident, repr(dist)])
