"""Command line entry point: ``sketchmatch <command> ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import tensor as T
from .config import RunConfig, load_config
from .data import ingest, load_arrays, write_index_csv
from .diagnostics import run_gradcheck
from .errors import SketchMatchError
from .featsel import (FeatureTable, cfs_search, feature_scores, filter_top_n, pca_fit, pca_project,
                      read_feature_csv, write_feature_csv)
from .imageproc import load_gray, write_netpbm
from .matching import (build_gallery, cmc_curve, embed_sketches, identify, rank_gallery, write_cmc_csv,
                       write_match_csv)
from .model_io import FreezePlan, apply_transfer, load_weights
from .synthetic import write_dataset
from .training import TrainingData, build_models, models_from_params, synthesize, train, write_metrics_csv

log = logging.getLogger("sketchmatch")

DEFAULT_FREEZE = ("gen.enc", "disc.trunk")


def _load_models(path):
    return models_from_params(load_weights(path))


def _patch_arg(args):
    return tuple(args.patch) if args.patch else None


def _training_data(index, records, size):
    photos, sketches = load_arrays(records, size)
    attrs = None
    if index.attribute_names:
        attrs = np.array([r.attributes for r in records], dtype=np.float64)
    return TrainingData(photos, sketches, np.array([r.identity for r in records]), attrs)


def cmd_demo_data(args):
    write_dataset(args.root, args.identities, args.pairs, args.size, args.seed, args.attributes)
    print(f"wrote {args.identities * args.pairs} pairs under {args.root}")


def cmd_ingest(args):
    index = ingest(args.root, holdout=args.holdout)
    if args.out:
        write_index_csv(args.out, index)
    n_probe = sum(r.split == "probe" for r in index.records)
    print(f"{len(index.records)} records, {len(index.identities)} identities, {n_probe} held-out probes")


def cmd_train(args):
    config = load_config(args.config)
    index = ingest(args.root, holdout=config.holdout)
    data = _training_data(index, index.train_records(), config.image_size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config.to_text(), encoding="utf-8")
    models = None
    if args.init_from:
        models = build_models(config, data.n_attributes)
        prefixes = [p for p in (args.freeze or ",".join(DEFAULT_FREEZE)).split(",") if p]
        report = apply_transfer(models.params(), args.init_from, FreezePlan.freezing(prefixes))
        print("transfer:", report.summary())
        stage1 = train(config, data, models, out if args.single_stage else None)
        metrics = stage1.metrics
        if not args.single_stage:
            FreezePlan().apply(models.params())
            stage2 = train(config, data, models, out, lr_scale=0.1, step_offset=len(metrics))
            metrics = metrics + stage2.metrics
        write_metrics_csv(out / "metrics.csv", metrics)
    else:
        if args.freeze:
            log.warning("--freeze has no effect without --init-from")
        metrics = train(config, data, None, out).metrics
    last = metrics[-1] if metrics else None
    if last:
        print(f"{len(metrics)} steps; final L_rec {last['L_rec']:.5f}, total_G {last['total_G']:.5f}, "
              f"total_D {last['total_D']:.5f}")
    print(f"saved {out / 'model.fsrw'}")


def cmd_synthesize(args):
    models = _load_models(args.archive)
    photo = load_gray(args.photo, args.size)
    with T.precision(models.generator.params["gen.out.w"].dtype):
        out = synthesize(models.generator, T.Tensor(photo[None, None]), _patch_arg(args)).data[0, 0]
    write_netpbm(args.out, out)
    print(f"wrote {args.out} ({out.shape[0]}x{out.shape[1]})")


def _gallery(models, index, patch):
    recs = index.gallery_records()
    photos, _ = load_arrays(recs, models.discriminator.input_size)
    return build_gallery(models.generator, models.discriminator, photos, [r.identity for r in recs], patch)


def cmd_embed(args):
    models = _load_models(args.archive)
    index = ingest(args.root)
    _, sketches = load_arrays(index.records, models.discriminator.input_size)
    emb = embed_sketches(models.discriminator, sketches)
    write_feature_csv(args.out, FeatureTable(emb, [r.identity for r in index.records]))
    print(f"wrote {len(emb)} embeddings of width {emb.shape[1]} to {args.out}")


def cmd_match(args):
    models = _load_models(args.archive)
    index = ingest(args.root)
    gallery = _gallery(models, index, _patch_arg(args))
    probe = load_gray(args.probe, models.discriminator.input_size)
    result = rank_gallery(gallery, embed_sketches(models.discriminator, probe[None, None])[0], args.identity)
    if args.out:
        write_match_csv(args.out, result)
    for r, (ident, dist) in enumerate(result.ranked[: args.top], start=1):
        print(f"{r:3d}  {ident}  {dist:.6f}")


def cmd_eval(args):
    models = _load_models(args.archive)
    index = ingest(args.root, holdout=args.holdout)
    gallery = _gallery(models, index, _patch_arg(args))
    probes = index.probe_records()
    _, sketches = load_arrays(probes, models.discriminator.input_size)
    results = identify(gallery, embed_sketches(models.discriminator, sketches), [r.identity for r in probes])
    curve = cmc_curve(results, args.k)
    if args.out:
        write_cmc_csv(args.out, curve)
    for k, acc in enumerate(curve, start=1):
        print(f"rank-{k}: {acc:.4f}")


def cmd_features(args):
    table = read_feature_csv(args.csv)
    names = table.names or [f"f{i}" for i in range(table.n_features)]
    if args.method == "pca":
        model = pca_fit(table, args.k)
        proj = pca_project(model, table.rows)
        out = FeatureTable(proj, table.labels, [f"pc{i}" for i in range(args.k)])
        print("explained variance:", " ".join(f"{v:.6g}" for v in model.explained_variance))
    elif args.method == "ig":
        scores = feature_scores(table, "information_gain", args.bins)
        for name, s in zip(names, scores):
            print(f"{name}\t{s:.6f}")
        return
    else:
        if args.method == "cfs":
            keep = cfs_search(table, args.strategy, args.stall_limit)
        else:
            keep = filter_top_n(table, args.scorer, args.n, args.bins)
        print("selected:", " ".join(names[i] for i in keep))
        out = FeatureTable(table.rows[:, keep], table.labels, [names[i] for i in keep])
    if args.out:
        write_feature_csv(args.out, out)


def cmd_gradcheck(args):
    config = load_config(args.config) if args.config else RunConfig.tiny()
    config = config.replace(precision="f64")
    if args.inject_fault:
        with T.inject_backward_fault(args.inject_fault):
            report = run_gradcheck(config, args.seed, coords_per_tensor=args.coords)
    else:
        report = run_gradcheck(config, args.seed, coords_per_tensor=args.coords)
    print(report.format())
    return 0 if report.passed else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="sketchmatch", description="Face sketch synthesis and recognition.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo-data", help="write a procedurally generated photo/sketch dataset")
    p.add_argument("root")
    p.add_argument("--identities", type=int, default=5)
    p.add_argument("--pairs", type=int, default=2, help="pairs per identity")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attributes", type=int, default=0, help="number of binary attributes")
    p.set_defaults(func=cmd_demo_data)

    p = sub.add_parser("ingest", help="validate a dataset tree and list its records")
    p.add_argument("root")
    p.add_argument("--holdout", action="store_true", help="reserve the last pair of each identity as a probe")
    p.add_argument("--out", help="write the index as CSV")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train the generator and discriminator")
    p.add_argument("root")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--out", required=True, help="output directory for archives and metrics.csv")
    p.add_argument("--init-from", help="FSRW archive to transfer weights from")
    p.add_argument("--freeze", help="comma-separated name prefixes frozen during the first stage "
                   f"(default {','.join(DEFAULT_FREEZE)})")
    p.add_argument("--single-stage", action="store_true",
                   help="skip the unfrozen fine-tuning stage at 0.1x learning rate")
    p.set_defaults(func=cmd_train)

    def add_patch(p):
        p.add_argument("--patch", nargs=2, type=int, metavar=("SIZE", "STRIDE"),
                       help="run the generator patch-wise")

    p = sub.add_parser("synthesize", help="turn a photo into a sketch")
    p.add_argument("archive")
    p.add_argument("photo")
    p.add_argument("out", help="output PGM path")
    p.add_argument("--size", type=int, help="resize the photo to SIZE x SIZE first")
    add_patch(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("embed", help="write sketch embeddings as a label-first CSV")
    p.add_argument("archive")
    p.add_argument("root")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("match", help="rank gallery identities for one probe sketch")
    p.add_argument("archive")
    p.add_argument("probe")
    p.add_argument("root", help="dataset whose first photo per identity forms the gallery")
    p.add_argument("--identity", help="true identity of the probe, to report its rank")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out", help="write the full ranking as CSV")
    add_patch(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", help="CMC curve over the dataset's probe sketches")
    p.add_argument("archive")
    p.add_argument("root")
    p.add_argument("--holdout", action="store_true")
    p.add_argument("--k", type=int, default=None, help="largest rank (default min(10, gallery size))")
    p.add_argument("--out", help="CMC CSV path")
    add_patch(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("features", help="feature analysis over an embedding CSV")
    p.add_argument("method", choices=["pca", "ig", "cfs", "topn"])
    p.add_argument("csv")
    p.add_argument("--out")
    p.add_argument("--k", type=int, default=2, help="principal components to keep")
    p.add_argument("--n", type=int, default=10, help="features kept by topn")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--scorer", choices=["information_gain", "abs_correlation"], default="information_gain")
    p.add_argument("--strategy", choices=["best_first", "forward", "backward"], default="best_first")
    p.add_argument("--stall-limit", type=int, default=5)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op and the tiny model")
    p.add_argument("--config", help="config file (channel widths etc.)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coords", type=int, default=2, help="random coordinates per weight tensor")
    p.add_argument("--inject-fault", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args) or 0
    except (SketchMatchError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
