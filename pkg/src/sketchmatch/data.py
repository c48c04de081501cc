"""Dataset ingestion.

Expected layout::

    root/photos/<id>_<k>.pgm|ppm
    root/sketches/<id>_<k>.pgm
    root/attributes.csv        (optional: identity, then 0/1 columns)
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IngestionError
from .imageproc import load_gray

PHOTO_EXTS = (".pgm", ".ppm")
SKETCH_EXTS = (".pgm",)


@dataclass
class Record:
    identity: str
    stem: str
    photo: Path
    sketch: Path
    attributes: tuple | None = None
    split: str = "train"


@dataclass
class DatasetIndex:
    root: Path
    records: list
    attribute_names: list = field(default_factory=list)

    @property
    def identities(self):
        return sorted({r.identity for r in self.records})

    def train_records(self):
        return [r for r in self.records if r.split == "train"]

    def probe_records(self):
        held = [r for r in self.records if r.split == "probe"]
        return held or list(self.records)

    def gallery_records(self):
        """First record of every identity (its photo enrolls the identity)."""
        seen, out = set(), []
        for r in self.records:
            if r.identity not in seen:
                seen.add(r.identity)
                out.append(r)
        return out


def _split_stem(stem, path):
    ident, sep, k = stem.rpartition("_")
    if not sep or not ident or not k:
        raise IngestionError(f"{path}: file stem must look like <id>_<k>")
    return ident


def _scan(folder, exts, kind):
    if not folder.is_dir():
        raise IngestionError(f"missing {kind} directory {folder}")
    found = {}
    for path in sorted(folder.iterdir()):
        if path.suffix.lower() not in exts:
            continue
        if path.stem in found:
            raise IngestionError(f"duplicate {kind} stem {path.stem!r}: {found[path.stem].name} and {path.name}")
        found[path.stem] = path
    return found


def _read_attributes(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0][0] != "identity":
        raise IngestionError(f"{path}: header must start with 'identity'")
    names = rows[0][1:]
    table = {}
    for r in rows[1:]:
        if len(r) != len(names) + 1:
            raise IngestionError(f"{path}: row for {r[0]!r} has {len(r) - 1} values, expected {len(names)}")
        bits = tuple(int(v) for v in r[1:])
        if any(b not in (0, 1) for b in bits):
            raise IngestionError(f"{path}: attribute values must be 0 or 1 (identity {r[0]!r})")
        table[r[0]] = bits
    return names, table


def ingest(root, holdout=False):
    """Build a validated, lexicographically ordered index of photo/sketch pairs.

    With ``holdout`` the last pair of every identity that has at least two
    pairs is reserved as a probe and excluded from training.
    """
    root = Path(root)
    photos = _scan(root / "photos", PHOTO_EXTS, "photo")
    sketches = _scan(root / "sketches", SKETCH_EXTS, "sketch")
    for stem in sorted(set(photos) - set(sketches)):
        raise IngestionError(f"photo {photos[stem].name} has no sketch with stem {stem!r}")
    for stem in sorted(set(sketches) - set(photos)):
        raise IngestionError(f"sketch {sketches[stem].name} has no photo with stem {stem!r}")
    attr_names, attr_table = [], {}
    attr_path = root / "attributes.csv"
    if attr_path.exists():
        attr_names, attr_table = _read_attributes(attr_path)
    records = []
    for stem in sorted(photos, key=lambda s: str(photos[s])):
        ident = _split_stem(stem, photos[stem])
        attrs = None
        if attr_names:
            if ident not in attr_table:
                raise IngestionError(f"attributes.csv has no row for identity {ident!r}")
            attrs = attr_table[ident]
        records.append(Record(ident, stem, photos[stem], sketches[stem], attrs))
    if not records:
        raise IngestionError(f"no photo/sketch pairs under {root}")
    if holdout:
        by_id = {}
        for r in records:
            by_id.setdefault(r.identity, []).append(r)
        for recs in by_id.values():
            if len(recs) >= 2:
                recs[-1].split = "probe"
    return DatasetIndex(root, records, attr_names)


def load_arrays(records, size):
    """Stack records into ``[N,1,size,size]`` photo and sketch arrays."""
    photos = np.stack([load_gray(r.photo, size) for r in records])[:, None]
    sketches = np.stack([load_gray(r.sketch, size) for r in records])[:, None]
    return photos, sketches


def write_index_csv(path, index):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["identity", "stem", "photo", "sketch", "split", *index.attribute_names])
        for r in index.records:
            w.writerow([r.identity, r.stem, r.photo.relative_to(index.root).as_posix(),
                        r.sketch.relative_to(index.root).as_posix(), r.split, *(r.attributes or ())])
