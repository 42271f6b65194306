"""Dataset manifests, stratified splitting, and offline augmentation.

A dataset lives in a directory tree with one subdirectory per class
label.  The manifest is the single source of truth for membership and
splits: a JSONL file with one record per image holding exactly the
fields path, label, split, provenance, augment_op.  Records are kept
sorted by (label, path) so repeated runs serialize byte-identically.

The held-out test split is drawn from original images only; offline
augmentation then grows the train/val pool to a per-class target using
the five lossless ops rot90, rot180, rot270, hflip, vflip.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AugmentationExhaustedError,
    EmptyClassError,
    InsufficientSamplesError,
    TargetBelowCurrentError,
    UnknownClassDirectoryError,
    UnknownLabelError,
)
from .raster import RasterImage, load_image, save_image

CLASS_LABELS: tuple[str, ...] = ("Benign", "EarlyPreB", "PreB", "ProB")

AUGMENT_OPS: tuple[str, ...] = ("rot90", "rot180", "rot270", "hflip", "vflip")

_IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png"}


@dataclass
class ManifestRecord:
    """One image in the dataset.

    path: file path relative to the dataset root, POSIX separators.
    label: one of CLASS_LABELS.
    split: "train", "val", "test", or None before splitting.
    provenance: "original" or "augmented".
    augment_op: the op that produced an augmented image, else None.
    """

    path: str
    label: str
    split: str | None = None
    provenance: str = "original"
    augment_op: str | None = None

    def __post_init__(self) -> None:
        if self.label not in CLASS_LABELS:
            raise UnknownLabelError(f"unknown class label: {self.label!r}")
        if self.split not in (None, "train", "val", "test"):
            raise ValueError(f"unknown split: {self.split!r}")
        if self.provenance not in ("original", "augmented"):
            raise ValueError(f"unknown provenance: {self.provenance!r}")
        if self.augment_op is not None and self.augment_op not in AUGMENT_OPS:
            raise ValueError(f"unknown augment op: {self.augment_op!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "path": self.path,
                "label": self.label,
                "split": self.split,
                "provenance": self.provenance,
                "augment_op": self.augment_op,
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "ManifestRecord":
        obj = json.loads(line)
        extra = set(obj) - {"path", "label", "split", "provenance", "augment_op"}
        if extra:
            raise ValueError(f"unexpected manifest fields: {sorted(extra)}")
        return cls(
            path=obj["path"],
            label=obj["label"],
            split=obj.get("split"),
            provenance=obj.get("provenance", "original"),
            augment_op=obj.get("augment_op"),
        )


@dataclass
class DatasetManifest:
    records: list[ManifestRecord]

    def __post_init__(self) -> None:
        self.records = sorted(self.records, key=lambda r: (r.label, r.path))

    def by_class(self, label: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.label == label]

    def counts(self) -> dict[str, dict[str, int]]:
        """Per-class record counts keyed by split name ("unsplit" for None)."""
        out: dict[str, dict[str, int]] = {label: {} for label in CLASS_LABELS}
        for r in self.records:
            key = r.split if r.split is not None else "unsplit"
            out[r.label][key] = out[r.label].get(key, 0) + 1
        return out

    def split_totals(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for r in self.records:
            key = r.split if r.split is not None else "unsplit"
            totals[key] = totals.get(key, 0) + 1
        return totals


def save_manifest(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    """Write one JSON record per line, trailing newline, UTF-8."""
    p = Path(path)
    with p.open("w", encoding="utf-8", newline="\n") as fh:
        for record in manifest.records:
            fh.write(record.to_json())
            fh.write("\n")


def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    p = Path(path)
    records = []
    with p.open("r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(ManifestRecord.from_json(line))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"malformed manifest line {i}: {exc}") from exc
    return DatasetManifest(records)


def build_manifest(root: str | os.PathLike) -> DatasetManifest:
    """Scan a class-per-directory tree into a manifest of originals.

    Only files with jpg/jpeg/png extensions directly inside a class
    directory are recorded.  A top-level directory outside the closed
    label set fails the scan; a label with no images fails too, so a
    typo'd or misplaced tree cannot silently produce a partial dataset.
    """
    rootp = Path(root)
    if not rootp.is_dir():
        raise FileNotFoundError(f"dataset root is not a directory: {rootp}")
    for entry in sorted(rootp.iterdir()):
        if entry.is_dir() and entry.name not in CLASS_LABELS:
            raise UnknownClassDirectoryError(f"unexpected directory in dataset root: {entry.name}")
    records = []
    for label in CLASS_LABELS:
        class_dir = rootp / label
        files = []
        if class_dir.is_dir():
            files = sorted(
                f for f in class_dir.iterdir()
                if f.is_file() and f.suffix.lower() in _IMAGE_SUFFIXES
            )
        if not files:
            raise EmptyClassError(f"class {label!r} has no images under {rootp}")
        for f in files:
            records.append(ManifestRecord(path=f"{label}/{f.name}", label=label))
    return DatasetManifest(records)


def stratified_split(
    manifest: DatasetManifest,
    test_per_class: int = 100,
    val_fraction: float = 0.1,
    seed: int = 0,
) -> DatasetManifest:
    """Assign train/val/test splits, drawing the test set from originals.

    Per class: exactly ``test_per_class`` original images are sampled
    for test; of the remainder, round(val_fraction * remaining) go to
    val and the rest to train.  Sampling uses one generator seeded with
    ``seed``, consumed in fixed label order, so the split is a pure
    function of (manifest, parameters).
    """
    if not (0.0 <= val_fraction < 1.0):
        raise ValueError(f"val_fraction must be in [0, 1), got {val_fraction}")
    rng = np.random.default_rng(seed)
    out: list[ManifestRecord] = []
    for label in CLASS_LABELS:
        class_records = [r for r in manifest.records if r.label == label]
        originals = [r for r in class_records if r.provenance == "original"]
        if len(originals) < test_per_class:
            raise InsufficientSamplesError(
                f"class {label!r} has {len(originals)} originals, "
                f"need at least {test_per_class} for the test split"
            )
        test_idx = set(rng.choice(len(originals), size=test_per_class, replace=False).tolist())
        rest = [i for i in range(len(originals)) if i not in test_idx]
        rest_pos = {orig: pos for pos, orig in enumerate(rest)}
        n_val = int(round(val_fraction * len(rest)))
        val_idx = set(rng.choice(len(rest), size=n_val, replace=False).tolist()) if n_val else set()
        for i, r in enumerate(originals):
            if i in test_idx:
                split = "test"
            else:
                split = "val" if rest_pos[i] in val_idx else "train"
            out.append(ManifestRecord(r.path, r.label, split, r.provenance, r.augment_op))
        for r in class_records:
            if r.provenance != "original":
                out.append(r)
    return DatasetManifest(out)


_OP_FUNCS = {
    "rot90": lambda px: np.rot90(px, k=1),
    "rot180": lambda px: np.rot90(px, k=2),
    "rot270": lambda px: np.rot90(px, k=3),
    "hflip": np.fliplr,
    "vflip": np.flipud,
}


def apply_augment_op(image: RasterImage, op: str) -> RasterImage:
    """Apply one lossless geometric op (rotations are counterclockwise)."""
    if op not in _OP_FUNCS:
        raise ValueError(f"unknown augment op: {op!r}")
    return RasterImage(np.ascontiguousarray(_OP_FUNCS[op](image.pixels)))


def augment_to_target(
    manifest: DatasetManifest,
    root: str | os.PathLike,
    target_per_class: int = 1800,
    seed: int = 0,
) -> DatasetManifest:
    """Grow each class's train+val pool to ``target_per_class`` records.

    Candidates are (source, op) pairs over the class's non-test
    originals and the five ops, drawn without replacement in a seeded
    random order.  Augmented files are written as PNG next to their
    source, named ``<stem>_<op>.png``, and the new records keep the
    class's observed val fraction: after augmentation the val count is
    round(observed_fraction * target).  New records fill val first (in
    draw order), then train.

    The test split is never used as an augmentation source and never
    grows.  Running twice with the same inputs rewrites identical
    files and returns an identical manifest.
    """
    rootp = Path(root)
    rng = np.random.default_rng(seed)
    out = list(manifest.records)
    for label in CLASS_LABELS:
        class_records = [r for r in manifest.records if r.label == label]
        pool = [
            r
            for r in class_records
            if r.split in ("train", "val") and r.provenance == "original"
        ]
        existing = [r for r in class_records if r.split in ("train", "val")]
        current = len(existing)
        if current > target_per_class:
            raise TargetBelowCurrentError(
                f"class {label!r} already has {current} train+val records, "
                f"target is {target_per_class}"
            )
        needed = target_per_class - current
        if needed == 0:
            continue
        candidates = [(r, op) for r in pool for op in AUGMENT_OPS]
        if len(candidates) < needed:
            raise AugmentationExhaustedError(
                f"class {label!r} needs {needed} augmented images but only "
                f"{len(candidates)} (source, op) pairs exist"
            )
        order = rng.permutation(len(candidates))[:needed]

        n_val = sum(1 for r in existing if r.split == "val")
        val_after = int(round((n_val / current) * target_per_class)) if current else 0
        new_val = min(max(val_after - n_val, 0), needed)

        for rank, ci in enumerate(order):
            src, op = candidates[int(ci)]
            src_path = rootp / src.path
            image = load_image(src_path)
            aug = apply_augment_op(image, op)
            rel = f"{label}/{Path(src.path).stem}_{op}.png"
            save_image(aug, rootp / rel)
            split = "val" if rank < new_val else "train"
            out.append(
                ManifestRecord(rel, label, split, provenance="augmented", augment_op=op)
            )
    return DatasetManifest(out)
