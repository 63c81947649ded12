"""Synthetic multi-source scene generator and the dataset manifest.

Stands in for non-redistributable airborne products: a striped scene where
every class carries a distinct smooth spectral curve in the HSI cube and a
distinct oriented ramp in the aux (elevation/backscatter style) cube, plus
i.i.d. Gaussian noise. Fully determined by the seed, down to the bytes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ..numerics import ConfigError
from . import tensorfile


class SplitError(ValueError):
    """Requested train/test split cannot be carved from the scene."""


@dataclass
class Manifest:
    path: str
    hsi: np.ndarray  # (H, W, bands) float32
    aux: np.ndarray  # (H, W, aux_channels) float32
    labels: np.ndarray  # (H, W) uint16, 0 = unlabeled
    class_names: list
    train_indices: np.ndarray  # flat row-major pixel indices
    test_indices: np.ndarray

    @property
    def shape(self):
        return self.labels.shape

    @property
    def classes(self) -> int:
        return len(self.class_names)


def _smooth_curve(rng: np.random.Generator, bands: int) -> np.ndarray:
    raw = rng.standard_normal(bands + 12)
    kernel = np.ones(7) / 7.0
    for _ in range(3):
        raw = np.convolve(raw, kernel, mode="same")
    curve = raw[6 : 6 + bands]
    return curve / max(curve.std(), 1e-6)


def _per_class_counts(total: int, classes: int) -> list:
    base, rem = divmod(total, classes)
    return [base + (1 if k < rem else 0) for k in range(classes)]


def synth_generate(
    out_dir: str,
    classes: int = 3,
    patch: int = 8,
    bands: int = 32,
    aux_channels: int = 2,
    n_train: int = 300,
    n_test: int = 300,
    noise: float = 0.05,
    seed: int = 0,
) -> str:
    """Write hsi/aux/label rasters plus a manifest; returns the manifest path."""
    if classes < 2:
        raise ConfigError(f"classes must be >= 2, got {classes}")
    if bands < 1 or aux_channels < 1 or patch < 1:
        raise ConfigError("bands, aux_channels and patch must be >= 1")
    if noise < 0:
        raise ConfigError(f"noise must be >= 0, got {noise}")

    rng = np.random.default_rng(seed)
    H = 48
    max_core_w = 64  # desk-scale bound on the scene footprint
    need = max(_per_class_counts(n_train, classes)) + max(
        _per_class_counts(n_test, classes)
    )
    # Sampled pixels keep a patch-sized margin from stripe boundaries so
    # every extracted patch sees a single class.
    margin = patch // 2
    core_w = max(1, -(-need // H))
    if core_w > max_core_w:
        raise SplitError(
            f"split needs {need} pixels per class; scene capacity is "
            f"{H * max_core_w} per class"
        )
    stripe_w = core_w + 2 * margin
    W = classes * stripe_w

    t = np.linspace(0.0, 1.0, bands)
    ii, jj = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")

    hsi = np.empty((H, W, bands), dtype=np.float64)
    aux = np.empty((H, W, aux_channels), dtype=np.float64)
    labels = np.zeros((H, W), dtype=np.uint16)
    for k in range(classes):
        cols = slice(k * stripe_w, (k + 1) * stripe_w)
        sig = 0.5 + 0.25 * _smooth_curve(rng, bands)
        sig += 0.5 * np.sin(2.0 * np.pi * ((k + 1) * t + rng.uniform()))
        hsi[:, cols, :] = sig

        theta = np.pi * (k + 0.5) / classes
        ramp = (np.cos(theta) * ii + np.sin(theta) * jj) / max(H, W)
        for c in range(aux_channels):
            aux[:, cols, c] = (0.5 + 0.5 * c) * ramp[:, cols] + k
        labels[:, cols] = k + 1

    if noise > 0:
        hsi += rng.normal(0.0, noise, hsi.shape)
        aux += rng.normal(0.0, noise, aux.shape)

    core = np.zeros((H, W), dtype=bool)
    for k in range(classes):
        core[:, k * stripe_w + margin : (k + 1) * stripe_w - margin] = True

    flat_labels = labels.ravel()
    flat_core = core.ravel()
    train_idx: list = []
    test_idx: list = []
    train_counts = _per_class_counts(n_train, classes)
    test_counts = _per_class_counts(n_test, classes)
    for k in range(classes):
        pool = np.flatnonzero((flat_labels == k + 1) & flat_core)
        wanted = train_counts[k] + test_counts[k]
        if len(pool) < wanted:
            raise SplitError(
                f"class {k + 1} has {len(pool)} core pixels but the split needs {wanted}"
            )
        pool = rng.permutation(pool)
        train_idx.extend(int(i) for i in pool[: train_counts[k]])
        test_idx.extend(int(i) for i in pool[train_counts[k] : wanted])

    os.makedirs(out_dir, exist_ok=True)
    tensorfile.write_tensor(os.path.join(out_dir, "hsi.msft"), hsi.astype(np.float32))
    tensorfile.write_tensor(os.path.join(out_dir, "aux.msft"), aux.astype(np.float32))
    tensorfile.write_labels(os.path.join(out_dir, "labels.msfl"), labels)

    manifest = {
        "version": 1,
        "hsi": "hsi.msft",
        "aux": "aux.msft",
        "labels": "labels.msfl",
        "class_names": [f"class_{k + 1:02d}" for k in range(classes)],
        "train_indices": sorted(train_idx),
        "test_indices": sorted(test_idx),
        "generator": {
            "classes": classes,
            "patch": patch,
            "bands": bands,
            "aux_channels": aux_channels,
            "n_train": n_train,
            "n_test": n_test,
            "noise": noise,
            "seed": seed,
        },
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=1)
        f.write("\n")
    return path


def load_manifest(path: str) -> Manifest:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    base = os.path.dirname(os.path.abspath(path))

    hsi = tensorfile.read_tensor(os.path.join(base, doc["hsi"]))
    aux = tensorfile.read_tensor(os.path.join(base, doc["aux"]))
    labels = tensorfile.read_labels(os.path.join(base, doc["labels"]))
    train_indices = np.asarray(doc["train_indices"], dtype=np.intp)
    test_indices = np.asarray(doc["test_indices"], dtype=np.intp)

    if hsi.shape[:2] != labels.shape or aux.shape[:2] != labels.shape:
        raise tensorfile.FormatError("cube and label map shapes disagree")
    flat = labels.ravel()
    for name, idx in (("train", train_indices), ("test", test_indices)):
        if len(idx) and (idx.min() < 0 or idx.max() >= flat.size):
            raise tensorfile.FormatError(f"{name} indices out of range")
        if np.any(flat[idx] == 0):
            raise tensorfile.FormatError(f"{name} split references unlabeled pixels")
    if np.intersect1d(train_indices, test_indices).size:
        raise tensorfile.FormatError("train and test splits overlap")

    return Manifest(
        path=os.path.abspath(path),
        hsi=hsi,
        aux=aux,
        labels=labels,
        class_names=list(doc["class_names"]),
        train_indices=train_indices,
        test_indices=test_indices,
    )
