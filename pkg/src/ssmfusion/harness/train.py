"""Patch training and evaluation around the classifier.

Patches are extracted centered on labeled pixels with mirror padding at the
scene borders. Training minimizes mean softmax cross-entropy with a
bias-corrected Adam update (plain SGD available); everything is
single-threaded and bitwise deterministic for a fixed seed.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass

import numpy as np

from ..model import (
    ModelConfig,
    PcaModel,
    forward,
    init_weights,
    loss_and_logits,
    pca_apply,
    pca_fit,
)
from ..numerics import ConfigError, Tensor, backward, no_grad
from . import tensorfile
from .metrics import Metrics, confusion_matrix, metrics_from_confusion
from .synth import Manifest, load_manifest


class TrainingDiverged(ArithmeticError):
    """Loss became non-finite; diagnostics were dumped."""


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 100
    batch_size: int = 32
    optimizer: str = "adam"
    save_every: int = 0  # epochs between extra checkpoints; 0 = final only
    stop_train_oa: float = 0.0  # early stop once train OA reaches this, 0 = off

    def validate(self) -> "TrainConfig":
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if not 0.0 <= self.stop_train_oa <= 1.0:
            raise ConfigError("stop_train_oa must be in [0, 1]")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - fields
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d).validate()


class PatchDataset:
    """Mirror-padded cubes plus centered patch extraction."""

    def __init__(self, manifest: Manifest, cfg: ModelConfig, pca: PcaModel, dtype=np.float32):
        self.cfg = cfg
        self.pad = cfg.patch // 2
        projected = pca_apply(pca, manifest.hsi.astype(np.float64)).astype(dtype)
        pad_spec = ((self.pad, self.pad), (self.pad, self.pad), (0, 0))
        self.hsi = np.pad(projected, pad_spec, mode="symmetric")
        self.aux = np.pad(manifest.aux.astype(dtype), pad_spec, mode="symmetric")
        self.labels = manifest.labels.ravel()
        self.width = manifest.labels.shape[1]

    def sample(self, flat_index: int):
        r, c = divmod(int(flat_index), self.width)
        p = self.cfg.patch
        hsi = self.hsi[r : r + p, c : c + p]
        aux = self.aux[r : r + p, c : c + p]
        return hsi, aux, int(self.labels[flat_index]) - 1


class _Optimizer:
    def __init__(self, weights: dict, cfg: TrainConfig):
        self.w = weights
        self.cfg = cfg
        self.t = 0
        if cfg.optimizer == "adam":
            self.m = {k: np.zeros_like(t.data) for k, t in weights.items()}
            self.v = {k: np.zeros_like(t.data) for k, t in weights.items()}

    def step(self, scale: float):
        """Apply one update from the accumulated grads, then clear them."""
        c = self.cfg
        self.t += 1
        for key, tensor in self.w.items():
            g = tensor.grad
            if g is None:
                g = np.zeros_like(tensor.data)
            else:
                g = g * scale
            if c.optimizer == "adam":
                m = self.m[key]
                v = self.v[key]
                m[...] = c.beta1 * m + (1.0 - c.beta1) * g
                v[...] = c.beta2 * v + (1.0 - c.beta2) * (g * g)
                mh = m / (1.0 - c.beta1**self.t)
                vh = v / (1.0 - c.beta2**self.t)
                tensor.data = tensor.data - c.lr * mh / (np.sqrt(vh) + c.eps)
            else:
                tensor.data = tensor.data - c.lr * g
            tensor.zero_grad()


def save_checkpoint(path, weights: dict, pca: PcaModel, model_cfg: ModelConfig,
                    meta: dict | None = None):
    tensors = {name: t.data for name, t in weights.items()}
    tensors["pca.mean"] = pca.mean
    tensors["pca.basis"] = pca.basis
    tensors["pca.explained_variance"] = pca.explained_variance
    doc = {"format": "checkpoint", "model": model_cfg.to_dict()}
    doc.update(meta or {})
    tensorfile.write_container(path, tensors, doc)


def load_checkpoint(path):
    """Returns (model_cfg, weights, pca, meta)."""
    meta, tensors = tensorfile.read_container(path)
    if meta.get("format") != "checkpoint":
        raise tensorfile.FormatError(f"{path} is not a checkpoint container")
    cfg = ModelConfig.from_dict(meta["model"])
    pca = PcaModel(
        mean=tensors.pop("pca.mean"),
        basis=tensors.pop("pca.basis"),
        explained_variance=tensors.pop("pca.explained_variance"),
    )
    weights = {
        name: Tensor(arr, requires_grad=True) for name, arr in tensors.items()
    }
    return cfg, weights, pca, meta


@dataclass
class TrainResult:
    checkpoint_path: str
    log: list  # one dict per epoch: epoch, loss, train_oa
    epochs_run: int
    final_train_oa: float


def _mean_loss_and_oa(dataset, indices, weights, cfg) -> tuple:
    total = 0.0
    hits = 0
    with no_grad():
        for idx in indices:
            hsi, aux, label = dataset.sample(idx)
            loss, logits = loss_and_logits(hsi, aux, label, weights, cfg)
            total += loss.item()
            hits += int(int(np.argmax(logits.data)) == label)
    return total / len(indices), hits / len(indices)


def train(
    manifest: Manifest | str,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    seed: int,
    out_path: str,
    log_fn=None,
) -> TrainResult:
    """Fit on the manifest's train split; writes checkpoint(s) and a log."""
    if isinstance(manifest, str):
        manifest = load_manifest(manifest)
    model_cfg.validate()
    train_cfg.validate()
    if model_cfg.classes != manifest.classes:
        raise ConfigError(
            f"model expects {model_cfg.classes} classes, manifest has {manifest.classes}"
        )
    if model_cfg.aux_channels != manifest.aux.shape[-1]:
        raise ConfigError(
            f"model expects {model_cfg.aux_channels} aux channels, "
            f"manifest has {manifest.aux.shape[-1]}"
        )

    spectra = manifest.hsi.reshape(-1, manifest.hsi.shape[-1])[manifest.train_indices]
    pca = pca_fit(spectra.astype(np.float64), model_cfg.N_p)
    dataset = PatchDataset(manifest, model_cfg, pca)
    weights = init_weights(model_cfg, seed=seed, dtype=np.float32)
    opt = _Optimizer(weights, train_cfg)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))

    log: list = []

    def record(**kv):
        log.append(kv)
        if log_fn is not None:
            log_fn(kv)

    loss0, oa0 = _mean_loss_and_oa(dataset, manifest.train_indices, weights, model_cfg)
    record(epoch=0, loss=loss0, train_oa=oa0)

    train_idx = np.asarray(manifest.train_indices)
    n = len(train_idx)
    epochs_run = 0
    train_oa = oa0
    stem, ext = os.path.splitext(out_path)
    # Divergence is detected by the per-sample finite check below; numpy's
    # overflow warnings on the way there are just noise.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, train_cfg.epochs + 1):
            order = shuffle_rng.permutation(n)
            epoch_loss = 0.0
            hits = 0
            for start in range(0, n, train_cfg.batch_size):
                batch = train_idx[order[start : start + train_cfg.batch_size]]
                for idx in batch:
                    hsi, aux, label = dataset.sample(idx)
                    loss, logits = loss_and_logits(hsi, aux, label, weights, model_cfg)
                    value = loss.item()
                    if not math.isfinite(value):
                        dump = f"{stem}.diverged{ext or '.msfc'}"
                        tensorfile.write_container(
                            dump,
                            {"hsi_patch": hsi, "aux_patch": aux},
                            {
                                "format": "diagnostic",
                                "epoch": epoch,
                                "pixel_index": int(idx),
                                "label": int(label),
                            },
                        )
                        raise TrainingDiverged(
                            f"non-finite loss at epoch {epoch}, pixel {int(idx)}; "
                            f"offending batch dumped to {dump}"
                        )
                    epoch_loss += value
                    hits += int(int(np.argmax(logits.data)) == label)
                    backward(loss)
                opt.step(1.0 / len(batch))
            epochs_run = epoch
            train_oa = hits / n
            record(epoch=epoch, loss=epoch_loss / n, train_oa=train_oa)
            if train_cfg.save_every and epoch % train_cfg.save_every == 0:
                save_checkpoint(
                    f"{stem}.epoch{epoch}{ext or '.msfc'}",
                    weights,
                    pca,
                    model_cfg,
                    {"train": train_cfg.to_dict(), "seed": seed, "epoch": epoch,
                     "class_names": manifest.class_names},
                )
            if train_cfg.stop_train_oa and train_oa >= train_cfg.stop_train_oa:
                break

    save_checkpoint(
        out_path,
        weights,
        pca,
        model_cfg,
        {"train": train_cfg.to_dict(), "seed": seed, "epoch": epochs_run,
         "class_names": manifest.class_names},
    )
    return TrainResult(
        checkpoint_path=out_path,
        log=log,
        epochs_run=epochs_run,
        final_train_oa=train_oa,
    )


def evaluate(checkpoint, manifest: Manifest | str, split: str = "test") -> Metrics:
    """Deterministic inference over one split; returns confusion + OA/AA/kappa."""
    if isinstance(manifest, str):
        manifest = load_manifest(manifest)
    if split not in ("train", "test"):
        raise ConfigError(f"split must be train or test, got {split!r}")
    if isinstance(checkpoint, str):
        cfg, weights, pca, _meta = load_checkpoint(checkpoint)
    else:
        cfg, weights, pca = checkpoint
    if cfg.classes != manifest.classes:
        raise ConfigError(
            f"checkpoint has {cfg.classes} classes, manifest has {manifest.classes}"
        )
    if pca.bands != manifest.hsi.shape[-1]:
        raise ConfigError(
            f"checkpoint PCA expects {pca.bands} bands, manifest has "
            f"{manifest.hsi.shape[-1]}"
        )

    dataset = PatchDataset(manifest, cfg, pca)
    indices = manifest.train_indices if split == "train" else manifest.test_indices
    truth = np.empty(len(indices), dtype=np.int64)
    pred = np.empty(len(indices), dtype=np.int64)
    with no_grad():
        for i, idx in enumerate(indices):
            hsi, aux, label = dataset.sample(idx)
            logits = forward(hsi, aux, weights, cfg)
            truth[i] = label
            pred[i] = int(np.argmax(logits.data))
    return metrics_from_confusion(confusion_matrix(truth, pred, cfg.classes))
