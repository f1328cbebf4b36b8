"""Training orchestration, evaluation, and checkpoint persistence.

One epoch is: a shuffled, augmented pass over the training split with
dropout active, a full validation pass in eval mode, then one plateau
scheduler update. The learning rate recorded per epoch is the rate in
effect during that epoch's training pass; a plateau reduction applies from
the next epoch.

Everything is deterministic given (seed, data, config). Substreams of the
master seed are fixed: 0 for parameter initialization, 1 for the data
pipeline (shuffles and augmentation), 2 for dropout masks.

Checkpoint file layout (all integers little-endian):

    magic "CXRN" | u32 version | u32 descriptor_len | descriptor JSON |
    per tensor: u32 ndim, u32*ndim extents, raw float32 data |
    u32 CRC-32 of everything between the version field and the CRC

Tensors appear in a fixed order: model parameters, then Adam first moments,
then Adam second moments. The descriptor JSON carries the architecture,
epoch index, seed, and Adam hyperparameters, so a load rebuilds the exact
training state; parameters round-trip bit-exactly.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .datapipe import AugmentConfig, DatasetSplits, LabeledDataset, batches
from .errors import FormatError, InputError, NumericError
from .layers import Network, binary_cnn
from .optim import Adam, ReduceLROnPlateau, bce_loss
from .tensor import Prng

CHECKPOINT_MAGIC = b"CXRN"
CHECKPOINT_VERSION = 1

STREAM_INIT = 0
STREAM_DATA = 1
STREAM_DROPOUT = 2


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    seed: int = 0
    batch_size: int = 32
    initial_lr: float = 1e-3
    augment: AugmentConfig | None = field(default_factory=AugmentConfig)
    plateau_factor: float = 0.1
    plateau_patience: int = 3
    min_lr: float = 1e-5
    image_size: int = 128
    cache_images: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise InputError("epochs must be >= 0")
        if self.batch_size < 1 or self.initial_lr <= 0 or self.min_lr <= 0:
            raise InputError("hyperparameters must be positive")
        if self.image_size < 4 or self.image_size % 4 != 0:
            raise InputError("image_size must be a positive multiple of 4")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    learning_rate: float


History = list[EpochRecord]


def build_model(seed: int, dtype=np.float32) -> Network:
    """Production model initialized from the seed's init substream."""
    return binary_cnn(rng=Prng(seed).derive(STREAM_INIT), dtype=dtype)


def evaluate(model: Network, ds: LabeledDataset, batch_size: int = 32,
             image_size: int = 128,
             cache: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-item probabilities and labels, in dataset order, eval mode."""
    if len(ds) == 0:
        raise InputError("dataset is empty")
    scores = []
    labels = []
    for batch in batches(ds, batch_size=batch_size, size=image_size, cache=cache):
        assert not batch.augmented, "evaluation batches must be augmentation-free"
        probs, _ = model.forward(batch.images)
        scores.append(probs[:, 0])
        labels.append(batch.labels[:, 0])
    return np.concatenate(scores), np.concatenate(labels)


def _loss_and_accuracy(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    loss, _ = bce_loss(scores[:, None].astype(np.float64), labels[:, None])
    acc = float(((scores >= 0.5) == (labels == 1)).mean())
    return loss, acc


EpochCallback = Callable[[Network, Adam, EpochRecord, "ReduceLROnPlateau"], None]


def train(model: Network, splits: DatasetSplits, cfg: TrainConfig,
          epoch_end: EpochCallback | None = None) -> tuple[Network, History]:
    """Run exactly cfg.epochs epochs; returns the model and its history.

    A non-finite training loss aborts with a NumericError naming the epoch
    and batch. ``epoch_end`` (if given) runs after each epoch's validation
    pass, before the plateau-adjusted rate takes effect.
    """
    adam = Adam(model.parameters(), lr=cfg.initial_lr)
    plateau = ReduceLROnPlateau(cfg.initial_lr, factor=cfg.plateau_factor,
                                patience=cfg.plateau_patience, min_lr=cfg.min_lr)
    master = Prng(cfg.seed)
    data_rng = master.derive(STREAM_DATA)
    train_cache: dict | None = {} if cfg.cache_images else None
    val_cache: dict | None = {} if cfg.cache_images else None
    history: History = []
    for epoch in range(cfg.epochs):
        lr_in_effect = adam.lr
        loss_sum = 0.0
        correct = 0
        seen = 0
        train_iter = batches(splits.train, batch_size=cfg.batch_size, shuffle=True,
                             rng=data_rng, augment_cfg=cfg.augment, epoch=epoch,
                             size=cfg.image_size, cache=train_cache)
        for bidx, batch in enumerate(train_iter):
            try:
                probs, caches = model.forward(
                    batch.images, train=True, rng=master.derive(STREAM_DROPOUT, epoch, bidx))
                loss, grad = bce_loss(probs, batch.labels)
                if not math.isfinite(loss):
                    raise NumericError("non-finite training loss")
                adam.step(model.backward(caches, grad))
            except NumericError as exc:
                raise NumericError(
                    f"{exc} (epoch {epoch + 1}, batch {bidx})") from exc
            b = batch.images.shape[0]
            loss_sum += loss * b
            correct += int(((probs[:, 0] >= 0.5) == (batch.labels[:, 0] == 1)).sum())
            seen += b
        val_scores, val_labels = evaluate(model, splits.val, batch_size=cfg.batch_size,
                                          image_size=cfg.image_size, cache=val_cache)
        val_loss, val_acc = _loss_and_accuracy(val_scores, val_labels)
        record = EpochRecord(
            epoch=epoch + 1,
            train_loss=loss_sum / seen,
            train_accuracy=correct / seen,
            val_loss=val_loss,
            val_accuracy=val_acc,
            learning_rate=lr_in_effect,
        )
        history.append(record)
        if epoch_end is not None:
            epoch_end(model, adam, record, plateau)
        adam.lr = plateau.update(val_loss)
    return model, history


def write_history_csv(history: History, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        f.write("epoch,train_loss,train_acc,val_loss,val_acc,lr\n")
        for r in history:
            f.write(f"{r.epoch},{r.train_loss!r},{r.train_accuracy!r},"
                    f"{r.val_loss!r},{r.val_accuracy!r},{r.learning_rate!r}\n")


def _tensor_bytes(arr: np.ndarray) -> bytes:
    data = np.ascontiguousarray(arr, dtype="<f4")
    head = struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + data.tobytes()


def save_checkpoint(path: str | Path, model: Network, adam: Adam,
                    epoch: int, seed: int) -> None:
    descriptor = {
        "architecture": model.describe(),
        "epoch": int(epoch),
        "seed": int(seed),
        "adam": {"lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2,
                 "eps": adam.eps, "t": adam.t},
    }
    desc_bytes = json.dumps(descriptor, sort_keys=True).encode("utf-8")
    chunks = [struct.pack("<I", len(desc_bytes)), desc_bytes]
    for arr in [*model.parameters(), *adam.m, *adam.v]:
        chunks.append(_tensor_bytes(arr))
    crc = 0
    for chunk in chunks:
        crc = zlib.crc32(chunk, crc)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        for chunk in chunks:
            f.write(chunk)
        f.write(struct.pack("<I", crc))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError("checkpoint truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path: str | Path) -> tuple[Network, Adam, int, int]:
    """Restore (model, adam, epoch, seed); raises FormatError on any corruption."""
    blob = Path(path).read_bytes()
    if len(blob) < 12:
        raise FormatError("checkpoint truncated")
    if blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError("bad checkpoint magic")
    version = struct.unpack("<I", blob[4:8])[0]
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    payload, crc_stored = blob[8:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(payload) != crc_stored:
        raise FormatError("checkpoint checksum mismatch")
    r = _Reader(payload)
    desc_len = r.u32()
    try:
        descriptor = json.loads(r.take(desc_len).decode("utf-8"))
        arch = descriptor["architecture"]
        adam_cfg = descriptor["adam"]
        epoch = int(descriptor["epoch"])
        seed = int(descriptor["seed"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise FormatError(f"bad checkpoint descriptor: {exc}") from exc
    model = Network.from_descriptor(arch)
    adam = Adam(model.parameters(), lr=adam_cfg["lr"], beta1=adam_cfg["beta1"],
                beta2=adam_cfg["beta2"], eps=adam_cfg["eps"])
    adam.t = int(adam_cfg["t"])
    tensors = [*model.parameters(), *adam.m, *adam.v]
    for arr in tensors:
        ndim = r.u32()
        shape = tuple(r.u32() for _ in range(ndim))
        if shape != arr.shape:
            raise FormatError(f"tensor shape {shape} does not match architecture {arr.shape}")
        data = np.frombuffer(r.take(4 * arr.size), dtype="<f4").reshape(shape)
        arr[...] = data
    if r.pos != len(payload):
        raise FormatError("trailing bytes after checkpoint tensors")
    return model, adam, epoch, seed
