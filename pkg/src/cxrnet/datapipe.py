"""Dataset discovery, image preprocessing, augmentation, and batching.

Expected directory layout (extensions matched case-insensitively):

    root/{train,val,test}/{NORMAL,PNEUMONIA}/*.{png,jpg,jpeg}

Labels come solely from the parent directory name: NORMAL=0, PNEUMONIA=1.
Preprocessing converts to grayscale, resizes to 128x128 with bilinear
interpolation (half-pixel centers), and scales intensities to [0, 1].

Training batches apply one composed affine transform per image (rotation,
isotropic zoom, shift, optional horizontal flip) resampled bilinearly with
nearest-edge fill. All randomness is drawn from Prng substreams keyed by
(epoch, item index), so epoch ordering and augmentation are reproducible
and independent of any prefetching strategy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, InputError, LayoutError, ShapeError
from .tensor import Prng

TARGET_SIZE = 128
CLASS_DIRS = (("NORMAL", 0), ("PNEUMONIA", 1))
SPLIT_NAMES = ("train", "val", "test")
_EXTENSIONS = {".png", ".jpg", ".jpeg"}

# Substream tags within the datapipe's Prng.
_STREAM_SHUFFLE = 0
_STREAM_AUGMENT = 1


@dataclass(frozen=True)
class AugmentConfig:
    rotation_max_deg: float = 30.0
    zoom_max_frac: float = 0.20
    horizontal_flip_prob: float = 0.5
    shift_max_frac: float = 0.10

    def __post_init__(self):
        if not 0.0 <= self.rotation_max_deg <= 180.0:
            raise InputError("rotation_max_deg must be in [0, 180]")
        for name in ("zoom_max_frac", "horizontal_flip_prob", "shift_max_frac"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise InputError(f"{name} must be in [0, 1), got {v}")


IDENTITY_AUGMENT = AugmentConfig(rotation_max_deg=0.0, zoom_max_frac=0.0,
                                 horizontal_flip_prob=0.0, shift_max_frac=0.0)


@dataclass
class LabeledDataset:
    split: str
    items: list[tuple[Path, int]]

    def __len__(self) -> int:
        return len(self.items)

    def labels(self) -> np.ndarray:
        return np.array([label for _, label in self.items], dtype=np.int64)


@dataclass
class DatasetSplits:
    train: LabeledDataset
    val: LabeledDataset
    test: LabeledDataset

    def __getitem__(self, split: str) -> LabeledDataset:
        if split not in SPLIT_NAMES:
            raise InputError(f"unknown split {split!r}, expected one of {SPLIT_NAMES}")
        return getattr(self, split)


@dataclass
class Batch:
    images: np.ndarray  # [B, 1, H, W] float32 in [0, 1]
    labels: np.ndarray  # [B, 1] float32 in {0, 1}
    paths: list[Path]
    augmented: bool


def scan_dataset(root: str | Path) -> DatasetSplits:
    """Discover all three splits; items are in lexicographic path order."""
    root = Path(root)
    if not root.is_dir():
        raise LayoutError(f"dataset root {root} is not a directory")
    splits = {}
    for split in SPLIT_NAMES:
        split_dir = root / split
        if not split_dir.is_dir():
            raise LayoutError(
                f"missing split directory '{split}' under {root} "
                f"(expected {root}/{{train,val,test}}/{{NORMAL,PNEUMONIA}})")
        items: list[tuple[Path, int]] = []
        for class_name, label in CLASS_DIRS:
            class_dir = _find_class_dir(split_dir, class_name)
            if class_dir is None:
                raise LayoutError(
                    f"missing class directory '{class_name}' under {split_dir}")
            files = sorted(
                p for p in class_dir.iterdir()
                if p.is_file() and p.suffix.lower() in _EXTENSIONS)
            if not files:
                raise LayoutError(f"no images found in {class_dir}")
            items.extend((p, label) for p in files)
        items.sort(key=lambda item: str(item[0]))
        splits[split] = LabeledDataset(split=split, items=items)
    return DatasetSplits(**splits)


def _find_class_dir(split_dir: Path, class_name: str) -> Path | None:
    for child in sorted(split_dir.iterdir()):
        if child.is_dir() and child.name.upper() == class_name:
            return child
    return None


def load_grayscale(path: str | Path) -> np.ndarray:
    """Decode a PNG/JPEG to a [H, W] float32 array of intensities 0..255.

    Grayscale files pass through unchanged; color inputs are reduced with the
    BT.601 luminance Y = 0.299 R + 0.587 G + 0.114 B, rounded to the nearest
    integer intensity.
    """
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode == "L":
                return np.asarray(im, dtype=np.float32)
            rgb = im if im.mode == "RGB" else im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64)
    except (FileNotFoundError, UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc
    lum = arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114
    return np.round(lum).astype(np.float32)


def _bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear lookup at float coordinates with clamp-to-edge (nearest-edge fill)."""
    h, w = img.shape
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    fy = ys - y0
    fx = xs - x0
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    v00 = img[y0, x0]
    v01 = img[y0, x1]
    v10 = img[y1, x0]
    v11 = img[y1, x1]
    top = (1.0 - fx) * v00 + fx * v01
    bot = (1.0 - fx) * v10 + fx * v11
    return (1.0 - fy) * top + fy * bot


def resize_bilinear(img: np.ndarray, out_h: int = TARGET_SIZE,
                    out_w: int = TARGET_SIZE) -> np.ndarray:
    """Resize [H, W] to [out_h, out_w] with half-pixel-center sampling.

    Source coordinate of output pixel i is (i + 0.5) * (in / out) - 0.5; a
    same-size resize is therefore the exact identity.
    """
    if img.ndim != 2:
        raise ShapeError(f"expected a [H, W] image, got shape {img.shape}")
    h, w = img.shape
    if h < 1 or w < 1 or out_h < 1 or out_w < 1:
        raise ShapeError("image extents must be >= 1")
    src_y = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    src_x = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    ys, xs = np.meshgrid(src_y, src_x, indexing="ij")
    return _bilinear_sample(img.astype(np.float64, copy=False), ys, xs).astype(img.dtype)


def normalize(img: np.ndarray) -> np.ndarray:
    """Scale 0..255 intensities to [0, 1] (float32)."""
    if img.min() < 0 or img.max() > 255:
        raise InputError("intensities must lie in [0, 255]")
    return (np.asarray(img, dtype=np.float32)) / np.float32(255.0)


@dataclass(frozen=True)
class AffineParams:
    """One composed transform: flip, then zoom and rotation about the image
    center, then shift. Identity is (0, 1, 0, 0, False)."""
    rotation_deg: float = 0.0
    zoom: float = 1.0
    shift_x: float = 0.0
    shift_y: float = 0.0
    flip: bool = False


def sample_affine_params(cfg: AugmentConfig, rng: Prng, h: int, w: int) -> AffineParams:
    """Draw one transform. Always consumes exactly five draws, in a fixed
    order, so streams stay aligned regardless of the configured magnitudes."""
    rotation = float(rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg))
    zoom = float(rng.uniform(1.0 - cfg.zoom_max_frac, 1.0 + cfg.zoom_max_frac))
    shift_x = float(rng.uniform(-cfg.shift_max_frac, cfg.shift_max_frac)) * w
    shift_y = float(rng.uniform(-cfg.shift_max_frac, cfg.shift_max_frac)) * h
    flip = bool(rng.random() < cfg.horizontal_flip_prob)
    return AffineParams(rotation, zoom, shift_x, shift_y, flip)


def apply_affine(img: np.ndarray, params: AffineParams) -> np.ndarray:
    """Resample [H, W] under the composed affine map, nearest-edge fill.

    Forward map: p_out = R(theta) * S(zoom) * F (p_in - c) + c + shift, with
    c the image center in pixel coordinates. Output pixels sample the input
    at the inverse location, one bilinear pass for the whole composition.
    """
    if img.ndim != 2:
        raise ShapeError(f"expected a [H, W] image, got shape {img.shape}")
    h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = math.radians(params.rotation_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    inv_zoom = 1.0 / params.zoom
    # Inverse linear map: F * S(1/zoom) * R(-theta) acting on (x, y).
    a = inv_zoom * cos_t
    b = inv_zoom * sin_t
    # rows of the inverse matrix for x and y
    if params.flip:
        m_xx, m_xy = -a, -b
    else:
        m_xx, m_xy = a, b
    m_yx, m_yy = -b, a
    yo, xo = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    dx = xo - cx - params.shift_x
    dy = yo - cy - params.shift_y
    xs = m_xx * dx + m_xy * dy + cx
    ys = m_yx * dx + m_yy * dy + cy
    return _bilinear_sample(img.astype(np.float64, copy=False), ys, xs).astype(img.dtype)


def augment(img: np.ndarray, cfg: AugmentConfig, rng: Prng) -> np.ndarray:
    """Randomly transform a [0, 1] image; output shape and range are preserved."""
    lo, hi = float(img.min()), float(img.max())
    if lo < 0.0 or hi > 1.0:
        raise InputError("augment expects pixel values in [0, 1]")
    h, w = img.shape
    params = sample_affine_params(cfg, rng, h, w)
    out = apply_affine(img, params)
    return np.clip(out, 0.0, 1.0)


def preprocess_image(path: str | Path, size: int = TARGET_SIZE) -> np.ndarray:
    """Full deterministic preprocessing: decode, grayscale, resize, [0, 1]."""
    return normalize(resize_bilinear(load_grayscale(path), size, size))


def batches(ds: LabeledDataset, batch_size: int = 32, shuffle: bool = False,
            rng: Prng | None = None, augment_cfg: AugmentConfig | None = None,
            epoch: int = 0, size: int = TARGET_SIZE,
            cache: dict | None = None) -> Iterator[Batch]:
    """Yield minibatches covering the dataset exactly once.

    Shuffling permutes with the substream (epoch,) of ``rng``; augmentation
    draws from the substream (epoch, item_index) per image, where the index
    refers to the dataset's canonical order. Validation and test iteration
    must pass ``augment_cfg=None``.
    """
    if len(ds) == 0:
        raise InputError("dataset is empty")
    if batch_size < 1:
        raise InputError("batch_size must be >= 1")
    if (shuffle or augment_cfg is not None) and rng is None:
        raise InputError("shuffle and augmentation require a Prng")
    n = len(ds)
    order = rng.derive(_STREAM_SHUFFLE, epoch).permutation(n) if shuffle else np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        images = np.empty((len(idx), 1, size, size), dtype=np.float32)
        labels = np.empty((len(idx), 1), dtype=np.float32)
        paths = []
        for row, i in enumerate(idx):
            path, label = ds.items[int(i)]
            if cache is not None and path in cache:
                img = cache[path]
            else:
                img = preprocess_image(path, size)
                if cache is not None:
                    cache[path] = img
            if augment_cfg is not None:
                img = augment(img, augment_cfg, rng.derive(_STREAM_AUGMENT, epoch, int(i)))
            images[row, 0] = img
            labels[row, 0] = label
            paths.append(path)
        yield Batch(images=images, labels=labels, paths=paths,
                    augmented=augment_cfg is not None)
