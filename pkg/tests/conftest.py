"""Shared fixtures: synthetic image trees in the expected dataset layout."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def blob_image(rng: np.random.Generator, size: int) -> np.ndarray:
    """Noisy background with a bright centered blob (the positive class)."""
    img = rng.uniform(0, 140, (size, size))
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2.0
    bump = 115.0 * np.exp(-(((yy - c) ** 2 + (xx - c) ** 2) / (2 * (size / 6.0) ** 2)))
    return np.clip(img + bump, 0, 255).astype(np.uint8)


def noise_image(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform noise only (the negative class)."""
    return rng.uniform(0, 140, (size, size)).astype(np.uint8)


def write_dataset_tree(root: Path, counts: dict[str, tuple[int, int]],
                       size: int = 32, seed: int = 0) -> Path:
    """Create root/{split}/{NORMAL,PNEUMONIA}/*.png with the given counts.

    ``counts`` maps split name to (n_normal, n_pneumonia). NORMAL images are
    uniform noise, PNEUMONIA images carry the centered blob, so the task is
    learnable from pixel statistics.
    """
    rng = np.random.default_rng(seed)
    for split, (n_norm, n_pneu) in counts.items():
        for class_name, n, maker in (("NORMAL", n_norm, noise_image),
                                     ("PNEUMONIA", n_pneu, blob_image)):
            d = root / split / class_name
            d.mkdir(parents=True, exist_ok=True)
            for i in range(n):
                Image.fromarray(maker(rng, size), mode="L").save(d / f"img_{i:04d}.png")
    return root


@pytest.fixture
def small_tree(tmp_path):
    """2+3 train, 1+1 val, 2+2 test, 32x32 images."""
    return write_dataset_tree(
        tmp_path / "data",
        {"train": (2, 3), "val": (1, 1), "test": (2, 2)},
        size=32,
    )
