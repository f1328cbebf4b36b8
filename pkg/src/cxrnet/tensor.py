"""Dense array primitives and seeded randomness for the whole package.

Tensors are plain numpy arrays in row-major (C) order; images and activations
use the fixed [batch, channel, height, width] axis convention. Production
paths run float32, gradient checking runs the identical code at float64.

Every operation validates shapes up front and guarantees that no NaN or Inf
escapes without an error (NumericError).

Randomness never touches the platform default generator. ``Prng`` wraps the
PCG64 algorithm seeded through ``numpy.random.SeedSequence``, so the same
seed produces the same stream on every platform, and independent substreams
can be derived from integer keys (used for per-epoch shuffles and per-image
augmentation draws).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

DEFAULT_DTYPE = np.float32


def check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    """Validate extents (non-empty, every extent >= 1) and return as a tuple."""
    dims = tuple(int(d) for d in shape)
    if len(dims) == 0:
        raise ShapeError("shape must have at least one extent")
    for d in dims:
        if d < 1:
            raise ShapeError(f"every extent must be >= 1, got {dims}")
    return dims


def ensure_finite(x: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(x).all():
        raise NumericError(f"{op} produced non-finite values")
    return x


def zeros(shape: Sequence[int], dtype=DEFAULT_DTYPE) -> np.ndarray:
    """All-zero tensor of the given shape."""
    return np.zeros(check_shape(shape), dtype=dtype)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rank-2 matrix product c[i,j] = sum_t a[i,t] * b[t,j]."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner extents disagree: {a.shape} x {b.shape}")
    return ensure_finite(a @ b, "matmul")


def map_elementwise(a: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply an elementwise function; shape is preserved.

    ``f`` receives the whole array and must act elementwise (numpy ufuncs and
    expressions built from them qualify).
    """
    out = np.asarray(f(a))
    if out.shape != a.shape:
        raise ShapeError(f"elementwise map changed shape {a.shape} -> {out.shape}")
    return ensure_finite(out, "map_elementwise")


def zip_elementwise(
    a: np.ndarray, b: np.ndarray, f: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> np.ndarray:
    """Apply a binary elementwise function to same-shaped tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"zip_elementwise shapes differ: {a.shape} vs {b.shape}")
    out = np.asarray(f(a, b))
    if out.shape != a.shape:
        raise ShapeError(f"elementwise zip changed shape {a.shape} -> {out.shape}")
    return ensure_finite(out, "zip_elementwise")


def glorot_uniform(
    shape: Sequence[int], fan_in: int, fan_out: int, rng: "Prng", dtype=DEFAULT_DTYPE
) -> np.ndarray:
    """Sample i.i.d. uniform on [-L, L] with L = sqrt(6 / (fan_in + fan_out))."""
    dims = check_shape(shape)
    if fan_in < 1 or fan_out < 1:
        raise ShapeError(f"fan_in and fan_out must be >= 1, got {fan_in}, {fan_out}")
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng.uniform(-limit, limit, dims).astype(dtype)


class Prng:
    """Reproducible random stream (PCG64, fixed by construction).

    Identical ``seed`` (and derivation keys) gives an identical stream on any
    platform. ``derive`` spawns an independent substream from integer keys,
    e.g. ``root.derive(epoch, item_index)``; derived streams never overlap
    the parent stream.
    """

    def __init__(self, seed: int, _spawn_key: tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self._spawn_key = _spawn_key
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=_spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def derive(self, *keys: int) -> "Prng":
        """Independent substream keyed by (seed, *parent_keys, *keys)."""
        for k in keys:
            if int(k) < 0:
                raise ValueError("derivation keys must be non-negative integers")
        return Prng(self.seed, self._spawn_key + tuple(int(k) for k in keys))

    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def random(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"Prng(seed={self.seed}, key={self._spawn_key})"
