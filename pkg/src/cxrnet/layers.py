"""Network layers with explicit forward and backward passes.

Every layer follows the same protocol:

    y, cache = layer.forward(x, train=..., rng=...)
    gx, param_grads = layer.backward(cache, gy)

``cache`` holds exactly what the backward pass needs; evaluation discards it.
``param_grads`` is a tuple aligned with ``layer.params`` (empty for
stateless layers). Parameters are updated in place by the optimizer, never
by the layers themselves.

Convolutions are stride 1 with zero "same" padding, so spatial extents are
preserved and two 2x2 poolings take 128x128 inputs to 32x32 feature maps.
The forward is im2col plus one matrix product; a naive nested-loop
convolution in the test suite is the normative reference.
"""

from __future__ import annotations

import numpy as np

from . import tensor
from .errors import InputError, ShapeError, StateError
from .tensor import DEFAULT_DTYPE, Prng


def _sigmoid(t: np.ndarray) -> np.ndarray:
    # Two-branch form avoids exp overflow for large |t|.
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _im2col(xp: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Unfold padded input [B,C,Hp,Wp] into patch rows [B*H*W, C*kh*kw].

    H = Hp - kh + 1, W = Wp - kw + 1 (stride 1). Rows are ordered batch-major
    then row-major over output positions; columns are (channel, dy, dx).
    """
    b, c, hp, wp = xp.shape
    h, w = hp - kh + 1, wp - kw + 1
    col = np.empty((b, h, w, c, kh, kw), dtype=xp.dtype)
    for dy in range(kh):
        for dx in range(kw):
            col[:, :, :, :, dy, dx] = xp[:, :, dy : dy + h, dx : dx + w].transpose(0, 2, 3, 1)
    return col.reshape(b * h * w, c * kh * kw)


def _col2im(gcols: np.ndarray, b: int, c: int, hp: int, wp: int, kh: int, kw: int) -> np.ndarray:
    """Scatter-add patch-row gradients back onto the padded input grid."""
    h, w = hp - kh + 1, wp - kw + 1
    g6 = gcols.reshape(b, h, w, c, kh, kw)
    gxp = np.zeros((b, c, hp, wp), dtype=gcols.dtype)
    for dy in range(kh):
        for dx in range(kw):
            gxp[:, :, dy : dy + h, dx : dx + w] += g6[:, :, :, :, dy, dx].transpose(0, 3, 1, 2)
    return gxp


class Conv2d:
    """3x3 convolution, stride 1, zero-padded so spatial extents are preserved.

    weights: [out_channels, in_channels, k, k], bias: [out_channels].
    Glorot-uniform init with fan counted over the receptive field.
    """

    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3,
                 rng: Prng | None = None, dtype=DEFAULT_DTYPE):
        if kernel_size % 2 != 1:
            raise ShapeError("same padding requires an odd kernel size")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        k = kernel_size
        if rng is None:
            self.weights = tensor.zeros([out_channels, in_channels, k, k], dtype=dtype)
        else:
            fan_in = in_channels * k * k
            fan_out = out_channels * k * k
            self.weights = tensor.glorot_uniform(
                [out_channels, in_channels, k, k], fan_in, fan_out, rng, dtype=dtype)
        self.bias = tensor.zeros([out_channels], dtype=dtype)

    @property
    def params(self):
        return (self.weights, self.bias)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "in_channels": self.in_channels,
                "out_channels": self.out_channels, "kernel_size": self.kernel_size}

    def forward(self, x, train=False, rng=None):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"conv2d expects [B,{self.in_channels},H,W], got {x.shape}")
        b, _, h, w = x.shape
        k = self.kernel_size
        p = k // 2
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        cols = _im2col(xp, k, k)
        wmat = self.weights.reshape(self.out_channels, -1)
        y = tensor.matmul(cols, wmat.T) + self.bias
        y = y.reshape(b, h, w, self.out_channels).transpose(0, 3, 1, 2)
        cache = (cols, x.shape)
        return y, cache

    def backward(self, cache, gy):
        cols, x_shape = cache
        b, c, h, w = x_shape
        if gy.shape != (b, self.out_channels, h, w):
            raise ShapeError(f"grad_out shape {gy.shape} does not match forward output")
        k = self.kernel_size
        p = k // 2
        gy2 = np.ascontiguousarray(gy.transpose(0, 2, 3, 1)).reshape(-1, self.out_channels)
        gb = gy2.sum(axis=0)
        gw = tensor.matmul(gy2.T, cols).reshape(self.weights.shape)
        gcols = tensor.matmul(gy2, self.weights.reshape(self.out_channels, -1))
        gxp = _col2im(gcols, b, c, h + 2 * p, w + 2 * p, k, k)
        gx = gxp[:, :, p : p + h, p : p + w]
        return gx, (gw, gb)


class MaxPool2x2:
    """2x2 max pooling over disjoint windows; records argmax positions."""

    kind = "maxpool2x2"

    @property
    def params(self):
        return ()

    def descriptor(self) -> dict:
        return {"kind": self.kind}

    def forward(self, x, train=False, rng=None):
        if x.ndim != 4:
            raise ShapeError(f"maxpool expects [B,C,H,W], got {x.shape}")
        b, c, h, w = x.shape
        if h % 2 != 0 or w % 2 != 0:
            raise ShapeError(f"maxpool 2x2 requires even extents, got {h}x{w}")
        ho, wo = h // 2, w // 2
        windows = x.reshape(b, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho, wo, 4)
        argmax = windows.argmax(axis=-1)
        y = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
        cache = (argmax, x.shape)
        return y, cache

    def backward(self, cache, gy):
        argmax, x_shape = cache
        b, c, h, w = x_shape
        ho, wo = h // 2, w // 2
        if gy.shape != (b, c, ho, wo):
            raise ShapeError(f"grad_out shape {gy.shape} does not match forward output")
        gwin = np.zeros((b, c, ho, wo, 4), dtype=gy.dtype)
        np.put_along_axis(gwin, argmax[..., None], gy[..., None], axis=-1)
        gx = gwin.reshape(b, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h, w)
        return gx, ()


class Flatten:
    """Collapse [B, ...] to [B, features]."""

    kind = "flatten"

    @property
    def params(self):
        return ()

    def descriptor(self) -> dict:
        return {"kind": self.kind}

    def forward(self, x, train=False, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, gy):
        return gy.reshape(cache), ()


class Dense:
    """Affine map y = x @ W + b with W: [in_features, out_features]."""

    kind = "dense"

    def __init__(self, in_features: int, out_features: int,
                 rng: Prng | None = None, dtype=DEFAULT_DTYPE):
        self.in_features = in_features
        self.out_features = out_features
        if rng is None:
            self.weights = tensor.zeros([in_features, out_features], dtype=dtype)
        else:
            self.weights = tensor.glorot_uniform(
                [in_features, out_features], in_features, out_features, rng, dtype=dtype)
        self.bias = tensor.zeros([out_features], dtype=dtype)

    @property
    def params(self):
        return (self.weights, self.bias)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "in_features": self.in_features,
                "out_features": self.out_features}

    def forward(self, x, train=False, rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"dense expects [B,{self.in_features}], got {x.shape}")
        y = tensor.matmul(x, self.weights) + self.bias
        return y, x

    def backward(self, cache, gy):
        x = cache
        if gy.shape != (x.shape[0], self.out_features):
            raise ShapeError(f"grad_out shape {gy.shape} does not match forward output")
        gw = tensor.matmul(x.T, gy)
        gb = gy.sum(axis=0)
        gx = tensor.matmul(gy, self.weights.T)
        return gx, (gw, gb)


class ReLU:
    """max(0, t); gradient passes where t > 0 (defined as 0 at t == 0)."""

    kind = "relu"

    @property
    def params(self):
        return ()

    def descriptor(self) -> dict:
        return {"kind": self.kind}

    def forward(self, x, train=False, rng=None):
        return np.maximum(x, 0), x

    def backward(self, cache, gy):
        return gy * (cache > 0), ()


class Sigmoid:
    """1 / (1 + exp(-t)); gradient is y * (1 - y)."""

    kind = "sigmoid"

    @property
    def params(self):
        return ()

    def descriptor(self) -> dict:
        return {"kind": self.kind}

    def forward(self, x, train=False, rng=None):
        y = _sigmoid(x)
        return y, y

    def backward(self, cache, gy):
        y = cache
        return gy * y * (1.0 - y), ()


class Dropout:
    """Inverted dropout: kept elements are scaled by 1/(1-rate) at train time,
    so evaluation is the identity."""

    kind = "dropout"

    def __init__(self, rate: float = 0.5):
        if not 0.0 <= rate < 1.0:
            raise InputError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    @property
    def params(self):
        return ()

    def descriptor(self) -> dict:
        return {"kind": self.kind, "rate": self.rate}

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            return x, None
        if rng is None:
            raise StateError("dropout in train mode requires a Prng")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) >= self.rate).astype(x.dtype) / keep
        return x * mask, mask

    def backward(self, cache, gy):
        if cache is None:
            return gy, ()
        return gy * cache, ()


_LAYER_KINDS = {cls.kind: cls for cls in
                (Conv2d, MaxPool2x2, Flatten, Dense, ReLU, Sigmoid, Dropout)}


class Network:
    """Ordered layer stack with a shared forward/backward protocol.

    ``forward(train=True)`` returns per-layer caches for ``backward``;
    evaluation returns ``caches=None`` and is deterministic.
    """

    def __init__(self, layers: list):
        self.layers = list(layers)

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def describe(self) -> list[dict]:
        return [layer.descriptor() for layer in self.layers]

    @classmethod
    def from_descriptor(cls, descriptors: list[dict], dtype=DEFAULT_DTYPE) -> "Network":
        layers = []
        for desc in descriptors:
            desc = dict(desc)
            kind = desc.pop("kind", None)
            if kind not in _LAYER_KINDS:
                raise StateError(f"unknown layer kind {kind!r} in descriptor")
            layer_cls = _LAYER_KINDS[kind]
            if layer_cls in (Conv2d, Dense):
                layers.append(layer_cls(**desc, dtype=dtype))
            else:
                layers.append(layer_cls(**desc))
        return cls(layers)

    def forward(self, x, train=False, rng=None):
        """Run the stack; returns (output, caches) with caches=None in eval mode."""
        caches = [] if train else None
        for i, layer in enumerate(self.layers):
            layer_rng = rng.derive(i) if (train and rng is not None) else None
            x, cache = layer.forward(x, train=train, rng=layer_rng)
            if train:
                caches.append(cache)
        return x, caches

    def backward(self, caches, gy) -> list[np.ndarray]:
        """Gradients for every parameter, aligned with ``parameters()``."""
        if caches is None:
            raise StateError("backward requires caches from a train-mode forward")
        grads_per_layer = []
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            gy, pgrads = layer.backward(cache, gy)
            grads_per_layer.append(pgrads)
        grads_per_layer.reverse()
        return [g for pgrads in grads_per_layer for g in pgrads]


def binary_cnn(input_hw: tuple[int, int] = (128, 128),
               conv_channels: tuple[int, int] = (64, 128),
               dense_width: int = 128,
               dropout_rate: float = 0.5,
               rng: Prng | None = None,
               dtype=DEFAULT_DTYPE) -> Network:
    """Two conv blocks, a hidden dense layer, and a single sigmoid output.

    Defaults build the production model for grayscale 128x128 inputs:
    Conv(1->64) ReLU Pool, Conv(64->128) ReLU Pool, Flatten,
    Dense(->128) ReLU Dropout(0.5), Dense(->1) Sigmoid.
    Smaller variants (for gradient checking) scale the channel counts and
    input size but keep the same structure.
    """
    h, w = input_hw
    if h % 4 != 0 or w % 4 != 0:
        raise ShapeError("input extents must be divisible by 4 (two 2x2 poolings)")
    c1, c2 = conv_channels
    flat = c2 * (h // 4) * (w // 4)
    return Network([
        Conv2d(1, c1, 3, rng=rng, dtype=dtype),
        ReLU(),
        MaxPool2x2(),
        Conv2d(c1, c2, 3, rng=rng, dtype=dtype),
        ReLU(),
        MaxPool2x2(),
        Flatten(),
        Dense(flat, dense_width, rng=rng, dtype=dtype),
        ReLU(),
        Dropout(dropout_rate),
        Dense(dense_width, 1, rng=rng, dtype=dtype),
        Sigmoid(),
    ])


def shape_trace(net: Network, input_shape: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Output shape after each layer for a dummy zero input (eval mode)."""
    x = np.zeros(input_shape, dtype=DEFAULT_DTYPE)
    shapes = []
    for layer in net.layers:
        x, _ = layer.forward(x)
        shapes.append(x.shape)
    return shapes
