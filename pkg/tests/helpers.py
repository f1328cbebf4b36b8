"""Independent reference implementations (oracles) used by the tests.

Everything here is deliberately naive: plain Python loops and scalar math,
sharing no code with the package internals it checks.
"""

from __future__ import annotations

import math

import numpy as np


def naive_conv2d(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Direct nested-loop convolution, stride 1, zero same-padding."""
    nb, nc, h, ww = x.shape
    no, _, kh, kw = w.shape
    ph, pw = kh // 2, kw // 2
    out = np.zeros((nb, no, h, ww), dtype=np.float64)
    for b in range(nb):
        for o in range(no):
            for y in range(h):
                for xx in range(ww):
                    acc = float(bias[o])
                    for c in range(nc):
                        for dy in range(kh):
                            for dx in range(kw):
                                yy = y + dy - ph
                                xx2 = xx + dx - pw
                                if 0 <= yy < h and 0 <= xx2 < ww:
                                    acc += float(w[o, c, dy, dx]) * float(x[b, c, yy, xx2])
                    out[b, o, y, xx] = acc
    return out


def finite_difference_grads(f, arrays: list[np.ndarray], h: float = 1e-5) -> list[np.ndarray]:
    """Central finite differences of scalar f() w.r.t. each float64 array.

    ``f`` must close over ``arrays``; entries are perturbed in place.
    """
    grads = []
    for arr in arrays:
        assert arr.dtype == np.float64, "finite differences need float64 arrays"
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max absolute difference over the larger of the two gradient magnitudes."""
    diff = float(np.max(np.abs(analytic - numeric)))
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1e-12)
    return diff / scale


def mann_whitney_auc(scores, labels) -> float:
    """Pairwise concordance probability, ties counted as 1/2."""
    pos = [float(s) for s, y in zip(scores, labels) if y == 1]
    neg = [float(s) for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def brute_force_pr_points(scores, labels) -> tuple[list[float], list[float]]:
    """(recall, precision) by exhaustive per-threshold counting, recall-sorted,
    with the (0, 1) anchor. Shares the package's endpoint convention but none
    of its code."""
    scores = [float(s) for s in scores]
    labels = [int(y) for y in labels]
    n_pos = sum(labels)
    points = [(0.0, 1.0)]
    for t in sorted(set(scores), reverse=True):
        tp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 1)
        fp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 0)
        points.append((tp / n_pos, tp / (tp + fp)))
    recalls = [r for r, _ in points]
    precisions = [p for _, p in points]
    return recalls, precisions


def trapezoid_scalar(ys: list[float], xs: list[float]) -> float:
    total = 0.0
    for i in range(1, len(xs)):
        total += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1])
    return total


def scalar_adam_trace(theta0: float, grads: list[float], lr: float = 1e-3,
                      beta1: float = 0.9, beta2: float = 0.999,
                      eps: float = 1e-8) -> list[float]:
    """Hand evaluation of the update equations on one scalar parameter."""
    m = 0.0
    v = 0.0
    theta = float(theta0)
    out = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)
        out.append(theta)
    return out


def check_layer_gradients(layer, x: np.ndarray, rng_factory=lambda: None,
                          h: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between analytic and finite-difference gradients.

    The scalar objective is sum(r * forward(x)) for a fixed random r, so the
    upstream gradient is exactly r. ``rng_factory`` must return an equivalent
    fresh Prng on every call (freezes dropout masks across evaluations).
    """
    out0, cache = layer.forward(x, train=True, rng=rng_factory())
    r = np.random.default_rng(seed).uniform(-1.0, 1.0, out0.shape)

    def scalar() -> float:
        y, _ = layer.forward(x, train=True, rng=rng_factory())
        return float((y * r).sum())

    gx, pgrads = layer.backward(cache, r)
    fd = finite_difference_grads(scalar, [x, *layer.params], h=h)
    errs = [relative_error(gx, fd[0])]
    errs.extend(relative_error(g, f) for g, f in zip(pgrads, fd[1:]))
    return max(errs)


def make_layer_case(kind: str, seed: int):
    """One random (layer, input, rng_factory) gradient-check instance.

    Inputs for kinked operations keep a margin around the kink: ReLU inputs
    stay away from 0, pooling inputs have pairwise-distinct values with gaps
    far above the finite-difference step.
    """
    from cxrnet import layers
    from cxrnet.tensor import Prng

    rng = np.random.default_rng(seed)
    no_rng = lambda: None
    if kind == "conv2d":
        b, c, o = rng.integers(1, 3), rng.integers(1, 3), rng.integers(1, 3)
        h, w = rng.integers(3, 7), rng.integers(3, 7)
        layer = layers.Conv2d(int(c), int(o), 3, rng=Prng(seed), dtype=np.float64)
        x = rng.uniform(-1, 1, (int(b), int(c), int(h), int(w)))
        return layer, x, no_rng
    if kind == "maxpool2x2":
        b, c = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        h, w = 2 * int(rng.integers(1, 4)), 2 * int(rng.integers(1, 4))
        x = rng.permutation(b * c * h * w).astype(np.float64).reshape(b, c, h, w) * 1e-2
        return layers.MaxPool2x2(), x, no_rng
    if kind == "flatten":
        x = rng.uniform(-1, 1, (2, int(rng.integers(1, 4)), 3, 3))
        return layers.Flatten(), x, no_rng
    if kind == "dense":
        b, fi, fo = int(rng.integers(1, 5)), int(rng.integers(1, 8)), int(rng.integers(1, 6))
        layer = layers.Dense(fi, fo, rng=Prng(seed), dtype=np.float64)
        return layer, rng.uniform(-1, 1, (b, fi)), no_rng
    if kind == "relu":
        u = rng.uniform(-1, 1, (3, 7))
        x = np.where(u >= 0, u + 0.1, u - 0.1)
        return layers.ReLU(), x, no_rng
    if kind == "sigmoid":
        return layers.Sigmoid(), rng.uniform(-3, 3, (3, 7)), no_rng
    if kind == "dropout":
        x = rng.uniform(-1, 1, (4, 9))
        return layers.Dropout(0.5), x, lambda: Prng(seed).derive(7)
    raise ValueError(kind)


LAYER_KINDS = ("conv2d", "maxpool2x2", "flatten", "dense", "relu", "sigmoid", "dropout")


def shrunk_model_grad_errors(seed: int, h: float = 1e-5) -> float:
    """Full-model FD check on a 16x16 two-sample variant, dropout disabled."""
    from cxrnet.layers import binary_cnn
    from cxrnet.optim import bce_loss
    from cxrnet.tensor import Prng

    net = binary_cnn(input_hw=(16, 16), conv_channels=(3, 4), dense_width=8,
                     dropout_rate=0.0, rng=Prng(seed), dtype=np.float64)
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, (2, 1, 16, 16))
    y = np.array([[0.0], [1.0]])

    def scalar() -> float:
        probs, _ = net.forward(x, train=True)
        return bce_loss(probs, y)[0]

    probs, caches = net.forward(x, train=True)
    _, grad = bce_loss(probs, y)
    analytic = net.backward(caches, grad)
    fd = finite_difference_grads(scalar, net.parameters(), h=h)
    return max(relative_error(a, n) for a, n in zip(analytic, fd))


def bilinear_reference(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Per-pixel scalar bilinear resize, half-pixel centers, clamp-to-edge."""
    h, w = img.shape
    out = np.zeros((out_h, out_w), dtype=np.float64)
    for i in range(out_h):
        for j in range(out_w):
            sy = min(max((i + 0.5) * h / out_h - 0.5, 0.0), h - 1.0)
            sx = min(max((j + 0.5) * w / out_w - 0.5, 0.0), w - 1.0)
            y0, x0 = int(math.floor(sy)), int(math.floor(sx))
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            fy, fx = sy - y0, sx - x0
            out[i, j] = ((1 - fy) * (1 - fx) * float(img[y0, x0])
                         + (1 - fy) * fx * float(img[y0, x1])
                         + fy * (1 - fx) * float(img[y1, x0])
                         + fy * fx * float(img[y1, x1]))
    return out
