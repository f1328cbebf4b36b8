"""Verify analytic backpropagation against central finite differences.

The engine runs float32 in production; the identical code paths accept
float64, which is what makes numeric differentiation meaningful. This script
perturbs each weight of a small convolution layer and compares the measured
slope of a scalar objective with the layer's own backward pass.

Run: python demos/gradient_checking.py
"""

import numpy as np

from cxrnet.layers import Conv2d, binary_cnn
from cxrnet.optim import bce_loss
from cxrnet.tensor import Prng


def finite_difference(f, arr, h=1e-5):
    g = np.zeros_like(arr)
    flat, gflat = arr.ravel(), g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return g


def main():
    rng = np.random.default_rng(0)

    print("== single conv layer ==")
    layer = Conv2d(1, 2, 3, rng=Prng(0), dtype=np.float64)
    x = rng.uniform(-1, 1, (1, 1, 5, 5))
    y0, cache = layer.forward(x)
    r = rng.uniform(-1, 1, y0.shape)  # objective: sum(r * output)
    _, (gw, gb) = layer.backward(cache, r)

    def objective():
        y, _ = layer.forward(x)
        return float((y * r).sum())

    fd_w = finite_difference(objective, layer.weights)
    err = np.abs(gw - fd_w).max() / np.abs(fd_w).max()
    print(f"weight gradient: analytic vs numeric, relative error {err:.2e}")

    print("== composed model (16x16 variant, dropout off) ==")
    net = binary_cnn(input_hw=(16, 16), conv_channels=(3, 4), dense_width=8,
                     dropout_rate=0.0, rng=Prng(1), dtype=np.float64)
    xb = rng.uniform(0, 1, (2, 1, 16, 16))
    yb = np.array([[0.0], [1.0]])
    probs, caches = net.forward(xb, train=True)
    _, grad = bce_loss(probs, yb)
    analytic = net.backward(caches, grad)

    def loss():
        p, _ = net.forward(xb, train=True)
        return bce_loss(p, yb)[0]

    worst = 0.0
    for name, param, a in zip(["conv1.w", "conv1.b"], net.parameters()[:2], analytic[:2]):
        fd = finite_difference(loss, param)
        rel = np.abs(a - fd).max() / max(np.abs(fd).max(), 1e-12)
        worst = max(worst, rel)
        print(f"{name}: relative error {rel:.2e}")
    print(f"worst relative error {worst:.2e} (tolerance 1e-4)")


if __name__ == "__main__":
    main()
