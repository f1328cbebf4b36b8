"""Binary cross-entropy loss, Adam, and reduce-on-plateau scheduling.

Adam runs the published defaults (beta1=0.9, beta2=0.999, eps=1e-8) at
learning rate 0.001 unless configured otherwise. The plateau scheduler
multiplies the rate by 0.1 after 3 epochs without a strictly lower
validation loss and never goes below 1e-5.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError, NumericError, ShapeError

# Probability clamp for the loss; prevents log(0) when a sigmoid saturates.
BCE_EPSILON = 1e-7


def bce_loss(predictions: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy over the batch and its gradient.

    loss = -(1/B) * sum(y*log(p~) + (1-y)*log(1-p~)) with p~ clamped to
    [BCE_EPSILON, 1 - BCE_EPSILON]. The gradient is the exact derivative of
    this clamped loss, so it is zero where the clamp is active.
    """
    if predictions.shape != targets.shape:
        raise ShapeError(f"predictions {predictions.shape} vs targets {targets.shape}")
    if not np.isfinite(predictions).all():
        raise NumericError("bce_loss received non-finite predictions")
    y = np.asarray(targets)
    if not np.isin(y, (0, 1)).all():
        raise InputError("targets must be 0 or 1")
    y = y.astype(predictions.dtype)
    b = predictions.shape[0]
    lo, hi = BCE_EPSILON, 1.0 - BCE_EPSILON
    p = np.clip(predictions, lo, hi)
    loss = float(-(y * np.log(p) + (1.0 - y) * np.log1p(-p)).sum() / b)
    inside = ((predictions > lo) & (predictions < hi)).astype(predictions.dtype)
    grad = inside * (p - y) / (p * (1.0 - p)) / b
    return loss, grad


class Adam:
    """Adam with bias correction, updating parameters in place.

    One (m, v) moment pair per parameter tensor; ``lr`` may be lowered
    between steps by the plateau scheduler.
    """

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0:
            raise InputError(f"learning rate must be non-negative, got {lr}")
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ShapeError(f"expected {len(self.params)} gradients, got {len(grads)}")
        for p, g in zip(self.params, grads):
            if p.shape != g.shape:
                raise ShapeError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for m, v, p, g in zip(self.m, self.v, self.params, grads):
            # in-place updates; the moment tensors are large for dense layers
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            denom = np.sqrt(v / c2)
            denom += self.eps
            update = m / c1
            update /= denom
            update *= self.lr
            p -= update.astype(p.dtype, copy=False)


class ReduceLROnPlateau:
    """Lower the learning rate when validation loss stops improving.

    Improvement means strictly lower than the best loss seen so far. After
    ``patience`` consecutive non-improving epochs the rate is multiplied by
    ``factor`` (floored at ``min_lr``) and the counter resets. Call
    ``update`` exactly once per completed epoch; it returns the rate to use
    for the next epoch. NaN losses count as no improvement and their epoch
    indices are recorded in ``nan_epochs``.
    """

    def __init__(self, initial_lr: float = 1e-3, factor: float = 0.1,
                 patience: int = 3, min_lr: float = 1e-5):
        if initial_lr <= 0 or not 0 < factor < 1 or patience < 1 or min_lr <= 0:
            raise InputError("invalid plateau scheduler configuration")
        self.lr = float(initial_lr)
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best = math.inf
        self.epochs_since_improvement = 0
        self.epochs_seen = 0
        self.nan_epochs: list[int] = []

    def update(self, epoch_val_loss: float) -> float:
        self.epochs_seen += 1
        loss = float(epoch_val_loss)
        if math.isnan(loss):
            self.nan_epochs.append(self.epochs_seen)
            improved = False
        else:
            improved = loss < self.best
        if improved:
            self.best = loss
            self.epochs_since_improvement = 0
        else:
            self.epochs_since_improvement += 1
            if self.epochs_since_improvement >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.epochs_since_improvement = 0
        return self.lr
