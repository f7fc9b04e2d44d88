"""Optimisers and the mini-batch epoch loop shared by the neural emulators."""
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError


class Sgd:
    def __init__(self, learning_rate=1e-3):
        self.learning_rate = learning_rate

    def step(self, params, grads):
        for key, g in grads.items():
            params[key] -= self.learning_rate * g


class Adam:
    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr = self.learning_rate * np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for key, g in grads.items():
            if key not in self.m:
                self.m[key] = np.zeros_like(g)
                self.v[key] = np.zeros_like(g)
            m, v = self.m[key], self.v[key]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            params[key] -= lr * m / (np.sqrt(v) + self.epsilon)


@dataclass
class TrainLog:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    stopped_early: bool = False

    @property
    def epochs(self):
        return len(self.train_loss)


def fit(params, inputs, targets, loss_and_grad, loss_only, optimizer, *,
        batch_size, epochs, seed, val_fraction=0.05, patience=3, min_delta=1e-5):
    """Shuffled mini-batch training with a tail validation split and early stop.

    The last ``val_fraction`` of the samples (in their given order) are held
    out. Training stops once the best validation loss has not improved by at
    least ``min_delta`` for ``patience`` consecutive epochs. ``train_loss`` is
    the sample-weighted mean of the batch losses seen during each epoch.
    """
    n = inputs.shape[0]
    n_val = int(round(n * val_fraction)) if val_fraction > 0 else 0
    if n - n_val < 1:
        raise ValueError("no training samples left after the validation split")
    x_tr, y_tr = inputs[:n - n_val], targets[:n - n_val]
    x_val, y_val = inputs[n - n_val:], targets[n - n_val:]
    rng = np.random.default_rng(seed)
    log = TrainLog()
    best = np.inf
    stale = 0
    for epoch in range(epochs):
        order = rng.permutation(x_tr.shape[0])
        total = 0.0
        for lo in range(0, order.size, batch_size):
            idx = order[lo:lo + batch_size]
            loss, grads = loss_and_grad(params, x_tr[idx], y_tr[idx])
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"training loss became {loss} in epoch {epoch}; "
                    "try a lower learning rate", step=epoch)
            total += loss * idx.size
            optimizer.step(params, grads)
        log.train_loss.append(total / order.size)
        if n_val:
            val = loss_only(params, x_val, y_val)
            log.val_loss.append(val)
            if val < best - min_delta:
                best = val
                stale = 0
            else:
                stale += 1
                if stale >= patience:
                    log.stopped_early = True
                    break
    return log
