"""Feed-forward emulator of the one-step increment ``X(t+dt) - X(t)``.

A tanh MLP maps ``X(t)`` to the increment; forecasts close the loop with the
two-step Adams-Bashforth rule ``X+ = X + (3 dX_now - dX_prev) / 2``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import optim
from .errors import DivergenceError

__all__ = ["MlpModel", "SgdConfig", "init_mlp", "forward", "loss_and_grad",
           "train", "rollout"]

DEFAULT_HIDDEN = (100, 100, 100, 100)


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 1e-3
    batch_size: int = 100
    loss: str = "mae"
    epochs: int = 30
    seed: int = 0
    val_fraction: float = 0.05
    patience: int = 3
    min_delta: float = 1e-5

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss not in ("mae", "mse"):
            raise ValueError(f"loss must be 'mae' or 'mse', got {self.loss!r}")

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class MlpModel:
    """Weights ``W{l}`` have shape ``(fan_in, fan_out)``; hidden layers use tanh."""

    widths: tuple
    params: dict = field(repr=False)
    seed: int = 0

    @property
    def n_layers(self):
        return len(self.widths) - 1

    @property
    def K(self):
        return self.widths[0]


def init_mlp(K=8, hidden=DEFAULT_HIDDEN, seed=0) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    widths = (K, *hidden, K)
    rng = np.random.default_rng(seed)
    params = {}
    for l, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        limit = np.sqrt(6.0 / (n_in + n_out))
        params[f"W{l}"] = rng.uniform(-limit, limit, (n_in, n_out))
        params[f"b{l}"] = np.zeros(n_out)
    return MlpModel(widths, params, seed)


def _forward(params, n_layers, x):
    acts = [x]
    a = x
    for l in range(n_layers):
        z = a @ params[f"W{l}"] + params[f"b{l}"]
        a = np.tanh(z) if l < n_layers - 1 else z
        acts.append(a)
    return acts


def forward(model: MlpModel, x) -> np.ndarray:
    """Increment prediction for one state ``(K,)`` or a batch ``(B, K)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.K:
        raise ValueError(f"input width {x.shape[-1]} != {model.K}")
    return _forward(model.params, model.n_layers, x)[-1]


def _loss(pred, y, kind):
    r = pred - y
    if kind == "mae":
        return float(np.mean(np.abs(r))), np.sign(r) / r.size
    return float(np.mean(r * r)), 2.0 * r / r.size


def loss_and_grad(params, x, y, n_layers, kind="mae"):
    acts = _forward(params, n_layers, x)
    loss, delta = _loss(acts[-1], y, kind)
    grads = {}
    for l in range(n_layers - 1, -1, -1):
        grads[f"W{l}"] = acts[l].T @ delta
        grads[f"b{l}"] = delta.sum(axis=0)
        if l:
            delta = (delta @ params[f"W{l}"].T) * (1.0 - acts[l] ** 2)
    return loss, grads


def train(model: MlpModel, x, dx, cfg: SgdConfig = SgdConfig(), optimizer=None):
    """Mini-batch training on ``(X(t), dX(t))`` pairs; plain SGD unless given."""
    x = np.asarray(x, dtype=np.float64)
    dx = np.asarray(dx, dtype=np.float64)
    if x.shape != dx.shape or x.shape[-1] != model.K:
        raise ValueError(f"pairs must both be (N, {model.K}); got {x.shape}, {dx.shape}")
    n_layers = model.n_layers
    opt = optimizer or optim.Sgd(cfg.learning_rate)
    log = optim.fit(
        model.params, x, dx,
        lambda p, a, b: loss_and_grad(p, a, b, n_layers, cfg.loss),
        lambda p, a, b: _loss(_forward(p, n_layers, a)[-1], b, cfg.loss)[0],
        opt, batch_size=cfg.batch_size, epochs=cfg.epochs, seed=cfg.seed,
        val_fraction=cfg.val_fraction, patience=cfg.patience,
        min_delta=cfg.min_delta,
    )
    return model, log


def rollout(model, x0, steps: int, increment=None) -> np.ndarray:
    """Adams-Bashforth forecast from ``x0``; accepts ``(K,)`` or ``(B, K)``.

    The first step has no previous increment and reuses the current one,
    which reduces to forward Euler. ``increment`` overrides the network (any
    callable mapping states to increments).
    """
    f = increment or (lambda s: forward(model, s))
    x = np.array(x0, dtype=np.float64)
    out = np.empty((steps,) + x.shape)
    prev = None
    for n in range(steps):
        dx = np.asarray(f(x), dtype=np.float64)
        if prev is None:
            prev = dx
        x = x + 0.5 * (3.0 * dx - prev)
        prev = dx
        out[n] = x
        if not np.isfinite(x).all():
            part = out[:n] if out.ndim == 2 else out[:n].transpose(1, 0, 2)
            raise DivergenceError(f"ANN rollout became non-finite at step {n + 1}",
                                  step=n + 1, partial=part.copy())
    return out if out.ndim == 2 else out.transpose(1, 0, 2)
