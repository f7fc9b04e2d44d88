"""Stateless LSTM that maps a window of ``q`` past states to the next state.

Hidden and cell state are zeroed at the start of every window, in training
and in forecasting, so no information crosses window boundaries. Gate
weights are stored stacked in the order forget, input, candidate, output;
``W`` acts on the concatenation ``[h(t-1), x(t)]``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import optim
from .errors import DivergenceError

__all__ = ["LstmModel", "AdamConfig", "init_lstm", "cell_step", "forward_window",
           "loss_and_grad", "train", "rollout"]

GATES = ("f", "i", "c", "o")


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 100
    epochs: int = 30
    seed: int = 0
    val_fraction: float = 0.05
    patience: int = 3
    min_delta: float = 1e-5

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if not self.learning_rate > 0 or self.batch_size < 1:
            raise ValueError("learning_rate must be > 0 and batch_size >= 1")

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class LstmModel:
    d_h: int
    q: int
    K: int
    params: dict = field(repr=False)
    seed: int = 0

    def gate(self, name):
        """``(W, b)`` views for gate ``name`` in ``'f', 'i', 'c', 'o'``."""
        g = GATES.index(name)
        rows = slice(g * self.d_h, (g + 1) * self.d_h)
        return self.params["W"][rows], self.params["b"][rows]

    @property
    def W_oh(self):
        return self.params["W_oh"]


def init_lstm(K=8, d_h=50, q=3, seed=0, zero_readout=False) -> LstmModel:
    """Glorot-uniform gate and readout weights; forget-gate bias 1, others 0."""
    rng = np.random.default_rng(seed)
    n_in = d_h + K
    lim = np.sqrt(6.0 / (n_in + d_h))
    W = rng.uniform(-lim, lim, (4 * d_h, n_in))
    b = np.zeros(4 * d_h)
    b[:d_h] = 1.0
    lim_o = np.sqrt(6.0 / (d_h + K))
    W_oh = np.zeros((K, d_h)) if zero_readout else rng.uniform(-lim_o, lim_o, (K, d_h))
    return LstmModel(d_h, q, K, {"W": W, "b": b, "W_oh": W_oh}, seed)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _cell(params, d_h, h, C, x):
    hx = np.concatenate([h, x], axis=-1)
    z = hx @ params["W"].T + params["b"]
    f = _sigmoid(z[..., :d_h])
    i = _sigmoid(z[..., d_h:2 * d_h])
    c_hat = np.tanh(z[..., 2 * d_h:3 * d_h])
    o = _sigmoid(z[..., 3 * d_h:])
    C_new = f * C + i * c_hat
    tC = np.tanh(C_new)
    return o * tC, C_new, (hx, f, i, c_hat, o, C, tC)


def cell_step(model: LstmModel, h_prev, C_prev, x_t):
    """One LSTM cell update; returns ``(h, C)``."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1] != model.K or np.shape(h_prev)[-1] != model.d_h \
            or np.shape(C_prev)[-1] != model.d_h:
        raise ValueError("cell_step shape mismatch")
    h, C, _ = _cell(model.params, model.d_h, np.asarray(h_prev, float),
                    np.asarray(C_prev, float), x_t)
    return h, C


def _run(params, d_h, windows):
    lead = windows.shape[:-2]
    h = np.zeros(lead + (d_h,))
    C = np.zeros(lead + (d_h,))
    caches = []
    for t in range(windows.shape[-2]):
        h, C, cache = _cell(params, d_h, h, C, windows[..., t, :])
        caches.append(cache)
    return h @ params["W_oh"].T, h, caches


def forward_window(model: LstmModel, window) -> np.ndarray:
    """Prediction for one window ``(q, K)`` or a batch ``(B, q, K)``."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape[-2:] != (model.q, model.K):
        raise ValueError(f"window must end in shape ({model.q}, {model.K}), "
                         f"got {window.shape}")
    return _run(model.params, model.d_h, window)[0]


def loss_and_grad(params, windows, targets, d_h):
    """Mean-squared error and its gradient by backpropagation through the window."""
    pred, h, caches = _run(params, d_h, windows)
    r = pred - targets
    loss = float(np.mean(r * r))
    dpred = 2.0 * r / r.size
    grads = {"W_oh": dpred.T @ h, "W": np.zeros_like(params["W"]),
             "b": np.zeros_like(params["b"])}
    dh = dpred @ params["W_oh"]
    dC = np.zeros_like(dh)
    W = params["W"]
    for hx, f, i, c_hat, o, C_prev, tC in reversed(caches):
        do = dh * tC
        dC = dC + dh * o * (1.0 - tC * tC)
        df = dC * C_prev
        di = dC * c_hat
        dc = dC * i
        dz = np.concatenate([
            df * f * (1.0 - f),
            di * i * (1.0 - i),
            dc * (1.0 - c_hat * c_hat),
            do * o * (1.0 - o),
        ], axis=-1)
        grads["W"] += dz.T @ hx
        grads["b"] += dz.sum(axis=0)
        dhx = dz @ W
        dh = dhx[:, :d_h]
        dC = dC * f
    return loss, grads


def train(model: LstmModel, windows, targets, cfg: AdamConfig = AdamConfig()):
    """ADAM training on ``(window, next state)`` pairs with per-epoch shuffling."""
    windows = np.asarray(windows, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if windows.shape[1:] != (model.q, model.K) or targets.shape != (windows.shape[0], model.K):
        raise ValueError(f"expected windows (N, {model.q}, {model.K}) and targets "
                         f"(N, {model.K}); got {windows.shape}, {targets.shape}")
    d_h = model.d_h
    opt = optim.Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)

    def loss_only(p, w, y):
        r = _run(p, d_h, w)[0] - y
        return float(np.mean(r * r))

    log = optim.fit(
        model.params, windows, targets,
        lambda p, w, y: loss_and_grad(p, w, y, d_h), loss_only, opt,
        batch_size=cfg.batch_size, epochs=cfg.epochs, seed=cfg.seed,
        val_fraction=cfg.val_fraction, patience=cfg.patience, min_delta=cfg.min_delta,
    )
    return model, log


def rollout(model, seed_window, steps: int, predictor=None) -> np.ndarray:
    """Autoregressive forecast: predict, drop the oldest row, append, repeat.

    Accepts one seed window ``(q, K)`` or a batch ``(B, q, K)``. ``predictor``
    overrides the network (any callable mapping windows to next states).
    """
    f = predictor or (lambda w: forward_window(model, w))
    window = np.array(seed_window, dtype=np.float64)
    out = np.empty((steps,) + window.shape[:-2] + window.shape[-1:])
    for n in range(steps):
        nxt = np.asarray(f(window), dtype=np.float64)
        if not np.isfinite(nxt).all():
            part = out[:n] if out.ndim == 2 else out[:n].transpose(1, 0, 2)
            raise DivergenceError(f"LSTM rollout became non-finite at step {n + 1}",
                                  step=n + 1, partial=part.copy())
        out[n] = nxt
        window = np.concatenate([window[..., 1:, :], nxt[..., None, :]], axis=-2)
    return out if out.ndim == 2 else out.transpose(1, 0, 2)
