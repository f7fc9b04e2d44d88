"""Echo state network with a sparse random reservoir and ridge readout.

The reservoir update is ``r <- tanh(A r + W_in x)``. A fixed nonlinear
transform of ``r`` feeds the linear readout ``W_out``, the only trained
weights. Closed-loop forecasting feeds each output back as the next input.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import blas
import scipy.sparse as sp

from ._accel import USE_NUMBA, njit
from .errors import DivergenceError, NumericalError

__all__ = [
    "TRANSFORMS",
    "EsnConfig",
    "EsnModel",
    "build",
    "erdos_renyi",
    "spectral_radius",
    "advance",
    "transform",
    "ridge_readout",
    "train",
    "predict",
    "forecast",
    "synchronise",
    "teacher_forced_error",
]

TRANSFORMS = {"identity": 0, "T1": 1, "T2": 2, "T3": 3}
TRAIN_CHUNK = 2000


@dataclass(frozen=True)
class EsnConfig:
    D: int = 2000
    rho: float = 0.1
    degree: float = 3.0
    input_scale: float = 0.1
    alpha: float = 1e-4
    transform: str = "T2"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")
        if self.degree < 1 or self.degree > self.D:
            raise ValueError(f"degree must be in [1, D], got {self.degree}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.input_scale < 0:
            raise ValueError("input_scale must be >= 0")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}; "
                             f"choose from {sorted(TRANSFORMS)}")
        if self.transform in ("T2", "T3") and self.D < 3:
            raise ValueError("T2/T3 need D >= 3")

    def to_dict(self):
        return {
            "D": self.D, "rho": self.rho, "degree": self.degree,
            "input_scale": self.input_scale, "alpha": self.alpha,
            "transform": self.transform, "seed": self.seed,
        }


@dataclass
class EsnModel:
    config: EsnConfig
    A: sp.csr_matrix = field(repr=False)
    W_in: np.ndarray = field(repr=False)
    W_out: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)

    @property
    def D(self):
        return self.config.D

    @property
    def K(self):
        return self.W_in.shape[1]

    def reset(self):
        self.r = np.zeros(self.D)


def _freeze(a):
    a.flags.writeable = False
    return a


def erdos_renyi(D, degree, rng) -> sp.csr_matrix:
    """Directed G(D, degree/D) graph with U[-1, 1] weights on its edges."""
    p = degree / D
    counts = rng.binomial(D, p, size=D)
    cols = [np.sort(rng.choice(D, c, replace=False)) for c in counts]
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    indices = np.concatenate(cols).astype(np.int64) if cols else np.empty(0, np.int64)
    data = rng.uniform(-1.0, 1.0, indices.size)
    return sp.csr_matrix((data, indices, indptr), shape=(D, D))


def spectral_radius(A, block=8, tol=1e-10, max_iter=20000, seed=0) -> float:
    """Largest eigenvalue modulus by block power (subspace) iteration.

    A block rather than a single vector is iterated because the dominant
    eigenvalues of a real random matrix usually come as a complex pair, which
    stalls plain power iteration. The modulus is read off the Ritz values.
    """
    D = A.shape[0]
    b = min(block, D)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((D, b)))
    history = []
    for it in range(max_iter):
        Z = A @ Q
        est = float(np.abs(np.linalg.eigvals(Q.T @ Z)).max())
        if not np.isfinite(est):
            raise NumericalError(f"power iteration produced {est} at iteration {it}")
        Q, _ = np.linalg.qr(Z)
        history.append(est)
        if len(history) > 10 and abs(est - history[-11]) <= tol * max(est, 1e-300):
            return est
    raise NumericalError(f"power iteration did not converge in {max_iter} iterations "
                         f"(last estimates {history[-3:]})")


def build(config: EsnConfig, K: int = 8) -> EsnModel:
    """Draw the reservoir and input weights; readout and state start at zero."""
    rng = np.random.default_rng(config.seed)
    A = erdos_renyi(config.D, config.degree, rng)
    lam = spectral_radius(A, seed=config.seed)
    if not lam > 0:
        raise NumericalError("reservoir matrix is nilpotent (spectral radius 0); "
                             "increase degree or change seed")
    A = A * (config.rho / lam)
    A.sort_indices()
    W_in = rng.uniform(-config.input_scale, config.input_scale, (config.D, K))
    for arr in (A.data, A.indices, A.indptr):
        _freeze(arr)
    return EsnModel(config, A, _freeze(W_in), np.zeros((K, config.D)), np.zeros(config.D))


# ---------------------------------------------------------------------------
# transforms


def transform(r, kind):
    """Nonlinear feature map applied along the last axis of ``r``.

    With 1-based column ``j``: T1 squares odd ``j``; T2 replaces odd ``j > 1`` by
    ``r[j-1] * r[j-2]``; T3 by ``r[j-1] * r[j+1]`` (``j+1`` wraps to column 1).
    All other columns pass through.
    """
    code = TRANSFORMS[kind] if isinstance(kind, str) else int(kind)
    r = np.asarray(r, dtype=np.float64)
    out = r.copy()
    D = r.shape[-1]
    if code == 1:
        out[..., 0::2] = r[..., 0::2] ** 2
    elif code in (2, 3):
        if D < 3:
            raise ValueError("T2/T3 need at least 3 columns")
        m = np.arange(2, D, 2)
        if code == 2:
            out[..., m] = r[..., m - 1] * r[..., m - 2]
        else:
            out[..., m] = r[..., m - 1] * r[..., (m + 1) % D]
    elif code != 0:
        raise ValueError(f"unknown transform code {code}")
    return out


@njit
def _transform_into(r, out, code):
    D = r.shape[0]
    for j in range(D):
        out[j] = r[j]
    if code == 1:
        for j in range(0, D, 2):
            out[j] = r[j] * r[j]
    elif code == 2:
        for j in range(2, D, 2):
            out[j] = r[j - 1] * r[j - 2]
    elif code == 3:
        for j in range(2, D, 2):
            out[j] = r[j - 1] * r[(j + 1) % D]


# ---------------------------------------------------------------------------
# reservoir kernels


@njit(fastmath=True)
def _tanh(v):
    # libm tanh is ~2x slower than this inside the per-step loop
    e = np.exp(-2.0 * abs(v))
    t = (1.0 - e) / (1.0 + e)
    return t if v >= 0 else -t


@njit
def _step_nb(indptr, indices, data, u, r, buf):
    D = r.shape[0]
    for i in range(D):
        acc = u[i]
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * r[indices[p]]
        buf[i] = acc
    for i in range(D):
        r[i] = _tanh(buf[i])


@njit(nogil=True)
def _drive_nb(indptr, indices, data, U, r, states):
    # U holds the precomputed input drive W_in @ x for each row
    buf = np.empty(r.shape[0])
    for n in range(U.shape[0]):
        _step_nb(indptr, indices, data, U[n], r, buf)
        states[n, :] = r


@njit(nogil=True)
def _rollout_nb(indptr, indices, data, W_in, W_out, r, x0, code, out):
    D = r.shape[0]
    K = x0.shape[0]
    buf = np.empty(D)
    feat = np.empty(D)
    u = np.empty(D)
    x = x0.copy()
    for n in range(out.shape[0]):
        for i in range(D):
            acc = 0.0
            for k in range(K):
                acc += W_in[i, k] * x[k]
            u[i] = acc
        _step_nb(indptr, indices, data, u, r, buf)
        _transform_into(r, feat, code)
        ok = True
        for k in range(K):
            acc = 0.0
            for j in range(D):
                acc += W_out[k, j] * feat[j]
            x[k] = acc
            if not np.isfinite(acc):
                ok = False
        out[n, :] = x
        if not ok:
            return n + 1
    return 0


def _drive_np(A, U, r, states):
    for n in range(U.shape[0]):
        r[:] = np.tanh(A @ r + U[n])
        states[n] = r


def _rollout_np(A, W_in, W_out, r, x0, code, out):
    x = x0.copy()
    for n in range(out.shape[0]):
        r[:] = np.tanh(A @ r + W_in @ x)
        x = W_out @ transform(r, code)
        out[n] = x
        if not np.isfinite(x).all():
            return n + 1
    return 0


def _drive(model, X, states):
    U = X @ model.W_in.T
    if USE_NUMBA:
        A = model.A
        _drive_nb(A.indptr, A.indices, A.data, U, model.r, states)
    else:
        _drive_np(model.A, U, model.r, states)


def advance(model: EsnModel, x) -> np.ndarray:
    """One reservoir update driven by input ``x``; returns the new state."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.K,):
        raise ValueError(f"input must have shape ({model.K},), got {x.shape}")
    states = np.empty((1, model.D))
    _drive(model, x[None, :], states)
    return model.r


def teacher_force(model: EsnModel, X) -> np.ndarray:
    """Drive the reservoir with the rows of ``X``; returns every visited state."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    states = np.empty((X.shape[0], model.D))
    _drive(model, X, states)
    return states


# ---------------------------------------------------------------------------
# training


def ridge_readout(gram, cross, alpha):
    """Solve ``W (G + alpha I) = C^T`` for ``W`` given ``G = R^T R``, ``C = R^T Y``."""
    G = np.array(gram, dtype=np.float64)
    G[np.diag_indices_from(G)] += alpha
    try:
        cf = scipy.linalg.cho_factor(G, lower=False, check_finite=True)
    except np.linalg.LinAlgError as exc:
        hint = " (use alpha > 0)" if alpha == 0 else ""
        raise NumericalError(f"normal matrix is not positive definite{hint}") from exc
    return scipy.linalg.cho_solve(cf, np.asarray(cross, dtype=np.float64)).T


def normal_equations(model: EsnModel, X, chunk=TRAIN_CHUNK):
    """Accumulate ``R~^T R~`` and ``R~^T Y`` over a teacher-forced pass.

    Starts from ``r = 0``; the state produced by ingesting ``X[n]`` is paired
    with target ``X[n+1]``. Leaves ``model.r`` at the state after ``X[-2]``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.K:
        raise ValueError(f"training series must be (N, {model.K}), got {X.shape}")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training samples")
    model.reset()
    D = model.D
    gram = np.zeros((D, D), order="F")
    cross = np.zeros((D, model.K))
    n_pairs = X.shape[0] - 1
    states = np.empty((min(chunk, n_pairs), D))
    for lo in range(0, n_pairs, chunk):
        hi = min(lo + chunk, n_pairs)
        block = states[:hi - lo]
        _drive(model, X[lo:hi], block)
        feats = transform(block, model.config.transform)
        # upper triangle only; mirrored below
        gram = blas.dsyrk(1.0, feats, beta=1.0, c=gram, trans=1, overwrite_c=1)
        cross += feats.T @ X[lo + 1:hi + 1]
    iu = np.triu_indices(D, 1)
    gram[(iu[1], iu[0])] = gram[iu]
    return gram, cross


def train(model: EsnModel, X, alpha=None) -> np.ndarray:
    """Fit the readout on a standardized training series by ridge regression."""
    alpha = model.config.alpha if alpha is None else alpha
    gram, cross = normal_equations(model, X)
    model.W_out = ridge_readout(gram, cross, alpha)
    return model.W_out


# ---------------------------------------------------------------------------
# prediction


def predict(model: EsnModel, x0, steps: int, r=None) -> np.ndarray:
    """Closed-loop forecast of ``steps`` rows, starting by ingesting ``x0``.

    Continues from reservoir state ``r`` (default: the model's own state),
    which is updated in place.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (model.K,):
        raise ValueError(f"x0 must have shape ({model.K},), got {x0.shape}")
    r = model.r if r is None else r
    out = np.empty((steps, model.K))
    code = TRANSFORMS[model.config.transform]
    if USE_NUMBA:
        A = model.A
        bad = _rollout_nb(A.indptr, A.indices, A.data, model.W_in,
                          np.ascontiguousarray(model.W_out), r, x0, code, out)
    else:
        bad = _rollout_np(model.A, model.W_in, model.W_out, r, x0, code, out)
    if bad:
        raise DivergenceError(f"ESN forecast became non-finite at step {bad}",
                              step=int(bad), partial=out[:bad - 1].copy())
    return out


def synchronise(model: EsnModel, history) -> np.ndarray:
    """Private reservoir state after teacher-forcing ``history`` from ``r = 0``."""
    r = np.zeros(model.D)
    history = np.ascontiguousarray(history, dtype=np.float64)
    if history.shape[0]:
        states = np.empty((history.shape[0], model.D))
        U = history @ model.W_in.T
        if USE_NUMBA:
            A = model.A
            _drive_nb(A.indptr, A.indices, A.data, U, r, states)
        else:
            _drive_np(model.A, U, r, states)
    return r


def forecast(model: EsnModel, history, steps: int) -> np.ndarray:
    """Synchronise on ``history[:-1]`` from rest, then forecast from ``history[-1]``.

    Row 0 of the result forecasts the sample after ``history[-1]``. The
    model's own state is left untouched, so calls may run concurrently.
    """
    history = np.asarray(history, dtype=np.float64)
    r = synchronise(model, history[:-1])
    return predict(model, history[-1], steps, r=r)


def teacher_forced_error(model: EsnModel, X, warmup=None) -> float:
    """RMS one-step error with the true series as input.

    ``warmup`` rows (if given) are fed first and not scored.
    """
    model.reset()
    if warmup is not None and len(warmup):
        teacher_force(model, warmup)
    X = np.asarray(X, dtype=np.float64)
    states = teacher_force(model, X[:-1])
    pred = transform(states, model.config.transform) @ model.W_out.T
    return float(np.sqrt(np.mean((pred - X[1:]) ** 2)))
