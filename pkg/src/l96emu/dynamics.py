"""Three-tier Lorenz 96 system and its fixed-step RK4 integrator.

The slow variable ``X`` has ``K`` elements, each driving ``J`` intermediate
``Y`` elements, each of which drives ``I`` fast ``Z`` elements. ``Y`` and
``Z`` are each treated as a single cyclic ring of length ``K*J`` and
``K*J*I`` (flattened with the child index running fastest), so the
neighbours of ``Y[j, k]`` at ``j = J-1`` are the first children of
``X[k+1]``.

Internally the state is one flat float64 vector ``[X, Y, Z]``; the
``FullState`` dataclass is the public view.
"""
from dataclasses import dataclass, field

import numpy as np

from ._accel import USE_NUMBA, njit
from .errors import DivergenceError

__all__ = [
    "ModelParams",
    "FullState",
    "Tendency",
    "tendency",
    "rk4_step",
    "random_initial_state",
    "generate_trajectory",
    "Trajectory",
]


@dataclass(frozen=True)
class ModelParams:
    F: float = 20.0
    # linear damping of X; 0 drops the -X_k term (not integrable at dt=0.005)
    a: float = 1.0
    b: float = 10.0
    c: float = 10.0
    d: float = 10.0
    e: float = 10.0
    g: float = 10.0
    h: float = 1.0
    K: int = 8
    J: int = 8
    I: int = 8

    def __post_init__(self):
        if self.b == 0 or self.d == 0:
            raise ValueError("b and d must be nonzero")
        if min(self.K, self.J, self.I) < 1:
            raise ValueError("K, J, I must be positive")
        # the advection stencils reach two neighbours back and one forward
        if self.K < 4 or self.K * self.J < 4 or self.K * self.J * self.I < 4:
            raise ValueError("each ring needs at least 4 elements")

    @property
    def sizes(self):
        return self.K, self.K * self.J, self.K * self.J * self.I

    @property
    def n_state(self):
        return sum(self.sizes)

    def as_tuple(self):
        return (self.F, self.a, self.b, self.c, self.d, self.e, self.g, self.h)

    def to_dict(self):
        return {
            "F": self.F, "a": self.a, "b": self.b, "c": self.c, "d": self.d,
            "e": self.e,
            "g": self.g, "h": self.h, "K": self.K, "J": self.J, "I": self.I,
        }


@dataclass
class FullState:
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y, dtype=np.float64)
        self.Z = np.asarray(self.Z, dtype=np.float64)

    def check(self, params: ModelParams):
        nx, ny, nz = params.sizes
        if self.X.shape != (nx,) or self.Y.shape != (ny,) or self.Z.shape != (nz,):
            raise ValueError(
                f"state shapes {self.X.shape}, {self.Y.shape}, {self.Z.shape} "
                f"do not match params (K={params.K}, J={params.J}, I={params.I})"
            )

    def flat(self):
        return np.concatenate([self.X, self.Y, self.Z])

    @classmethod
    def from_flat(cls, v, params: ModelParams):
        nx, ny, _ = params.sizes
        v = np.asarray(v, dtype=np.float64)
        return cls(v[:nx].copy(), v[nx:nx + ny].copy(), v[nx + ny:].copy())

    @classmethod
    def zeros(cls, params: ModelParams):
        nx, ny, nz = params.sizes
        return cls(np.zeros(nx), np.zeros(ny), np.zeros(nz))


@dataclass
class Tendency:
    dX: np.ndarray
    dY: np.ndarray
    dZ: np.ndarray


# ---------------------------------------------------------------------------
# kernels


@njit
def _tendency_nb(s, out, K, J, I, F, a, b, c, d, e, g, h):
    ny = K * J
    nz = ny * I
    oy = K
    oz = K + ny
    cxy = h * c / b
    cyz = h * e / d
    for k in range(K):
        acc = 0.0
        for j in range(J):
            acc += s[oy + k * J + j]
        out[k] = (s[(k - 1) % K] * (s[(k + 1) % K] - s[(k - 2) % K])
                  - a * s[k] + F - cxy * acc)
    for m in range(ny):
        acc = 0.0
        for i in range(I):
            acc += s[oz + m * I + i]
        out[oy + m] = (-c * b * s[oy + (m + 1) % ny]
                       * (s[oy + (m + 2) % ny] - s[oy + (m - 1) % ny])
                       - c * s[oy + m] + cxy * s[m // J] - cyz * acc)
    for n in range(nz):
        out[oz + n] = (e * d * s[oz + (n - 1) % nz]
                       * (s[oz + (n + 1) % nz] - s[oz + (n - 2) % nz])
                       - g * e * s[oz + n] + cyz * s[oy + n // I])


def _tendency_np(s, out, K, J, I, F, a, b, c, d, e, g, h):
    ny = K * J
    x = s[:K]
    y = s[K:K + ny]
    z = s[K + ny:]
    cxy = h * c / b
    cyz = h * e / d
    out[:K] = (np.roll(x, 1) * (np.roll(x, -1) - np.roll(x, 2)) - a * x + F
               - cxy * y.reshape(K, J).sum(axis=1))
    out[K:K + ny] = (-c * b * np.roll(y, -1) * (np.roll(y, -2) - np.roll(y, 1))
                     - c * y + cxy * np.repeat(x, J)
                     - cyz * z.reshape(ny, I).sum(axis=1))
    out[K + ny:] = (e * d * np.roll(z, 1) * (np.roll(z, -1) - np.roll(z, 2))
                    - g * e * z + cyz * np.repeat(y, I))


@njit
def _rk4_nb(s, dt, k1, k2, k3, k4, tmp, K, J, I, F, a, b, c, d, e, g, h):
    n = s.shape[0]
    _tendency_nb(s, k1, K, J, I, F, a, b, c, d, e, g, h)
    for q in range(n):
        tmp[q] = s[q] + 0.5 * dt * k1[q]
    _tendency_nb(tmp, k2, K, J, I, F, a, b, c, d, e, g, h)
    for q in range(n):
        tmp[q] = s[q] + 0.5 * dt * k2[q]
    _tendency_nb(tmp, k3, K, J, I, F, a, b, c, d, e, g, h)
    for q in range(n):
        tmp[q] = s[q] + dt * k3[q]
    _tendency_nb(tmp, k4, K, J, I, F, a, b, c, d, e, g, h)
    ok = True
    for q in range(n):
        s[q] += dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
        if not np.isfinite(s[q]):
            ok = False
    return ok


def _rk4_np(s, dt, k1, k2, k3, k4, tmp, K, J, I, F, a, b, c, d, e, g, h):
    args = (K, J, I, F, a, b, c, d, e, g, h)
    _tendency_np(s, k1, *args)
    np.add(s, 0.5 * dt * k1, out=tmp)
    _tendency_np(tmp, k2, *args)
    np.add(s, 0.5 * dt * k2, out=tmp)
    _tendency_np(tmp, k3, *args)
    np.add(s, dt * k3, out=tmp)
    _tendency_np(tmp, k4, *args)
    s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return bool(np.isfinite(s).all())


@njit
def _integrate_nb(s, dt, n_spin, n_steps, out_x, K, J, I, F, a, b, c, d, e, g, h):
    """Advance ``s`` in place; record X after each post-spin-up step.

    Returns the 1-based index of the first non-finite step, or 0.
    """
    n = s.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    for t in range(n_spin + n_steps):
        if not _rk4_nb(s, dt, k1, k2, k3, k4, tmp, K, J, I, F, a, b, c, d, e, g, h):
            return t + 1
        if t >= n_spin:
            out_x[t - n_spin, :] = s[:K]
    return 0


def _integrate_np(s, dt, n_spin, n_steps, out_x, K, J, I, F, a, b, c, d, e, g, h):
    bufs = [np.empty_like(s) for _ in range(5)]
    for t in range(n_spin + n_steps):
        if not _rk4_np(s, dt, *bufs, K, J, I, F, a, b, c, d, e, g, h):
            return t + 1
        if t >= n_spin:
            out_x[t - n_spin, :] = s[:K]
    return 0


if USE_NUMBA:
    _tendency_kernel, _rk4_kernel, _integrate_kernel = _tendency_nb, _rk4_nb, _integrate_nb
else:
    _tendency_kernel, _rk4_kernel, _integrate_kernel = _tendency_np, _rk4_np, _integrate_np


# ---------------------------------------------------------------------------
# public API


def _dims(params: ModelParams):
    return (params.K, params.J, params.I) + tuple(float(v) for v in params.as_tuple())


def tendency(state: FullState, params: ModelParams) -> Tendency:
    """Right-hand side of the three coupled equations at ``state``."""
    state.check(params)
    s = state.flat()
    out = np.empty_like(s)
    _tendency_kernel(s, out, *_dims(params))
    nx, ny, _ = params.sizes
    return Tendency(out[:nx], out[nx:nx + ny], out[nx + ny:])


def rk4_step(state: FullState, params: ModelParams, dt: float) -> FullState:
    """One classical fourth-order Runge-Kutta step of size ``dt``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    state.check(params)
    s = state.flat()
    bufs = [np.empty_like(s) for _ in range(5)]
    if not _rk4_kernel(s, float(dt), *bufs, *_dims(params)):
        raise DivergenceError("RK4 step produced non-finite values at step 1", step=1)
    return FullState.from_flat(s, params)


def random_initial_state(params: ModelParams, rng) -> FullState:
    """X near the forcing value, Y and Z small; all perturbations uniform."""
    nx, ny, nz = params.sizes
    X = params.F + rng.uniform(-1.0, 1.0, nx) * 0.01
    Y = rng.uniform(-0.01, 0.01, ny)
    Z = rng.uniform(-0.01, 0.01, nz)
    return FullState(X, Y, Z)


@dataclass
class Trajectory:
    """Recorded slow variable plus the full state at the end of the run."""

    X: np.ndarray
    dt: float
    final_state: FullState
    params: ModelParams = field(default_factory=ModelParams)


def generate_trajectory(init: FullState, params: ModelParams, dt: float,
                        n_steps: int, spinup_steps: int = 2000) -> Trajectory:
    """Integrate from ``init``, discard ``spinup_steps``, record X for ``n_steps``.

    Row ``t`` of the returned ``X`` is the slow state after ``spinup_steps + t + 1``
    steps.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if spinup_steps < 0:
        raise ValueError("spinup_steps must be >= 0")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    init.check(params)
    s = init.flat()
    out = np.empty((n_steps, params.K))
    bad = _integrate_kernel(s, float(dt), int(spinup_steps), int(n_steps), out,
                            *_dims(params))
    if bad:
        raise DivergenceError(f"integration blew up at step {bad}", step=int(bad))
    return Trajectory(out, float(dt), FullState.from_flat(s, params), params)


def x_separation(state: FullState, params: ModelParams, dt: float, n_steps: int,
                 delta: float = 1e-8, component: int = 0) -> np.ndarray:
    """Relative X separation between ``state`` and a twin nudged by ``delta``.

    Returns ``|X' - X| / |X|`` after each of ``n_steps`` steps. The twin differs
    only in ``X[component]``.
    """
    state.check(params)
    a = state.flat()
    b = a.copy()
    b[component] += delta
    bufs = [np.empty_like(a) for _ in range(5)]
    dims = _dims(params)
    nx = params.K
    out = np.empty(n_steps)
    for t in range(n_steps):
        ok_a = _rk4_kernel(a, float(dt), *bufs, *dims)
        ok_b = _rk4_kernel(b, float(dt), *bufs, *dims)
        if not (ok_a and ok_b):
            raise DivergenceError(f"integration blew up at step {t + 1}", step=t + 1)
        out[t] = np.linalg.norm(b[:nx] - a[:nx]) / np.linalg.norm(a[:nx])
    return out
