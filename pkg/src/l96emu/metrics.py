"""Forecast-skill and climate metrics.

Time grids are in model time units (MTU); one MTU is ``STEPS_PER_MTU`` solver
steps. Row ``i`` of a rollout is the forecast ``i + 1`` steps after the
initial condition, so it sits at ``(i + 1) / STEPS_PER_MTU`` MTU.
"""
from dataclasses import dataclass

import numpy as np

from ._accel import USE_NUMBA, njit
from .errors import CapacityError, DegenerateDataError

__all__ = [
    "STEPS_PER_MTU",
    "ErrorCurve",
    "PdfEstimate",
    "relative_error_runs",
    "relative_error",
    "prediction_horizon",
    "windowed_error",
    "silverman_bandwidth",
    "kde_pdf",
    "quartile_pdfs",
    "sup_distance",
]

STEPS_PER_MTU = 200
_trapezoid = getattr(np, "trapezoid", None) or np.trapz
DEFAULT_THRESHOLD = 0.3
WINDOW_STEPS = 100


@dataclass
class ErrorCurve:
    times: np.ndarray
    e: np.ndarray
    n_ics: int = 1


@dataclass
class Horizon:
    time: float
    censored: bool

    def __float__(self):
        return float(self.time)


@dataclass
class PdfEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    n_samples: int

    def integral(self):
        return float(_trapezoid(self.density, self.grid))


def step_times(n_steps, steps_per_mtu=STEPS_PER_MTU):
    return np.arange(1, n_steps + 1) / steps_per_mtu


def relative_error_runs(true_runs, pred_runs):
    """Per-run error curves ``|X_true(t) - X_pred(t)| / <|X_true|>``.

    ``<|X_true|>`` is the time mean of the true norm over that run's window.
    Returns an array of shape ``(n_runs, n_steps)``.
    """
    true_runs = [np.asarray(t, dtype=np.float64) for t in true_runs]
    pred_runs = [np.asarray(p, dtype=np.float64) for p in pred_runs]
    if not true_runs or len(true_runs) != len(pred_runs):
        raise ValueError("need the same positive number of true and predicted runs")
    shape = true_runs[0].shape
    for t, p in zip(true_runs, pred_runs):
        if t.shape != shape or p.shape != shape:
            raise ValueError(f"run shapes differ: {t.shape} vs {p.shape}, expected {shape}")
    out = np.empty((len(true_runs), shape[0]))
    for r, (t, p) in enumerate(zip(true_runs, pred_runs)):
        scale = np.linalg.norm(t, axis=1).mean()
        if not scale > 0:
            raise DegenerateDataError(f"run {r}: true trajectory has zero mean norm")
        out[r] = np.linalg.norm(t - p, axis=1) / scale
    return out


def relative_error(true_runs, pred_runs, steps_per_mtu=STEPS_PER_MTU) -> ErrorCurve:
    """Run-averaged relative L2 error curve."""
    per_run = relative_error_runs(true_runs, pred_runs)
    return ErrorCurve(step_times(per_run.shape[1], steps_per_mtu),
                      per_run.mean(axis=0), per_run.shape[0])


def prediction_horizon(curve: ErrorCurve, threshold=DEFAULT_THRESHOLD) -> Horizon:
    """Time of the last grid point before ``e`` first reaches ``threshold``.

    A curve that starts at or above threshold has horizon 0. Never crossing
    gives the curve end, flagged as censored.
    """
    e = np.asarray(curve.e)
    times = np.asarray(curve.times)
    if e.size == 0:
        raise ValueError("empty error curve")
    hit = np.flatnonzero(e >= threshold)
    if hit.size == 0:
        return Horizon(float(times[-1]), True)
    if hit[0] == 0:
        return Horizon(0.0, False)
    return Horizon(float(times[hit[0] - 1]), False)


def windowed_error(curve: ErrorCurve, n_steps=WINDOW_STEPS) -> float:
    """Mean of the first ``n_steps + 1`` samples of ``e`` (0 to 0.5 MTU by default)."""
    e = np.asarray(curve.e)
    if e.size < n_steps + 1:
        raise CapacityError(f"curve has {e.size} samples, need {n_steps + 1}")
    return float(e[:n_steps + 1].mean())


# ---------------------------------------------------------------------------
# kernel density estimation


def silverman_bandwidth(samples) -> float:
    """Silverman's rule of thumb, rescaled to the Epanechnikov kernel's support.

    ``0.9 * min(sd, IQR / 1.34) * n^(-1/5)`` is the Gaussian-kernel rule; the
    factor ``(R(K_E) / R(K_G))^(1/5) * sd(K_G) / sd(K_E) ~ 2.214`` converts it to
    an Epanechnikov half-width with equivalent smoothing.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if not spread > 0:
        spread = sd
    return 2.214 * 0.9 * spread * x.size ** -0.2


@njit
def _epan_nb(sorted_x, grid, h):
    n = sorted_x.shape[0]
    out = np.zeros(grid.shape[0])
    for g in range(grid.shape[0]):
        lo = np.searchsorted(sorted_x, grid[g] - h)
        hi = np.searchsorted(sorted_x, grid[g] + h)
        acc = 0.0
        for i in range(lo, hi):
            u = (grid[g] - sorted_x[i]) / h
            acc += 1.0 - u * u
        out[g] = 0.75 * acc / (n * h)
    return out


def _epan_np(sorted_x, grid, h):
    n = sorted_x.shape[0]
    out = np.empty(grid.shape[0])
    lo = np.searchsorted(sorted_x, grid - h)
    hi = np.searchsorted(sorted_x, grid + h)
    for g in range(grid.shape[0]):
        u = (grid[g] - sorted_x[lo[g]:hi[g]]) / h
        out[g] = 0.75 * np.sum(1.0 - u * u) / (n * h)
    return out


_epan_kernel = _epan_nb if USE_NUMBA else _epan_np


def default_grid(samples, bandwidth, n_points=401):
    x = np.asarray(samples).ravel()
    return np.linspace(x.min() - 3 * bandwidth, x.max() + 3 * bandwidth, n_points)


def kde_pdf(samples, grid=None, bandwidth=None) -> PdfEstimate:
    """Epanechnikov kernel density estimate of scalar ``samples`` on ``grid``.

    The bandwidth defaults to ``silverman_bandwidth``; the grid to 401 points
    over ``[min - 3h, max + 3h]``. No renormalisation is applied: with a grid
    covering the support the density integrates to one by construction.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise CapacityError("kde needs at least 2 samples")
    if not x.std() > 0:
        raise DegenerateDataError("kde samples have zero variance")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    grid = default_grid(x, h) if grid is None else np.asarray(grid, dtype=np.float64)
    density = _epan_kernel(np.sort(x), grid, h)
    return PdfEstimate(grid, density, h, x.size)


def quartile_pdfs(series, n_quartiles=4, grid=None, bandwidth=None) -> list:
    """One pooled-component PDF per equal consecutive chunk of ``series``.

    Trailing rows that do not fill a whole chunk are dropped.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if n_quartiles < 1:
        raise ValueError("n_quartiles must be >= 1")
    chunk = x.shape[0] // n_quartiles
    if chunk < 1 or chunk * x.shape[1] < 2:
        raise CapacityError(f"{x.shape[0]} rows cannot fill {n_quartiles} chunks")
    return [kde_pdf(x[q * chunk:(q + 1) * chunk], grid, bandwidth)
            for q in range(n_quartiles)]


def sup_distance(a: PdfEstimate, b: PdfEstimate) -> float:
    if a.grid.shape != b.grid.shape or not np.array_equal(a.grid, b.grid):
        raise ValueError("PDFs must share a grid")
    return float(np.max(np.abs(a.density - b.density)))
