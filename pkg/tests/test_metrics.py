import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from l96emu import metrics as m
from l96emu.errors import CapacityError, DegenerateDataError


def _curve(e):
    e = np.asarray(e, dtype=float)
    return m.ErrorCurve(m.step_times(e.size), e)


def test_perfect_prediction_zero_error():
    rng = np.random.default_rng(0)
    t = rng.normal(size=(50, 8))
    c = m.relative_error([t, t + 1], [t, t + 1])
    assert not c.e.any() and c.n_ics == 2


def test_zero_prediction_normalisation_identity():
    rng = np.random.default_rng(1)
    t = rng.normal(size=(2000, 8))
    c = m.relative_error([t], [np.zeros_like(t)])
    np.testing.assert_allclose(c.e, np.linalg.norm(t, axis=1) / np.linalg.norm(t, axis=1).mean())
    assert c.e.mean() == pytest.approx(1.0, abs=1e-12)


def test_two_run_hand_oracle():
    t1 = np.array([[3.0, 4.0], [0.0, 1.0]])
    p1 = np.array([[3.0, 3.0], [1.0, 1.0]])
    t2 = np.array([[1.0, 0.0], [0.0, 2.0]])
    p2 = np.array([[0.0, 0.0], [0.0, 0.0]])
    # run 1: mean true norm (5 + 1) / 2 = 3; errors 1/3, 1/3
    # run 2: mean true norm (1 + 2) / 2 = 1.5; errors 1/1.5, 2/1.5
    want = [(1 / 3 + 1 / 1.5) / 2, (1 / 3 + 2 / 1.5) / 2]
    c = m.relative_error([t1, t2], [p1, p2])
    np.testing.assert_allclose(c.e, want, rtol=0, atol=1e-12)
    np.testing.assert_allclose(c.times, [0.005, 0.010])


def test_zero_truth_degenerate():
    with pytest.raises(DegenerateDataError):
        m.relative_error([np.zeros((3, 2))], [np.ones((3, 2))])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), n_runs=st.integers(2, 6))
def test_error_invariant_under_run_relabeling(seed, n_runs):
    rng = np.random.default_rng(seed)
    t = [rng.normal(size=(20, 4)) for _ in range(n_runs)]
    p = [rng.normal(size=(20, 4)) for _ in range(n_runs)]
    perm = rng.permutation(n_runs)
    a = m.relative_error(t, p).e
    b = m.relative_error([t[i] for i in perm], [p[i] for i in perm]).e
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=0)


def test_horizon_constant_above_threshold():
    assert m.prediction_horizon(_curve(np.full(400, 0.5))).time == 0.0


def test_horizon_linear_ramp():
    e = m.step_times(400)  # e = t, reaches 1 at 1 MTU
    h = m.prediction_horizon(_curve(e))
    assert abs(h.time - 0.3) <= 1 / 200 + 1e-12 and not h.censored


def test_horizon_censored():
    h = m.prediction_horizon(_curve(np.full(300, 0.1)))
    assert h.censored and h.time == pytest.approx(1.5)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(0.01, 2.0), b=st.floats(0.01, 2.0))
def test_horizon_monotone_in_threshold(seed, a, b):
    e = np.cumsum(np.random.default_rng(seed).uniform(0, 0.01, 500))
    lo, hi = sorted((a, b))
    assert m.prediction_horizon(_curve(e), lo).time <= m.prediction_horizon(_curve(e), hi).time


def test_windowed_error_constant_and_ramp():
    assert m.windowed_error(_curve(np.full(2000, 0.7))) == pytest.approx(0.7)
    ramp = np.concatenate([np.linspace(0, 1, 101), np.full(50, 9.0)])
    assert m.windowed_error(_curve(ramp)) == pytest.approx(0.5, abs=1e-12)


def test_windowed_error_direct_sum_oracle():
    e = np.random.default_rng(3).uniform(0, 2, 2000)
    assert m.windowed_error(_curve(e)) == pytest.approx(sum(e[:101]) / 101, rel=1e-13)


def test_windowed_error_needs_half_mtu():
    with pytest.raises(CapacityError):
        m.windowed_error(_curve(np.zeros(100)))


def test_kde_rejects_degenerate():
    with pytest.raises(DegenerateDataError):
        m.kde_pdf(np.zeros(10))
    with pytest.raises(CapacityError):
        m.kde_pdf([1.0])


def test_kde_two_point_symmetry():
    grid = np.linspace(-3, 3, 601)
    p = m.kde_pdf([-1.0, 1.0], grid)
    np.testing.assert_allclose(p.density, p.density[::-1], rtol=0, atol=1e-12)


def test_kde_matches_normal_density():
    # median over seeds: one sample of 1e4 points has max deviation 0.010-0.023
    devs = []
    for seed in range(10):
        x = np.random.default_rng(seed).standard_normal(10_000)
        p = m.kde_pdf(x)
        devs.append(np.abs(p.density - norm.pdf(p.grid)).max())
    assert np.median(devs) < 0.02


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 3000), scale=st.floats(0.01, 100))
def test_kde_integrates_to_one(seed, n, scale):
    x = np.random.default_rng(seed).standard_t(3, n) * scale
    if not x.std() > 0:
        return
    p = m.kde_pdf(x)
    assert np.all(p.density >= 0)
    assert 0.99 <= p.integral() <= 1.01


def test_kde_pure_function():
    x = np.random.default_rng(9).normal(size=500)
    a, b = m.kde_pdf(x), m.kde_pdf(x.copy())
    assert a.density.tobytes() == b.density.tobytes() and a.bandwidth == b.bandwidth


def test_kde_numba_numpy_agree():
    x = np.sort(np.random.default_rng(2).normal(size=5000))
    grid = np.linspace(-5, 5, 401)
    np.testing.assert_allclose(m._epan_nb(x, grid, 0.3), m._epan_np(x, grid, 0.3),
                               rtol=1e-12, atol=1e-14)


def test_single_quartile_equals_whole():
    x = np.random.default_rng(4).normal(size=(1000, 8))
    (q,) = m.quartile_pdfs(x, 1)
    whole = m.kde_pdf(x.ravel())
    np.testing.assert_array_equal(q.density, whole.density)


def test_quartiles_truncate_remainder():
    x = np.random.default_rng(5).normal(size=(1003, 2))
    qs = m.quartile_pdfs(x, 4)
    assert [q.n_samples for q in qs] == [250 * 2] * 4
    grid = qs[0].grid
    np.testing.assert_array_equal(m.quartile_pdfs(x[:1000], 4, grid)[3].density,
                                  m.quartile_pdfs(x, 4, grid)[3].density)


def test_quartiles_short_input():
    with pytest.raises(CapacityError):
        m.quartile_pdfs(np.ones((3, 1)), 4)


def test_stationary_quartiles_close_to_each_other():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(40_000, 2))
    grid = np.linspace(-5, 5, 401)
    qs = m.quartile_pdfs(x, 4, grid)
    # baseline: two disjoint true samples of quartile size
    y = rng.normal(size=(20_000, 2))
    base = m.sup_distance(m.kde_pdf(y[:10_000], grid), m.kde_pdf(y[10_000:], grid))
    for i in range(4):
        for j in range(i + 1, 4):
            assert m.sup_distance(qs[i], qs[j]) < 2 * base
