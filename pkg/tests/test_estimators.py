import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ancilla_sff.errors import DimensionError, ParameterError
from ancilla_sff.estimators import (
    TimeSeriesEstimate,
    chunk_bounds,
    merge_tree,
    realization_series,
    residuals,
    run_ensemble,
    sff_run,
    two_point_run,
    welford_merge,
)
from ancilla_sff.model import ModelParams, build_observable, sample_floquet

GRID = np.arange(5)


def _rand_samples(n, seed=0, width=5):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, width)) + 1j * rng.standard_normal((n, width))


def _assert_same(a, b, rtol=1e-12):
    assert a.n == b.n
    np.testing.assert_allclose(a.mean, b.mean, rtol=rtol, atol=1e-15)
    np.testing.assert_allclose(a.m2, b.m2, rtol=rtol)
    np.testing.assert_allclose(a.m2_im, b.m2_im, rtol=rtol)


# --- accumulator --------------------------------------------------------------


def test_merge_with_empty_is_identity():
    x = TimeSeriesEstimate.from_samples(GRID, _rand_samples(30))
    _assert_same(welford_merge(x, TimeSeriesEstimate.empty(GRID)), x, rtol=0)
    _assert_same(welford_merge(TimeSeriesEstimate.empty(GRID), x), x, rtol=0)


def test_merge_commutes():
    a = TimeSeriesEstimate.from_samples(GRID, _rand_samples(17, 1))
    b = TimeSeriesEstimate.from_samples(GRID, _rand_samples(40, 2))
    _assert_same(welford_merge(a, b), welford_merge(b, a))


def test_split_600_400_matches_unsplit():
    x = _rand_samples(1000, 3)
    whole = TimeSeriesEstimate.from_samples(GRID, x)
    parts = welford_merge(TimeSeriesEstimate.from_samples(GRID, x[:600]),
                          TimeSeriesEstimate.from_samples(GRID, x[600:]))
    _assert_same(parts, whole)


def test_push_matches_two_pass():
    x = _rand_samples(200, 4)
    acc = TimeSeriesEstimate.empty(GRID)
    for row in x:
        acc.push(row)
    _assert_same(acc, TimeSeriesEstimate.from_samples(GRID, x), rtol=1e-10)
    se = np.sqrt(np.var(x.real, axis=0, ddof=1) / 200)
    np.testing.assert_allclose(acc.stderr(), se, rtol=1e-10)


@settings(max_examples=40, deadline=None)
@given(sizes=st.lists(st.integers(0, 30), min_size=3, max_size=3), seed=st.integers(0, 2 ** 32))
def test_merge_associative(sizes, seed):
    x = _rand_samples(sum(sizes), seed)
    cuts = np.cumsum([0] + sizes)
    a, b, c = (TimeSeriesEstimate.from_samples(GRID, x[cuts[i]:cuts[i + 1]]) for i in range(3))
    left = welford_merge(welford_merge(a, b), c)
    right = welford_merge(a, welford_merge(b, c))
    _assert_same(left, right)
    if sum(sizes):
        _assert_same(left, TimeSeriesEstimate.from_samples(GRID, x), rtol=1e-10)


def test_merge_rejects_mismatch():
    a = TimeSeriesEstimate.empty(GRID, "sff")
    with pytest.raises(DimensionError):
        welford_merge(a, TimeSeriesEstimate.empty(np.arange(6), "sff"))
    with pytest.raises(DimensionError):
        welford_merge(a, TimeSeriesEstimate.empty(GRID, "delta"))


def test_stderr_needs_two_samples():
    x = TimeSeriesEstimate.from_samples(GRID, _rand_samples(1))
    with pytest.raises(ParameterError):
        x.stderr()


def test_merge_tree_balanced_equals_sequential():
    x = _rand_samples(1000, 5)
    parts = [TimeSeriesEstimate.from_samples(GRID, x[s:e]) for s, e in chunk_bounds(1000, 70)]
    _assert_same(merge_tree(parts), TimeSeriesEstimate.from_samples(GRID, x), rtol=1e-10)


# --- ensemble runs --------------------------------------------------------------


@pytest.fixture(scope="module")
def small_run():
    p = ModelParams(D0=8, gamma=0.5, master_seed=3, n_samples=600, t_max=48)
    a = build_observable("anc:Z, env_q0:Z", p)
    return p, a, run_ensemble(p, a, a, chunk_size=100)


def test_k_at_zero_exact(small_run):
    _, _, res = small_run
    assert res.sff.mean[0] == 1.0
    assert res.sff.stderr()[0] == 0.0


def test_k_real_nonnegative(small_run):
    _, _, res = small_run
    assert np.all(res.sff.mean.imag == 0.0)
    assert np.all(res.sff.m2_im == 0.0)
    assert np.all(res.sff.mean.real >= 0.0)


def test_two_point_at_zero_is_ab(small_run):
    _, _, res = small_run
    assert abs(res.two_point.mean[0] - res.ab) <= 1e-10
    assert np.sqrt(res.two_point.m2[0] / res.two_point.n) <= 1e-10


def test_two_point_imaginary_part_vanishes(small_run):
    _, _, res = small_run
    tp = res.two_point
    sel = tp.t_grid >= 1
    z = tp.mean.imag[sel] / tp.stderr_im()[sel]
    assert np.mean(np.abs(z) <= 4) >= 0.95


def test_two_point_matches_dense_propagation():
    p = ModelParams(D0=4, gamma=0.6, master_seed=9, n_samples=2, t_max=6)
    a = build_observable("anc:X, env_q1:Z", p)
    b = build_observable("anc:Y, env_q0:X", p)
    k, c = realization_series(p, 1, (a.matrix, b.matrix))
    u = sample_floquet(p, p.stream(1)).matrix
    for t in range(7):
        ut = np.linalg.matrix_power(u, t)
        ref = np.trace(a.matrix @ ut @ b.matrix @ ut.conj().T) / 8
        assert abs(c[t] - ref) <= 1e-12
        assert abs(k[t] - abs(np.trace(ut)) ** 2 / 64) <= 1e-12


def test_worker_count_does_not_change_result():
    p = ModelParams(D0=4, gamma=0.5, master_seed=1, n_samples=90, t_max=12)
    r1 = run_ensemble(p, chunk_size=20, workers=1)
    r3 = run_ensemble(p, chunk_size=20, workers=3)
    assert r1.sff.mean.tobytes() == r3.sff.mean.tobytes()
    assert r1.sff.m2.tobytes() == r3.sff.m2.tobytes()


def test_run_validation():
    p = ModelParams(D0=4, gamma=0.5, n_samples=1)
    with pytest.raises(ParameterError):
        run_ensemble(p)
    p = p.with_(n_samples=4)
    a = build_observable("anc:Z", p)
    with pytest.raises(ParameterError):
        run_ensemble(p, a, None)
    with pytest.raises(DimensionError):
        big = build_observable("anc:Z", ModelParams(D0=8, gamma=0.5))
        run_ensemble(p, big, big)


def test_runtime_reported(small_run):
    _, _, res = small_run
    assert res.wall_time > 0 and res.seconds_per_sample > 0


def test_helpers_agree_with_run():
    p = ModelParams(D0=4, gamma=0.5, master_seed=2, n_samples=20, t_max=8)
    a = build_observable("anc:Z", p)
    full = run_ensemble(p, a, a)
    assert sff_run(p).mean.tobytes() == full.sff.mean.tobytes()
    assert two_point_run(p, a, a).mean.tobytes() == full.two_point.mean.tobytes()


def test_coupling_phase_invariance():
    p = ModelParams(D0=8, gamma=0.5, master_seed=4, n_samples=400, t_max=32)
    a = build_observable("anc:Z, env_q0:Z", p)
    r0 = run_ensemble(p, a, a)
    r1 = run_ensemble(p.with_(coupling_phase=1.3, master_seed=5), a, a)
    for key in ("sff", "two_point"):
        x, y = getattr(r0, key), getattr(r1, key)
        se = np.sqrt(x.stderr() ** 2 + y.stderr() ** 2)[1:]
        z = (x.mean.real - y.mean.real)[1:] / se
        assert np.mean(np.abs(z) <= 4) >= 0.95


@pytest.mark.slow
def test_decoupled_baseline_is_cue_of_d0():
    p = ModelParams(D0=16, gamma=1.0, master_seed=6, n_samples=50_000, t_max=48, ensemble="decoupled")
    k = sff_run(p)
    t = k.t_grid
    theory = np.minimum(t, 16) / 16 ** 2
    theory[0] = 1.0
    rep = residuals(k, theory, t_min=1)
    assert np.all(np.abs(rep.z) <= 4), rep.summary()


# --- residuals ------------------------------------------------------------------


def test_residuals_zero_against_itself(small_run):
    _, _, res = small_run
    rep = residuals(res.sff, res.sff.mean.real)
    assert np.all(rep.z == 0)
    assert rep.flagged[0] and rep.fraction_within == 1.0


def test_residuals_detect_wrong_theory():
    p = ModelParams(D0=8, gamma=1.0, master_seed=7, n_samples=1000, t_max=32, ensemble="cue")
    k = sff_run(p)
    t = k.t_grid
    good = np.minimum(t, 16) / 256.0
    bad = np.where(t <= 16, 2 * good, good)
    ok = residuals(k, good, t_min=2)
    wrong = residuals(k, bad, t_min=2)
    assert ok.passed() and 0.5 < ok.chi2_dof < 2
    assert wrong.chi2_dof > 20 * ok.chi2_dof


def test_residuals_shape_check(small_run):
    _, _, res = small_run
    with pytest.raises(DimensionError):
        residuals(res.sff, np.zeros(3))
