import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mlprox as mp
from conftest import small_objective


# ---------------------------------------------------------------------------
# momentum


def test_ad_momentum_values():
    assert mp.ad_momentum(1, 3.0) == 0.0
    # k=4, a=3: t4 = 2, t5 = 7/3, alpha = 1 / (7/3) = 3/7
    assert mp.ad_momentum(4, 3.0) == pytest.approx(3.0 / 7.0, rel=1e-15)


def test_ad_momentum_limit_and_monotonicity():
    a = 3.0
    vals = [mp.ad_momentum(k, a) for k in (10, 100, 1000, 10 ** 6)]
    assert all(v2 > v1 for v1, v2 in zip(vals, vals[1:]))
    assert vals[-1] < 1.0
    assert vals[-1] == pytest.approx(1.0, abs=1e-5)


def test_ad_momentum_parameter_errors():
    with pytest.raises(ValueError):
        mp.ad_momentum(1, 2.0)
    with pytest.raises(ValueError):
        mp.ad_momentum(0, 3.0)


@given(st.integers(1, 10 ** 6), st.floats(2.001, 50))
@settings(max_examples=80, deadline=None)
def test_ad_momentum_in_unit_interval(k, a):
    alpha = mp.ad_momentum(k, a)
    assert 0.0 <= alpha < 1.0


def test_schedule_matches_ad_momentum_bitwise():
    sched = mp.MomentumSchedule(a=3.0)
    assert sched.alpha(0) == 0.0
    for k in range(1, 50):
        assert sched.alpha(k) == mp.ad_momentum(k, 3.0)


# ---------------------------------------------------------------------------
# forward-backward step


def test_fb_step_contracts_to_observation(haar, rng):
    blur = mp.SeparableBlur.from_psf(mp.make_gaussian_psf(1, 1.0), (8, 8))
    prior = mp.L1SynthesisPrior(haar, 2, 0.0)
    z = rng.standard_normal((8, 8))
    obj = mp.CompositeObjective(blur, z, prior, gamma=1.0, lipschitz_f=1.0)
    y = rng.standard_normal((8, 8))
    tau = 0.9
    out = mp.fb_step(obj, y, tau)
    assert np.allclose(out, y - tau * (y - z), atol=1e-14)


def test_fb_step_tau_range():
    obj = small_objective(n=8)
    with pytest.raises(ValueError):
        mp.fb_step(obj, np.zeros((8, 8)), 0.0)
    with pytest.raises(ValueError):
        mp.fb_step(obj, np.zeros((8, 8)), 1.01 / obj.lipschitz_f)


def test_fb_step_decreases_objective(rng):
    obj = small_objective(n=16, lam=0.05)
    tau = mp.default_tau(obj)
    for _ in range(20):
        y = rng.standard_normal((16, 16))
        assert obj.value(mp.fb_step(obj, y, tau)) <= obj.value(y) + 1e-12


# ---------------------------------------------------------------------------
# smoothed gradient step


def test_smoothed_step_stationary_point(haar):
    blur = mp.SeparableBlur.from_psf(mp.make_gaussian_psf(1, 1.0), (8, 8))
    prior = mp.L1SynthesisPrior(haar, 2, 0.0)
    z = np.full((8, 8), 0.3)
    obj = mp.CompositeObjective(blur, z, prior, gamma=1.0, lipschitz_f=1.0)
    out = mp.smoothed_gradient_step(obj, z.copy(), 0.4)   # grad is zero at z
    assert np.allclose(out, z, atol=1e-14)


def test_smoothed_step_matches_quadratic_recurrence(rng):
    obj = small_objective(n=8, lam=0.0)
    tau = 0.5 / obj.smoothed_lipschitz
    y = rng.standard_normal((8, 8))
    got = mp.smoothed_gradient_step(obj, y, tau)
    assert np.allclose(got, y - tau * obj.grad_f(y), atol=1e-14)


def test_smoothed_descent_monotone_over_50_steps(rng):
    obj = small_objective(n=16, lam=0.1, seed=11)
    tau = 0.9 / obj.smoothed_lipschitz
    x = rng.standard_normal((16, 16))
    prev = obj.smoothed_value(x)
    for _ in range(50):
        x = mp.smoothed_gradient_step(obj, x, tau)
        cur = obj.smoothed_value(x)
        assert cur <= prev + 1e-12
        prev = cur


# ---------------------------------------------------------------------------
# fista_run


def test_fista_identity_converges_to_observation(haar, rng):
    blur = mp.SeparableBlur.from_psf(mp.make_gaussian_psf(1, 1.0), (16, 16))
    prior = mp.L1SynthesisPrior(haar, 2, 0.0)
    z = rng.uniform(0, 1, (16, 16))
    obj = mp.CompositeObjective(blur, z, prior, gamma=1.0, lipschitz_f=1.0)
    x, trace = mp.fista_run(obj, np.zeros((16, 16)), mp.MomentumSchedule(),
                            0.99, mp.StopRule(0.0, 200))
    assert np.linalg.norm(x - z) <= 1e-8


def test_fista_rate_bound_vs_oracle():
    obj = small_objective(n=32, support=7, sigma=1.5, lam=0.01, seed=5,
                          wavelet_levels=3)
    tau = mp.default_tau(obj)
    x0 = np.zeros((32, 32))
    _, oracle = mp.fista_run(obj, x0, mp.MomentumSchedule(), tau,
                             mp.StopRule(0.0, 5000))
    f_star = min(oracle.F)
    _, trace = mp.fista_run(obj, x0, mp.MomentumSchedule(), tau,
                            mp.StopRule(0.0, 500))
    gaps = np.array(trace.F) - f_star
    ks = np.arange(len(gaps))
    scaled = ks[50:] ** 2 * gaps[50:]
    assert np.all(np.isfinite(scaled))
    # the k^2-scaled gap must not blow up along the run
    assert scaled[-100:].max() <= max(scaled[: 200].max(), 1e-12) * 1.5


def test_fista_alpha_sequence_bit_match():
    obj = small_objective(n=8, lam=0.02)
    sched = mp.MomentumSchedule(a=3.0)
    tau = mp.default_tau(obj)
    x = np.zeros((8, 8))
    y = x
    for k in range(25):
        x_next = mp.fb_step(obj, y, tau)
        alpha = sched.alpha(k)
        assert alpha == (0.0 if k == 0 else mp.ad_momentum(k, 3.0))
        y = x_next.copy() if alpha == 0.0 else x_next + alpha * (x_next - x)
        x = x_next


def test_fista_zero_momentum_is_plain_fb():
    obj = small_objective(n=8, lam=0.05)
    tau = mp.default_tau(obj)
    x0 = np.zeros((8, 8))
    x_a, _ = mp.fista_run(obj, x0, None, tau, mp.StopRule(0.0, 40))
    x_b = x0.copy()
    for _ in range(40):
        x_b = mp.fb_step(obj, x_b, tau)
    assert np.array_equal(x_a, x_b)


def test_fista_stop_rule_and_flags():
    obj = small_objective(n=8, lam=0.02)
    _, trace = mp.fista_run(obj, np.zeros((8, 8)), mp.MomentumSchedule(),
                            mp.default_tau(obj), mp.StopRule(1e-12, 5))
    assert not trace.converged
    _, trace2 = mp.fista_run(obj, np.zeros((8, 8)), mp.MomentumSchedule(),
                             mp.default_tau(obj), mp.StopRule(1e-3, 5000))
    assert trace2.converged


def test_trace_monotone_time_and_strict_k():
    obj = small_objective(n=8, lam=0.02)
    _, trace = mp.fista_run(obj, np.zeros((8, 8)), mp.MomentumSchedule(),
                            mp.default_tau(obj), mp.StopRule(0.0, 30))
    ks = trace.column("k")
    assert np.all(np.diff(ks) > 0)
    assert np.all(np.diff(trace.column("time_s")) >= 0)
    assert np.all(np.diff(trace.column("work_units")) >= 0)


def test_step_norm_weighted_square_sums_bounded(desk_hierarchy, desk_instance):
    # partial sums of k ||x_k - x_{k-1}||^2 must plateau, not explode
    _, z, x0 = desk_instance
    objs = desk_hierarchy.objectives(z)
    _, trace = mp.fista_run(objs[0], x0, mp.MomentumSchedule(),
                            mp.default_tau(objs[0]), mp.StopRule(0.0, 2000))
    steps = trace.column("step_norm")[1:]
    ks = np.arange(1, len(steps) + 1)
    series = ks * steps ** 2
    partial = np.cumsum(series)
    assert np.isfinite(partial[-1])
    assert partial[-1] <= 1.2 * partial[len(partial) // 2]


# ---------------------------------------------------------------------------
# coarse_run


def _tilted_instance(seed, kind_lambda=0.05, n=16, tilt_scale=0.05):
    return small_objective(n=n, lam=kind_lambda, seed=seed, tilt_scale=tilt_scale,
                           gamma=1.1)


def test_coarse_run_stationary_start(haar):
    # lambda = 0, identity blur: minimizer is the observation itself
    blur = mp.SeparableBlur.from_psf(mp.make_gaussian_psf(1, 1.0), (8, 8))
    prior = mp.L1SynthesisPrior(haar, 2, 0.0)
    z = np.full((8, 8), 0.4)
    obj = mp.CompositeObjective(blur, z, prior, gamma=1.0, lipschitz_f=1.0)
    res = mp.coarse_run(obj, z.copy(), mp.CoarseSolverKind.FORWARD_BACKWARD,
                        m=5, tau=0.9)
    assert not res.rejected
    assert res.f_end == res.f_start
    assert np.max(np.abs(res.x - z)) < 1e-12


def test_coarse_fb_strictly_decreases(rng):
    obj = _tilted_instance(seed=21)
    x0 = rng.standard_normal((16, 16))
    tau = mp.coarse_tau(obj, mp.CoarseSolverKind.FORWARD_BACKWARD)
    x = x0.copy()
    prev = obj.value(x)
    for _ in range(5):
        x = mp.fb_step(obj, x, tau)
        cur = obj.value(x)
        assert cur < prev
        prev = cur


def test_coarse_fista_beats_fb_on_ill_conditioned(rng):
    # strongly smoothing blur makes the data term ill-conditioned
    obj = small_objective(n=16, support=11, sigma=3.0, lam=0.01, seed=9,
                          tilt_scale=0.02, gamma=1.1)
    x0 = rng.standard_normal((16, 16))
    m = 5
    res_fb = mp.coarse_run(obj, x0, mp.CoarseSolverKind.FORWARD_BACKWARD, m,
                           mp.coarse_tau(obj, mp.CoarseSolverKind.FORWARD_BACKWARD))
    res_fi = mp.coarse_run(obj, x0, mp.CoarseSolverKind.FISTA_FB, m,
                           mp.coarse_tau(obj, mp.CoarseSolverKind.FISTA_FB))
    assert res_fi.f_end < res_fb.f_end


@pytest.mark.parametrize("kind", list(mp.CoarseSolverKind))
def test_coarse_run_monotonicity_guard_50_instances(kind):
    for seed in range(50):
        obj = _tilted_instance(seed=seed)
        g = np.random.default_rng(1000 + seed)
        x0 = g.standard_normal((16, 16))
        res = mp.coarse_run(obj, x0, kind, m=5, tau=mp.coarse_tau(obj, kind))
        assert res.f_end <= res.f_start + 1e-12
        assert res.f_smoothed_end <= res.f_smoothed_start + 1e-12
        if res.rejected:
            assert np.array_equal(res.x, x0)


def test_coarse_run_m_validation():
    obj = _tilted_instance(seed=1)
    with pytest.raises(ValueError):
        mp.coarse_run(obj, np.zeros((16, 16)), mp.CoarseSolverKind.FISTA_FB,
                      m=0, tau=0.1)
