import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from discordlab import limits
from discordlab.coevolution import SwitchProbs
from discordlab.errors import InvalidParameterError

from _oracles import complete_voter_mean_tau


# ----------------------------------------------------------------------
# diffusion constants
# ----------------------------------------------------------------------

def test_theta_regular_values():
    assert limits.theta_regular(3) == 0.5
    assert limits.theta_regular(4) == 2 / 3
    assert abs(limits.theta_regular(10 ** 6) - 1.0) < 2e-6
    assert limits.theta_regular(4) < limits.theta_regular(5)
    with pytest.raises(InvalidParameterError):
        limits.theta_regular(2)


def test_theta_directed_eulerian_values():
    assert abs(limits.theta_directed_eulerian(3, 9) - math.sqrt(1.5)) < 1e-14
    assert abs(limits.theta_directed_eulerian(2, 4) - math.sqrt(2)) < 1e-14
    # mixed degrees {2,4} with equal weights: m1=3, m2=10
    expect = 1.0 / (10 / 9 - 1 + math.sqrt(2 / 3))
    assert abs(limits.theta_directed_eulerian(3, 10) - expect) < 1e-14
    # extra degree volatility at fixed mean lowers the constant
    assert limits.theta_directed_eulerian(3, 10) < limits.theta_directed_eulerian(3, 9)


@settings(max_examples=80, derandomize=True, deadline=None)
@given(st.floats(1.2, 50.0), st.floats(0.0, 30.0), st.floats(0.1, 30.0))
def test_theta_directed_monotone_in_variance(m1, excess, more):
    m2 = m1 * m1 + excess
    assert (limits.theta_directed_eulerian(m1, m2 + more)
            < limits.theta_directed_eulerian(m1, m2))


def test_theta_directed_validation():
    with pytest.raises(InvalidParameterError):
        limits.theta_directed_eulerian(1.0, 2.0)
    with pytest.raises(InvalidParameterError):
        limits.theta_directed_eulerian(3.0, 8.0)  # m2 < m1^2


def test_theta_rewiring_limits():
    for d in (3, 4, 5, 10):
        static = (d - 2) / (d - 1)
        assert abs(limits.theta_rewiring(d, 1e-8) - static) <= 1e-4
        assert abs(limits.theta_rewiring(d, 1e8) - 1.0) <= 1e-6


def test_theta_rewiring_strictly_increasing_and_bounded():
    for d in (3, 4, 5):
        lo = (d - 2) / (d - 1)
        grid = np.arange(0.1, 10.01, 0.1)
        vals = [limits.theta_rewiring(d, nu) for nu in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert all(lo < v < 1.0 for v in vals)


def test_theta_rewiring_backward_recurrence_depth_stable():
    # direct recurrence at fixed depths: doubling changes nothing at 1e-12
    d, nu = 3, 1.0
    rho = 2 * math.sqrt(d - 1) / d

    def backward(depth):
        t = 0.0
        for k in range(depth, 0, -1):
            t = 1.0 / ((2.0 + k * nu) / rho - t)
        return t

    assert abs(backward(2048) - backward(4096)) < 1e-12
    assert abs(limits.theta_rewiring(d, nu, tolerance=1e-12)
               - (1 - backward(4096) / math.sqrt(d - 1))) < 1e-10


def test_theta_rewiring_validation():
    with pytest.raises(InvalidParameterError):
        limits.theta_rewiring(2, 1.0)
    with pytest.raises(InvalidParameterError):
        limits.theta_rewiring(3, 0.0)


# ----------------------------------------------------------------------
# meeting profile
# ----------------------------------------------------------------------

def test_meeting_profile_shape_and_tail():
    prof = limits.meeting_profile(3, times=np.array([0.0, 0.5, 1.0, 5.0, 200.0]))
    assert prof.values[0] == 1.0
    assert np.all(np.diff(prof.values) <= 0)
    assert np.all(prof.values >= limits.theta_regular(3) - prof.tolerance)
    assert abs(prof.values[-1] - 0.5) <= 2e-3


def test_meeting_profile_tightening_tolerance_is_consistent():
    times = np.array([0.25, 1.0, 3.0, 10.0])
    a = limits.meeting_profile(3, times=times, tolerance=1e-6)
    b = limits.meeting_profile(3, times=times, tolerance=1e-9)
    assert b.truncation_level > a.truncation_level
    assert np.all(np.abs(a.values - b.values) < 1e-6)


def test_meeting_profile_above_theta_for_all_degrees():
    for d in (3, 4, 5, 10):
        prof = limits.meeting_profile(d, t_max=50.0)
        assert np.all(np.diff(prof.values) <= 0)
        assert np.all(prof.values >= limits.theta_regular(d) - prof.tolerance)


def test_meeting_profile_validation():
    with pytest.raises(InvalidParameterError):
        limits.meeting_profile(2, t_max=1.0)
    with pytest.raises(InvalidParameterError):
        limits.meeting_profile(3, times=np.array([1.0, 0.5]))
    with pytest.raises(InvalidParameterError):
        limits.meeting_profile(3)


def test_meeting_profile_agrees_with_tree_monte_carlo(rng):
    times = [0.5, 1.0, 2.0]
    prof = limits.meeting_profile(3, times=np.array(times))
    surv, se = limits.meeting_time_tree_mc(3, times, 150_000, rng)
    for f, s, e in zip(prof.values, surv, se):
        assert abs(s - f) <= 3 * e + prof.tolerance


def test_tree_mc_profile_other_degree(rng):
    times = [0.5, 1.5]
    prof = limits.meeting_profile(5, times=np.array(times))
    surv, se = limits.meeting_time_tree_mc(5, times, 60_000, rng)
    for f, s, e in zip(prof.values, surv, se):
        assert abs(s - f) <= 3.5 * e + prof.tolerance


def test_value_at_requires_grid_point():
    prof = limits.meeting_profile(3, times=np.array([0.0, 1.0]))
    assert prof.value_at(1.0) == prof.values[1]
    with pytest.raises(InvalidParameterError):
        prof.value_at(0.7)


# ----------------------------------------------------------------------
# Fisher-Wright
# ----------------------------------------------------------------------

def test_fw_path_degenerate_cases(rng):
    times, path = limits.fisher_wright_path(1.0, 0.0, 0.01, 1.0, rng)
    assert np.all(path == 0.0)
    times, path = limits.fisher_wright_path(0.0, 0.3, 0.01, 1.0, rng)
    assert np.all(path == 0.3)
    with pytest.raises(InvalidParameterError):
        limits.fisher_wright_path(1.0, 0.5, -0.1, 1.0, rng)


def test_fw_path_variance_identity():
    # Var(chi_s) = u(1-u)(1 - e^{-2 theta s}) for theta=1, u=1/2
    R, dt = 2000, 1e-3
    finals = {0.1: [], 0.5: [], 1.0: []}
    for i in range(R):
        rng = np.random.default_rng(300_000 + i)
        times, path = limits.fisher_wright_path(1.0, 0.5, dt, 1.0, rng)
        for s in finals:
            finals[s].append(path[int(round(s / dt))])
    for s, vals in finals.items():
        pred = 0.25 * (1 - math.exp(-2 * s))
        sigma = pred * math.sqrt(2 / R) + 2e-3  # sampling + Euler bias slack
        assert abs(np.var(vals) - pred) < 3 * sigma


def test_fw_ensemble_matches_single_path_law(rng):
    times, paths, tau = limits.fisher_wright_ensemble(
        1.0, 0.5, 1e-3, 1.0, 4000, rng, record_times=[0.5, 1.0])
    assert paths.shape == (4000, 2)
    v = paths[:, 0].var()
    pred = 0.25 * (1 - math.exp(-1.0))
    assert abs(v - pred) < 3 * (pred * math.sqrt(2 / 4000) + 2e-3)


def test_fw_moment_decay_matches_exponential(rng):
    # E[chi(1-chi)] = u(1-u) e^{-2 theta s}
    times, paths, _ = limits.fisher_wright_ensemble(
        0.5, 0.3, 1e-3, 2.0, 6000, rng, record_times=[1.0, 2.0])
    prod = (paths * (1 - paths)).mean(axis=0)
    for s, m in zip(times, prod):
        pred = 0.21 * math.exp(-s)
        assert abs(m - pred) < 4 * 0.21 / math.sqrt(6000) + 2e-3


def test_fw_absorption_closed_form_and_mc():
    assert limits.fw_absorption_time(1.0, 0.5) == pytest.approx(math.log(2), abs=1e-12)
    assert limits.fw_absorption_time(0.5, 0.5) == pytest.approx(2 * math.log(2), abs=1e-12)
    assert limits.fw_absorption_time(1.0, 0.0) == 0.0
    assert limits.fw_absorption_time(1.0, 1e-9) < 1e-7
    # Monte Carlo cross-check of the Green-function solution within 2%
    _, _, tau = limits.fisher_wright_ensemble(
        1.0, 0.5, 1e-3, 15.0, 10_000, np.random.default_rng(17))
    assert np.isfinite(tau).all()
    assert abs(np.mean(tau) / math.log(2) - 1) < 0.02


def test_fw_absorption_agrees_with_finite_chain_oracle():
    # complete-graph birth-death absorption, rescaled by N, approaches the
    # diffusion value; locks the formula to an independent exact solver
    exact = complete_voter_mean_tau(500)[250] / 500
    assert abs(exact - limits.fw_absorption_time(1.0, 0.5)) < 0.01


# ----------------------------------------------------------------------
# discordance prediction
# ----------------------------------------------------------------------

def test_discordance_prediction_t0():
    assert limits.discordance_prediction(0.5, 3, 0.0, 1000) == pytest.approx(0.5)
    assert limits.discordance_prediction(0.3, 4, 0.0, 10) == pytest.approx(0.42)


def test_discordance_prediction_plateau_decay():
    # t = s*N with N large: 2u(1-u) theta_3 e^{-s}
    N = 100_000
    for s in (0.5, 1.0):
        pred = limits.discordance_prediction(0.5, 3, s * N, N)
        assert pred == pytest.approx(0.25 * math.exp(-s), abs=1e-4)


def test_discordance_prediction_array_and_profile_reuse(rng):
    ts = np.array([0.0, 1.0, 2.0])
    prof = limits.meeting_profile(3, times=ts)
    a = limits.discordance_prediction(0.5, 3, ts, 500)
    b = limits.discordance_prediction(0.5, 3, ts, 500, profile=prof)
    assert np.allclose(a, b, atol=1e-12)
    with pytest.raises(InvalidParameterError):
        limits.discordance_prediction(0.5, 4, ts, 500, profile=prof)


# ----------------------------------------------------------------------
# dense-limit drift, fixed point, integrator
# ----------------------------------------------------------------------

FIG9 = SwitchProbs(s_c1=0.5, s_c0=1.5, s_d1=2.0, s_d0=0.7)


def test_drift_b_examples():
    flat = SwitchProbs(s_c1=0.7, s_c0=0.7, s_d1=0.7, s_d0=0.7)
    for p in (0.0, 0.3, 0.5, 1.0):
        for q in (0.0, 0.25, 0.5):
            assert limits.drift_b(p, q, flat) == pytest.approx(0.7 * (1 - 2 * p))
    shutoff = SwitchProbs(s_c1=0.5, s_c0=0.0, s_d1=2.0, s_d0=0.0)
    for p in (0.1, 0.9):
        for q in (0.2, 0.8):
            assert limits.drift_b(p, q, shutoff) <= 0.0
    # reference parameter set at q = 1/2: b(p) = 1.1 - 2.35 p
    for p in (0.0, 0.25, 0.468085, 1.0):
        assert limits.drift_b(p, 0.5, FIG9) == pytest.approx(1.1 - 2.35 * p, abs=1e-12)


@settings(max_examples=100, derandomize=True, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1),
       st.floats(0, 3), st.floats(0, 3), st.floats(0, 3), st.floats(0, 3))
def test_drift_b_affine_in_p_and_symmetric_in_q(p, q, a, b, c, d):
    s = SwitchProbs(s_c1=a, s_c0=b, s_d1=c, s_d0=d)
    half = limits.drift_b(0.5, q, s)
    left = limits.drift_b(0.0, q, s)
    right = limits.drift_b(1.0, q, s)
    assert half == pytest.approx((left + right) / 2, abs=1e-12)
    assert limits.drift_b(p, q, s) == pytest.approx(
        limits.drift_b(p, 1 - q, s), abs=1e-12)


def test_p_star_examples():
    flat = SwitchProbs(s_c1=0.3, s_c0=0.3, s_d1=0.3, s_d0=0.3)
    for q in np.linspace(0, 1, 7):
        assert limits.p_star(q, flat) == pytest.approx(0.5)
    shutoff = SwitchProbs(s_c1=0.5, s_c0=0.0, s_d1=2.0, s_d0=0.0)
    assert limits.p_star(0.3, shutoff) == 0.0
    assert limits.p_star(0.5, FIG9) == pytest.approx(2.2 / 4.7, abs=1e-12)
    assert limits.drift_b(limits.p_star(0.5, FIG9), 0.5, FIG9) == pytest.approx(0, abs=1e-14)
    with pytest.raises(InvalidParameterError):
        limits.p_star(0.5, SwitchProbs(s_c1=0, s_c0=0, s_d1=0, s_d0=0))


def test_integrate_dense_limit_absorbed_q_flows_to_p_star(rng):
    params = limits.DenseLimitParams(eta=1.0, rho=1.0, s=FIG9, p0=0.9, q0=1.0)
    times, p, q = limits.integrate_dense_limit(params, 1e-3, 20.0, rng=rng)
    assert np.all(q == 1.0)
    target = limits.p_star(1.0, FIG9)
    assert np.all(np.diff(p) <= 1e-15) or np.all(np.diff(p) >= -1e-15)
    assert abs(p[-1] - target) < 1e-6


def test_integrate_dense_limit_flat_weights_closed_form():
    # frozen opinions, all weights equal: p(t) = 1/2 + (p0-1/2) e^{-2 rho s t}
    flat = SwitchProbs(s_c1=1.0, s_c0=1.0, s_d1=1.0, s_d0=1.0)
    params = limits.DenseLimitParams(eta=0.0, rho=1.0, s=flat, p0=0.8, q0=0.4)
    dt, t_max = 1e-4, 3.0
    nsteps = int(round(t_max / dt))
    qpath = np.full(nsteps + 1, 0.4)
    times, p, q = limits.integrate_dense_limit(params, dt, t_max, q_path=qpath)
    exact = 0.5 + 0.3 * math.exp(-2 * t_max)
    assert abs(p[-1] - exact) < 1e-6


def test_integrate_dense_limit_qpath_validation(rng):
    params = limits.DenseLimitParams(eta=1.0, rho=1.0, s=FIG9, p0=0.5, q0=0.5)
    with pytest.raises(InvalidParameterError):
        limits.integrate_dense_limit(params, 0.01, 1.0, q_path=np.zeros(5))
    with pytest.raises(InvalidParameterError):
        limits.integrate_dense_limit(params, 0.01, 1.0)  # no rng, no q_path
