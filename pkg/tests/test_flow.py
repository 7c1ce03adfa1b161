import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from minkflow import (
    FlowConfig,
    InputError,
    PrescribedDensity,
    StationarityError,
    StepError,
    SupportFunction,
    boundary_curve,
    build_collar,
    circle_grid,
    evaluate_state,
    flow_speed,
    gamma_scaling_exponent,
    periodic_integral,
    rescale_to_unnormalized,
    run,
    solve_p_laplace,
    step,
    symmetrize,
    variation_check,
)
from minkflow.flow import eta_normalizer, ma_residual, psi_functional, truncate_modes

rng = np.random.default_rng(55103)

COARSE = FlowConfig(p=2.0, m=32, delta=0.3, n_r=6, stop_tol=1e-4, t_max=30.0, mode_cut=8)
DISK_CFG = FlowConfig(p=2.0, m=256, delta=0.5, n_r=32)


def uniform_f(m):
    return PrescribedDensity.uniform(1.0, m)


def mode_two_body(m, amp=0.1):
    theta = circle_grid(m)
    return SupportFunction(1.0 + amp * np.cos(2 * theta))


# -------------------------------------------------------------- input types


def test_density_must_be_positive_and_even():
    theta = circle_grid(32)
    with pytest.raises(InputError):
        PrescribedDensity(np.zeros(32))
    with pytest.raises(InputError):
        PrescribedDensity(1.0 + 0.5 * np.cos(theta))  # odd part breaks symmetry
    f = PrescribedDensity(1.0 + 0.2 * np.cos(2 * theta))
    assert f.m == 32


def test_flow_config_validation():
    with pytest.raises(InputError):
        FlowConfig(p=1.0)
    with pytest.raises(InputError):
        FlowConfig(delta=1.0)
    with pytest.raises(InputError):
        FlowConfig(dt_init=1e-3, dt_max=1e-4)
    with pytest.raises(InputError):
        FlowConfig(stop_tol=0.0)
    with pytest.raises(InputError):
        FlowConfig(m=32, mode_cut=32)  # above m/2


def test_evaluate_state_grid_mismatch():
    with pytest.raises(InputError):
        evaluate_state(mode_two_body(64), uniform_f(32), COARSE)


# -------------------------------------------------------- frozen functionals


def test_gamma_eta_psi_disk_p2():
    # unit disk, collar depth 0.5: the annulus solve has g = 1/ln 2
    state = evaluate_state(SupportFunction.disk(1.0, 256), uniform_f(256), DISK_CFG)
    assert state.gamma == pytest.approx(9.064720283654388, rel=1e-3)  # 2 pi / ln 2
    assert state.eta == pytest.approx(1.4426950408889634, rel=1e-3)
    assert state.psi == pytest.approx(-0.36651292058166435, rel=1e-3)
    assert state.psi == pytest.approx(-np.log(state.eta), abs=1e-12)


def test_gamma_disk_radius_two():
    # radius 2, depth 1: g = 1/(2 ln 2), Gamma = 4 pi / ln 2
    state = evaluate_state(SupportFunction.disk(2.0, 256), uniform_f(256), DISK_CFG)
    assert state.gamma == pytest.approx(18.129440567308777, rel=1e-3)


def test_gamma_eta_disk_p3():
    cfg = dataclasses.replace(DISK_CFG, p=3.0)
    state = evaluate_state(SupportFunction.disk(1.0, 256), uniform_f(256), cfg)
    assert state.gamma == pytest.approx(18.31054383708612, rel=2e-3)  # 2 pi g^2
    assert state.eta == pytest.approx(2.9142135623730963, rel=2e-3)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_disk_is_stationary(p):
    cfg = dataclasses.replace(DISK_CFG, p=p, m=64, n_r=8)
    state = evaluate_state(SupportFunction.disk(1.0, 64), uniform_f(64), cfg)
    assert state.speed_ratio < 1e-12
    assert state.ma_residual < 1e-12


def test_eta_consistency():
    state = evaluate_state(mode_two_body(32), uniform_f(32), COARSE)
    eta = eta_normalizer(state.gamma, uniform_f(32), state.h)
    assert state.eta == pytest.approx(eta, rel=1e-14)
    assert state.psi == pytest.approx(
        psi_functional(state.gamma, uniform_f(32), state.h), abs=1e-14
    )


# ------------------------------------------------------------ speed algebra


def test_speed_residual_identity_on_random_data():
    # speed * b g^(p-1) = h * (g^(p-1) b - eta f) pointwise
    for _ in range(20):
        m = 32
        h = SupportFunction(rng.uniform(0.5, 2.0, m))
        f = rng.uniform(0.5, 2.0, m)
        b = rng.uniform(0.2, 3.0, m)
        g = rng.uniform(0.3, 2.5, m)
        eta = rng.uniform(0.5, 2.0)
        p = rng.uniform(1.2, 4.0)

        class F:
            samples = f

        speed = flow_speed(h, b, g, eta, F, p)
        lhs = speed * b * g ** (p - 1.0)
        rhs = h.samples * (g ** (p - 1.0) * b - eta * f)
        assert_allclose(lhs, rhs, rtol=1e-13)


def test_speed_vanishes_when_equation_holds():
    m = 32
    h = SupportFunction(rng.uniform(0.5, 2.0, m))
    b = rng.uniform(0.2, 3.0, m)
    g = rng.uniform(0.3, 2.5, m)
    p = 2.7
    eta = 1.6

    class F:
        samples = g ** (p - 1.0) * b / eta

    speed = flow_speed(h, b, g, eta, F, p)
    assert_allclose(speed, 0.0, atol=1e-13)
    assert ma_residual(h, b, g, eta, F, p) < 1e-15


def test_truncate_modes():
    s = rng.standard_normal(64)
    cut = truncate_modes(s, 10)
    coef = np.fft.rfft(cut)
    assert_allclose(coef[11:], 0.0, atol=1e-12)
    assert_allclose(coef[: 11], np.fft.rfft(s)[: 11], rtol=0, atol=1e-12)
    assert_allclose(truncate_modes(cut, 10), cut, atol=1e-13)


def test_raw_speed_has_zero_measure_integral():
    # integral of the un-truncated speed against dmu vanishes by the
    # definition of eta
    state = evaluate_state(mode_two_body(32), uniform_f(32), COARSE)
    total = periodic_integral(
        state.speed_raw * state.grad ** (COARSE.p - 1.0) * state.b
    )
    assert abs(total) < 1e-12 * state.gamma


def test_dt_stable_matches_formula():
    state = evaluate_state(mode_two_body(32), uniform_f(32), COARSE)
    gp = state.grad ** (COARSE.p - 1.0)
    stiff = np.max(state.eta * 1.0 * state.h.samples / (gp * state.b**2))
    assert state.dt_stable == pytest.approx(1.0 / (stiff * COARSE.mode_cut**2), rel=1e-12)


# ------------------------------------------------------------------ stepping


def test_step_matches_independent_heun():
    """Full replication of one step with separately written numerics."""
    cfg = FlowConfig(p=2.0, m=64, delta=0.5, n_r=8, mode_cut=16)
    f = uniform_f(64)
    h0 = mode_two_body(64, amp=0.05)
    state = evaluate_state(h0, f, cfg)
    dt = 1e-3

    def own_speed(hs):
        coef = np.fft.rfft(hs)
        k = np.arange(coef.size, dtype=float)
        b = np.fft.irfft(coef * -(k**2), n=hs.size) + hs
        h = SupportFunction(hs)
        mesh = build_collar(
            boundary_curve(h), b, cfg.delta, cfg.n_r, thickness=state.thickness
        )
        g = solve_p_laplace(mesh, cfg.p).boundary_gradient
        w = 2.0 * np.pi / hs.size
        gamma = w * np.sum(hs * g * b)
        eta = gamma / (w * np.sum(f.samples * hs))
        raw = hs - eta * f.samples * hs / (b * g)
        c = np.fft.rfft(raw)
        c[cfg.mode_cut + 1 :] = 0.0
        return np.fft.irfft(c, n=hs.size)

    def own_sym(x):
        return 0.5 * (x + np.roll(x, x.size // 2))

    s1 = own_speed(h0.samples)
    assert_allclose(s1, state.speed, atol=1e-8)
    h_euler = own_sym(h0.samples + dt * s1)
    s2 = own_speed(h_euler)
    expected = own_sym(h0.samples + 0.5 * dt * (s1 + s2))

    new, dt_used, rejected = step(state, f, cfg, dt)
    assert dt_used == dt
    assert rejected == 0
    assert_allclose(new.h.samples, expected, atol=1e-8)


def test_step_caps_at_stability_limit():
    state = evaluate_state(mode_two_body(32), uniform_f(32), COARSE)
    new, dt_used, _ = step(state, uniform_f(32), COARSE, 10.0)
    assert dt_used <= state.dt_stable
    assert dt_used <= COARSE.dt_max
    assert new.t == pytest.approx(dt_used)


def test_step_preserves_evenness_exactly():
    f = uniform_f(32)
    state = evaluate_state(mode_two_body(32), f, COARSE)
    for _ in range(3):
        state, _, _ = step(state, f, COARSE, 1e-3)
        half = state.h.samples
        assert np.array_equal(half, np.roll(half, 16))


def test_step_error_when_collar_cannot_follow():
    # freezing the collar depth at 0.95 * min b of the disk start makes the
    # run fail once the body's min b drops below that depth; halving cannot
    # rescue a secular trend, so the step must give up at dt_min
    theta = circle_grid(32)
    cfg = FlowConfig(
        p=2.0, m=32, delta=0.95, n_r=6, stop_tol=1e-6, t_max=30.0, mode_cut=8
    )
    f = PrescribedDensity(1.0 + 0.2 * np.cos(2 * theta))
    with pytest.raises(StepError) as excinfo:
        run(f, SupportFunction.disk(1.0, 32), cfg)
    assert excinfo.value.diagnostics.t > 0.0


# -------------------------------------------------------------------- runs


def test_run_stops_immediately_on_disk():
    f = uniform_f(32)
    result = run(f, SupportFunction.disk(1.0, 32), COARSE)
    assert result.converged
    assert result.status == "stationary"
    assert result.accepted_steps == 0
    assert len(result.history) == 1
    assert_allclose(result.final.h.samples, 1.0, atol=0)


def test_run_infinite_stop_tol_returns_initial_state():
    cfg = dataclasses.replace(COARSE, stop_tol=np.inf)
    h0 = mode_two_body(32)
    result = run(uniform_f(32), h0, cfg)
    assert result.converged
    assert result.accepted_steps == 0
    # bitwise equal to the symmetrized start, which is the state at t = 0
    assert np.array_equal(result.final.h.samples, symmetrize(h0).samples)


def test_run_timeout_is_a_status_not_an_exception():
    theta = circle_grid(32)
    cfg = dataclasses.replace(COARSE, stop_tol=1e-5, t_max=5e-3)
    f = PrescribedDensity(1.0 + 0.2 * np.cos(2 * theta))
    result = run(f, SupportFunction.disk(1.0, 32), cfg)
    assert result.status == "timeout"
    assert not result.converged
    assert result.final.t == pytest.approx(5e-3)
    assert len(result.history) == result.accepted_steps + 1


def test_run_coarse_round_body_converges():
    result = run(uniform_f(32), mode_two_body(32), COARSE)
    assert result.converged
    final = result.final
    ecc = np.max(final.h.samples) - np.min(final.h.samples)
    assert final.ma_residual < 5e-4
    assert ecc < 1e-3
    assert result.psi_increase_events == 0
    # conservation of Gamma under the frozen-collar convention
    assert max(r.gamma_drift for r in result.history) < 1e-2
    # Lyapunov decrease
    psi = [r.psi for r in result.history]
    assert psi[-1] < psi[0]
    assert result.final.t < 30.0


def test_trajectory_record_array():
    result = run(uniform_f(32), mode_two_body(32), COARSE)
    traj = result.trajectory
    assert traj.shape == (len(result.history),)
    assert traj["t"][0] == 0.0
    assert np.all(np.diff(traj["t"]) > 0.0)
    assert_allclose(traj["psi"], [r.psi for r in result.history], rtol=1e-15)


# ----------------------------------------------------------- derived probes


def test_variation_gap_is_small_and_positive():
    f = uniform_f(32)
    state = evaluate_state(mode_two_body(32), f, COARSE)
    gap = variation_check(state, f, COARSE, 2e-3)
    assert 1e-4 < gap < 1e-1


def test_rescale_requires_stationarity():
    f = uniform_f(32)
    state = evaluate_state(mode_two_body(32, amp=0.1), f, COARSE)
    with pytest.raises(StationarityError):
        rescale_to_unnormalized(state, COARSE.p)


def test_rescale_formula_exact_on_synthetic_eta():
    f = uniform_f(32)
    state = evaluate_state(SupportFunction.disk(1.0, 32), f, COARSE)
    synthetic = dataclasses.replace(state, eta=4.0, ma_residual=0.0)
    lam, scaled = rescale_to_unnormalized(synthetic, 2.0)
    assert lam == pytest.approx(0.5, rel=1e-15)  # eta^(-1/2)
    assert_allclose(scaled.samples, 0.5 * state.h.samples, rtol=1e-15)
    # p = 3 uses exponent -1/3
    lam3, _ = rescale_to_unnormalized(synthetic, 3.0)
    assert lam3 == pytest.approx(4.0 ** (-1.0 / 3.0), rel=1e-15)


def test_gamma_scaling_exponent_measured():
    f = uniform_f(32)
    h = mode_two_body(32)
    e2 = gamma_scaling_exponent(h, f, COARSE)
    assert e2 == pytest.approx(1.0, abs=1e-9)
    cfg3 = dataclasses.replace(COARSE, p=3.0)
    e3 = gamma_scaling_exponent(h, f, cfg3)
    assert e3 == pytest.approx(0.0, abs=1e-9)
