import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fuzzy_l1 import config
from fuzzy_l1.l1 import (THETA1, Bounds, ControllerState, L1Config, ProjectionError, adaptation_derivative,
                         compute_Kg, control_derivative, controller_step, eta_hat, inflated_limits,
                         predictor_derivative, proj, unmatched_map)
from fuzzy_l1.numerics import rk4_step
from fuzzy_l1.plant import PlantParams, decompose


@pytest.fixture(scope="module")
def cfg():
    return config.load_bundled("case1").controller


def _zero_state(n=6, omega=np.eye(2)):
    return ControllerState(x_hat=np.zeros(n), omega_hat=np.array(omega, dtype=float), theta1_hat=np.zeros(2),
                           theta2_hat=np.zeros(4), sigma1_hat=np.zeros(2), sigma2_hat=np.zeros(4), u=np.zeros(2))


def test_kg_examples():
    assert np.allclose(compute_Kg(-np.eye(2), np.eye(2), np.eye(2)), np.eye(2))
    assert np.allclose(compute_Kg(np.diag([-2.0, -4.0]), np.eye(2), np.eye(2)), np.diag([2.0, 4.0]))


def test_kg_identity_on_trms(cfg):
    ident = -cfg.C @ np.linalg.solve(cfg.A_m, cfg.B_m) @ cfg.K_g
    assert np.abs(ident - np.eye(2)).max() <= 1e-9


def test_kg_singular():
    with pytest.raises(np.linalg.LinAlgError, match="DC gain singular"):
        compute_Kg(-np.eye(2), np.array([[1.0, 0.0], [0.0, 0.0]]), np.eye(2))


def test_unmatched_map_modes(cfg):
    M = unmatched_map(cfg.A_m, cfg.B_m, cfg.B_um, cfg.C)
    H_m = cfg.C @ np.linalg.solve(cfg.A_m, cfg.B_m)
    H_um = cfg.C @ np.linalg.solve(cfg.A_m, cfg.B_um)
    assert np.allclose(H_m @ M, H_um)
    assert np.array_equal(unmatched_map(cfg.A_m, cfg.B_m, cfg.B_um, cfg.C, "ignore"), np.zeros((2, 4)))


def test_predictor_examples(cfg):
    cs = _zero_state(omega=np.zeros((2, 2)))
    assert np.array_equal(predictor_derivative(cs, np.zeros(6), np.zeros(2), cfg), np.zeros(6))
    cs1 = _zero_state(omega=np.zeros((2, 2)))
    cs1 = cs1.with_estimates(np.r_[np.zeros(10), 1.0, 0.0, np.zeros(4)])
    assert np.allclose(predictor_derivative(cs1, np.zeros(6), np.zeros(2), cfg), cfg.B_m @ [1.0, 0.0])
    e1 = np.eye(6)[0]
    cs2 = _zero_state(omega=np.zeros((2, 2)))
    cs2 = ControllerState(**{**cs2.__dict__, "x_hat": e1})
    # the error-injection term acts on x_hat - x, so the pure linear part is seen with x = x_hat
    lin = L1Config(A_m=cfg.A_m, B_m=cfg.B_m, B_um=cfg.B_um, C=cfg.C)
    assert np.allclose(predictor_derivative(cs2, np.zeros(6), np.zeros(2), lin), cfg.A_m[:, 0])
    assert np.allclose(predictor_derivative(cs2, e1, np.zeros(2), cfg), cfg.A_m[:, 0] + cfg.B_m @ cfg.baseline_gain[:, 0])


def test_predictor_uses_measured_state_norm(cfg):
    est = np.r_[1, 0, 0, 1, 1.0, 0, np.zeros(10)]
    x = np.array([0, 0, 0, 0, 0, 2.0])
    a = ControllerState(**{**_zero_state().__dict__, "x_hat": np.zeros(6)}).with_estimates(est)
    b = ControllerState(**{**_zero_state().__dict__, "x_hat": np.full(6, 5.0)}).with_estimates(est)
    diff = predictor_derivative(b, x, np.zeros(2), cfg) - predictor_derivative(a, x, np.zeros(2), cfg)
    # only the linear terms see x_hat; the theta1 term rides on |x|_inf
    assert np.allclose(diff, (cfg.A_m - cfg.L) @ np.full(6, 5.0))
    a0 = a.with_estimates(np.r_[1, 0, 0, 1, np.zeros(12)])
    th = predictor_derivative(a, x, np.zeros(2), cfg) - predictor_derivative(a0, x, np.zeros(2), cfg)
    assert np.allclose(th, cfg.B_m @ [2.0, 0.0])


def test_proj_examples():
    lo, hi, eps = np.array([-1.0]), np.array([1.0]), 0.1
    assert proj([0.0], [3.0], lo, hi, eps)[0] == 3.0
    assert proj([1.0], [-2.0], lo, hi, eps)[0] == -2.0
    edge = inflated_limits(lo, hi, eps)[1]
    out = proj(edge, [2.0], lo, hi, eps)
    grad = 2 * edge / (eps * 1.0)
    assert abs(grad[0] * out[0]) < 1e-6
    with pytest.raises(ProjectionError):
        proj([1.2], [1.0], lo, hi, eps)


def test_proj_asymmetric_box_uses_centre():
    lo, hi = np.array([0.25]), np.array([5.0])
    assert proj([2.625], [1.0], lo, hi, 0.1)[0] == 1.0
    assert proj([5.0], [1.0], lo, hi, 0.1)[0] == 1.0
    assert proj([5.05], [1.0], lo, hi, 0.1)[0] < 1.0


@settings(max_examples=300, deadline=None)
@given(st.floats(-1.0488, 1.0488), st.floats(-100, 100))
def test_proj_never_amplifies(theta, y):
    out = proj([theta], [y], [-1.0], [1.0], 0.1)[0]
    assert abs(out) <= abs(y) + 1e-12
    assert out * y >= 0
    if theta * y <= 0:
        assert out == y


def test_adaptation_examples(cfg):
    cs = _zero_state()
    x = np.array([0, 0, 0, 0, 0, 1.0])
    assert np.array_equal(adaptation_derivative(ControllerState(**{**cs.__dict__, "x_hat": x}), x, np.ones(2),
                                                cfg.P, cfg), np.zeros(16))
    e1 = np.eye(6)[0]
    cs1 = ControllerState(**{**cs.__dict__, "x_hat": x + e1})
    rates = adaptation_derivative(cs1, x, np.zeros(2), cfg.P, cfg)
    assert np.allclose(rates[THETA1], -cfg.Gamma * (e1 @ cfg.P @ cfg.B_m))


def test_adaptation_sigma2_uses_unmatched_channel(cfg):
    x = np.zeros(6)
    cs = ControllerState(**{**_zero_state().__dict__, "x_hat": np.eye(6)[1]})
    rates = adaptation_derivative(cs, x, np.zeros(2), cfg.P, cfg)
    assert np.allclose(rates[12:16], -cfg.Gamma * (np.eye(6)[1] @ cfg.P @ cfg.B_um))


def test_euler_step_stays_in_inflated_box(cfg):
    ilo, ihi = cfg.inflated
    est = _zero_state().estimates()
    est[4] = ihi[4]
    cs = _zero_state().with_estimates(est)
    x = np.array([0, 0, 0, 0, 0, 1.0])
    cs = ControllerState(**{**cs.__dict__, "x_hat": x - np.eye(6)[0] * 1e3})
    for _ in range(5):
        cs = controller_step(cs, x, np.zeros(2), 10 * np.eye(2), cfg, 0.002)
        e = cs.estimates()
        assert np.all(e >= ilo - 1e-12) and np.all(e <= ihi + 1e-12)


def test_eta_hat_examples(cfg):
    cs = _zero_state(omega=np.zeros((2, 2)))
    x = np.zeros(6)
    assert np.array_equal(eta_hat(cs, x, np.zeros(2), np.eye(2), cfg), np.zeros(2))
    assert np.allclose(eta_hat(cs, x, [1.0, 0.0], np.eye(2), cfg), [-1.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(arrays(float, 6, elements=st.floats(-2, 2)), arrays(float, 6, elements=st.floats(-1, 1)),
       arrays(float, 2, elements=st.floats(-1, 1)))
def test_eta_hat_modes_agree_without_unmatched(x, est6, r):
    d = config.load_raw(config.bundled_path("case1"))
    sc = config.build(d)
    c = sc.controller
    ign = L1Config(A_m=c.A_m, B_m=c.B_m, B_um=c.B_um, C=c.C, baseline_gain=c.baseline_gain, unmatched_mode="ignore")
    est = np.r_[1 + 0.1 * est6[:4], est6[4:], np.zeros(4), est6[:2], np.zeros(4)]
    cs = _zero_state().with_estimates(est)
    assert np.allclose(eta_hat(cs, x, r, c.K_g, c), eta_hat(cs, x, r, c.K_g, ign))


def test_control_derivative_examples():
    assert np.array_equal(control_derivative(np.zeros(2), 10 * np.eye(2)), np.zeros(2))
    assert np.array_equal(control_derivative(np.ones(2), 10 * np.eye(2)), [-10.0, -10.0])
    for bad in (np.diag([1.0, 0.0]), np.array([[1.0, 0.5], [0.0, 1.0]])):
        with pytest.raises(ValueError):
            control_derivative(np.ones(2), bad)


def test_filter_unit_dc_gain():
    # frozen omega_hat = I, constant source s0 in the estimate channel
    s0 = np.array([0.7, -1.3])
    k = 10.0
    u, t, dt = np.zeros(2), 0.0, 1e-3
    for _ in range(int(round(10 / k / dt))):
        u = rk4_step(lambda t, u: control_derivative(np.eye(2) @ u + s0, k * np.eye(2)), u, t, dt)
        t += dt
    assert np.all(np.abs(u + s0) <= 0.01 * np.abs(s0))


def test_zero_loop_stays_zero(cfg):
    cs = ControllerState.initial(np.zeros(6), cfg)
    for _ in range(50):
        cs = controller_step(cs, np.zeros(6), np.zeros(2), np.diag(cfg.K_const), cfg, 0.002)
    assert not np.any(cs.estimates() - ControllerState.initial(np.zeros(6), cfg).estimates())
    assert not np.any(cs.x_hat) and not np.any(cs.u)


def test_predictor_consistency_with_model_plant():
    """Plant equal to the predictor model keeps the prediction error at zero."""
    rng = np.random.default_rng(3)
    m = decompose(PlantParams())
    A_m = rng.normal(size=(6, 6)) * 0.3 - 3 * np.eye(6)
    c = L1Config(A_m=A_m, B_m=m.B_m, B_um=m.B_um, C=m.C)
    x = rng.normal(size=6)
    cs = ControllerState.initial(x, c)
    dt = 0.002
    for k in range(500):
        cs = ControllerState(**{**cs.__dict__, "u": np.array([np.sin(k * dt * 3), np.cos(k * dt)])})
        u = cs.u.copy()
        cs = controller_step(cs, x, np.array([0.2, -0.1]), 10 * np.eye(2), c, dt)
        x = rk4_step(lambda t, z: A_m @ z + m.B_m @ u, x, k * dt, dt)
        assert np.abs(cs.x_hat - x).max() < 1e-9


def test_config_validation():
    m = decompose(PlantParams())
    A_m = -np.eye(6)
    with pytest.raises(ValueError):
        L1Config(A_m=A_m, B_m=m.B_m, B_um=m.B_um, C=m.C, Gamma=0)
    with pytest.raises(ValueError):
        L1Config(A_m=A_m, B_m=m.B_m, B_um=m.B_um, C=m.C, K_const=(10, -1))
    with pytest.raises(ValueError):
        Bounds(theta1=(1, -1))
    with pytest.raises(Exception, match="not Hurwitz"):
        L1Config(A_m=np.eye(6), B_m=m.B_m, B_um=m.B_um, C=m.C)
