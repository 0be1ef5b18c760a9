import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import solve_ivp

from polcurve import estimators, maps, models, regressors, signals
from polcurve.errors import ConfigError, DivergenceError, DomainError, ExcitationError
from polcurve.estimators import GradientEstimator, LsdEstimator, batch_ls
from polcurve.regressors import RegressorSample, RegressorStream


# --------------------------------------------------------------------------- adjugate

@settings(max_examples=60, deadline=None)
@given(arrays(float, (4, 4), elements=st.floats(-5, 5)))
def test_adjugate_identity(A):
    adj = estimators.adjugate(A)
    assert np.allclose(adj @ A, np.linalg.det(A) * np.eye(4), atol=1e-7 * max(1, np.abs(A).max() ** 4))


def test_adjugate_examples():
    assert np.allclose(estimators.adjugate([[1.0, 2.0], [3.0, 4.0]]), [[4.0, -2.0], [-3.0, 1.0]], atol=1e-14)
    assert np.array_equal(estimators.adjugate([[7.0]]), [[1.0]])
    stack = np.stack([np.eye(3), 2 * np.eye(3)])
    assert np.allclose(estimators.adjugate(stack), [np.eye(3), 4 * np.eye(3)])


# --------------------------------------------------------------------------- LSD

def _stream(t, phi, Y):
    return RegressorStream(t, Y, phi)


def test_lsd_scalar_matches_riccati_ode():
    """Information-form update vs the Riccati/gradient ODE integrated by scipy."""
    g0, f0, G, w_true, W0, eta0 = 2.0, 0.5, 3.0, 1.7, -0.4, 0.3
    phi = lambda t: 1.0 + 0.5 * math.sin(2 * t)

    def rhs(t, x):
        F, W, eta = x
        ph = phi(t)
        Fd = -g0 * F * ph * ph * F
        Wd = g0 * F * ph * (ph * w_true - ph * W)
        D = 1 - f0 * F
        Yc = W - f0 * F * W0
        return [Fd, Wd, G * D * (Yc - D * eta)]

    T, dt = 6.0, 1e-3
    ref = solve_ivp(rhs, (0, T), [1 / f0, W0, eta0], rtol=1e-11, atol=1e-12, t_eval=[1.0, 3.0, T])
    t = np.arange(0, T + dt / 2, dt)
    ph = 1.0 + 0.5 * np.sin(2 * t)
    est = LsdEstimator(maps.identity_map(1), g0, f0, G, dt, W0=[W0], eta0=[eta0], method="rk4")
    tr = est.run_stream(_stream(t, ph[:, None], ph * w_true))
    for k, tk in enumerate(ref.t):
        i = int(round(tk / dt))
        assert tr.W[i, 0] == pytest.approx(ref.y[1, k], abs=1e-6)
        assert tr.eta[i, 0] == pytest.approx(ref.y[2, k], abs=1e-6)
        assert 1 - f0 * tr.Delta[i] > 0


def test_run_stream_equals_stepwise():
    dt = 1e-3
    u = signals.generate_signal(signals.paper_pulse(2.0, rise_time=0.1), dt)
    y = models.synthesize("m4", models.SIM_EST_M4, u)
    s = regressors.build_stream(regressors.M4Regressor(dt), u, y)
    a = LsdEstimator(maps.identity_map(3), 24.0, 1e-6, 30.0, dt).run_stream(s)
    b = LsdEstimator(maps.identity_map(3), 24.0, 1e-6, 30.0, dt)
    for smp in s.samples():
        b.step(smp)
    tb = b.trajectory()
    assert np.allclose(a.eta, tb.eta, rtol=1e-9, atol=1e-12)
    assert np.allclose(a.Delta, tb.Delta, rtol=1e-9, atol=1e-15)


def test_lsd_nonlinear_map_converges_on_synthetic_regression():
    """Y = phi^T G(eta) with a rich regressor: eta recovers the truth."""
    dt = 1e-3
    t = np.arange(0, 8.0, dt)
    phi = np.column_stack([np.sin((k + 1) * t) + (k == 0) for k in range(5)])
    eta_true = np.array([0.5, -1.2, 0.3, 0.8])
    Y = phi @ maps.g_map(eta_true)
    est = LsdEstimator(maps.G_MAP, 10.0, 1e-4, 50.0, dt, eta0=[0.1, 0.5, 0.0, 0.0])
    tr = est.run_stream(_stream(t, phi, Y))
    assert np.allclose(tr.final, eta_true, atol=1e-6)


def test_divergence_guard():
    est = LsdEstimator(maps.identity_map(1), 1.0, 1.0, 1.0, 1e-3)
    with pytest.raises(DivergenceError) as exc:
        for k in range(5):
            est.step(RegressorSample(k * 1e-3, 1e15, np.array([1.0])))
    assert exc.value.snapshot and len(exc.value.snapshot) <= 100


def test_lsd_config_errors():
    with pytest.raises(ConfigError):
        LsdEstimator(maps.identity_map(2), -1.0, 1.0, 1.0, 1e-3)
    with pytest.raises(ConfigError):
        LsdEstimator(maps.identity_map(2), 1.0, 1.0, [[1.0, 2.0], [0.0, 1.0]], 1e-3)
    with pytest.raises(ConfigError):
        LsdEstimator(maps.identity_map(2), 1.0, 1.0, 1.0, 1e-3, method="euler")
    est = LsdEstimator(maps.identity_map(2), 1.0, 1.0, 1.0, 1e-3)
    with pytest.raises(ConfigError):
        est.step(RegressorSample(0.0, 1.0, np.ones(3)))


# --------------------------------------------------------------------------- gradient

def test_gradient_constant_regressor_decays_exponentially():
    dt = 1e-3
    est = GradientEstimator(2.0, dt, eta0=[0.0], method="rk4")
    for k in range(2001):
        est.step(RegressorSample(k * dt, 3.0, np.array([1.0])))
    # eta' = -2 (eta - 3)  ->  eta(2) = 3 (1 - e^{-4})
    assert est.eta[0] == pytest.approx(3 * (1 - math.exp(-4.0)), rel=1e-10)


def test_gradient_zero_regressor_freezes():
    est = GradientEstimator(1.0, 1e-3, eta0=[0.7, -0.2])
    for k in range(100):
        est.step(RegressorSample(k * 1e-3, 0.0, np.zeros(2)))
    assert np.array_equal(est.eta, [0.7, -0.2])


def test_gradient_implicit_is_stable_for_huge_gain():
    est = GradientEstimator(1e7, 1e-3, eta0=[0.0])
    for k in range(10):
        est.step(RegressorSample(k * 1e-3, 2.0, np.array([1.0])))
    assert est.eta[0] == pytest.approx(2.0, rel=1e-6)


def test_whitening_gain_inverts_gram():
    t = np.arange(0, 2 * math.pi, 1e-3)
    phi = np.column_stack([np.ones_like(t), np.sin(t)])
    G = estimators.whitening_gain(_stream(t, phi, np.zeros_like(t)), 4.0)
    R = phi.T @ phi / len(t)
    assert np.allclose(G @ R, 4.0 * np.eye(2), atol=1e-9)
    with pytest.raises(ExcitationError):
        estimators.whitening_gain(_stream(t, np.column_stack([np.ones_like(t)] * 2), t), 1.0)


# --------------------------------------------------------------------------- algebraic

def test_theta5_exact_on_noiseless_m1():
    th = models.REFERENCE_THETA
    u = np.linspace(1.0, 30.0, 300)
    y = models.eval_m1(th, u)
    assert np.max(np.abs(estimators.estimate_theta5(th.theta14, u, y) - th.theta5)) < 1e-12


def test_theta5_converges_with_exponential_parameter_error():
    th = models.REFERENCE_THETA
    t = np.arange(0, 20.0, 1e-2)
    u = 25 + 5 * np.sin(0.2 * math.pi * t)
    y = models.eval_m1(th, u)
    c = np.array([0.1, -0.01, 0.02, 1.0])
    hat = np.asarray(th.theta14)[None, :] + np.exp(-t)[:, None] * c
    err = np.abs(np.array([estimators.estimate_theta5(h, ui, yi) for h, ui, yi in zip(hat, u, y)]) - th.theta5)
    assert np.all(err[t >= 15.0] < 1e-4)
    assert err[0] > 1e-2


def test_a_m3_exact_and_errors():
    p = models.SIM_EST_M3
    u = np.linspace(1.0, 30.0, 100)
    y = models.eval_m3(p, u)
    assert np.max(np.abs(estimators.estimate_a_m3(p.E_oc, u, y, p.b) - p.a)) < 1e-12
    with pytest.raises(DomainError):
        estimators.estimate_a_m3(p.E_oc, [0.0], [30.0], p.b)
    with pytest.raises(DomainError):
        estimators.estimate_a_m3(20.0, [1.0], [30.0], p.b)


# --------------------------------------------------------------------------- batch oracle

def test_batch_ls_exact_and_singular():
    t = np.linspace(0, 1, 50)
    phi = np.column_stack([np.ones_like(t), t])
    r = batch_ls(_stream(t, phi, 2.0 - 3.0 * t))
    assert np.allclose(r.w, [2.0, -3.0]) and r.residual_rms < 1e-12 and 0 < r.ratio < 1
    with pytest.raises(ExcitationError, match="not IE"):
        batch_ls(_stream(t, np.column_stack([t, 2 * t]), t))


def test_batch_ls_noise_scaling(rng):
    """Estimator standard error shrinks like 1/sqrt(N)."""
    def spread(n):
        errs = []
        for _ in range(200):
            x = rng.uniform(-1, 1, n)
            phi = np.column_stack([np.ones(n), x])
            Y = phi @ [1.0, 2.0] + rng.normal(0, 0.1, n)
            errs.append(batch_ls(_stream(np.arange(n, dtype=float), phi, Y)).w[1] - 2.0)
        return np.std(errs)
    ratio = spread(100) / spread(1600)
    assert 3.0 < ratio < 5.3
