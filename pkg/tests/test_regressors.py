import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polcurve import models, regressors, signals
from polcurve.errors import ConfigError, DomainError
from polcurve.regressors import RegressorStream

from conftest import DT, m1_stream

LAM = 80.0


def rel_residual(stream, image, t0=0.0):
    w = stream.window(t0)
    return np.max(np.abs(w.residual(image))) / np.max(np.abs(w.Y))


def test_m1_identity_exact_derivative(m1_test2_consistent):
    img = regressors.true_image("m1", models.REFERENCE_THETA)
    assert rel_residual(m1_test2_consistent, img, 5 / LAM) < 1e-3


def test_m1_identity_test1_exact_derivative():
    s = m1_stream(signals.current_test1(20.0))
    assert rel_residual(s, regressors.true_image("m1", models.REFERENCE_THETA), 5 / LAM) < 1e-3


def test_m1_identity_dirty_derivative_is_approximate():
    s = m1_stream(signals.current_test2(20.0), derivative="dirty")
    r = rel_residual(s, regressors.true_image("m1", models.REFERENCE_THETA), 5 / LAM)
    assert 1e-4 < r < 2e-2


def test_m1_zero_init_leaves_decaying_mismatch(m1_test2_zero):
    # all-zero filter states add an e^{-lam t} term that is still visible at 5/lam
    img = regressors.true_image("m1", models.REFERENCE_THETA)
    assert rel_residual(m1_test2_zero, img, 5 / LAM) > 1e-3
    assert rel_residual(m1_test2_zero, img, 40 / LAM) < 1e-3


def test_appendix_a_identity():
    sig = signals.current_test1(20.0)
    u = signals.generate_signal(sig, DT)
    y = models.synthesize("m1", models.REFERENCE_THETA, u)
    s = regressors.build_stream(regressors.AppendixAPipeline(DT, LAM, u_offset=sig.offset), u, y)
    img = regressors.true_image("appendix_a", models.REFERENCE_THETA, 2 * math.pi * sig.frequency)
    assert rel_residual(s, img, 5 / LAM) < 1e-3


@pytest.fixture(scope="module")
def pulse():
    return signals.generate_signal(signals.paper_pulse(10.0, rise_time=0.1), DT)


@pytest.mark.parametrize("model,params,kw,tol", [
    ("m2", models.SIM_EST_M2, {"E_oc": models.SIM_EST_M2.E_oc}, 1e-10),
    ("m3", models.SIM_EST_M3, {"E_oc": models.SIM_EST_M3.E_oc, "lam": LAM}, 1e-3),
    ("m4", models.SIM_EST_M4, {}, 1e-10),
])
def test_reduced_identities(pulse, model, params, kw, tol):
    y = models.synthesize(model, params, pulse)
    s = regressors.build_stream(regressors.make_pipeline(model, DT, **kw), pulse, y)
    assert rel_residual(s, regressors.true_image(model, params), 5 / LAM) < tol


def test_m2_single_sample_value():
    p = models.ReducedParamsAB(42.0, 1.0, 0.1, "m2")
    y = models.eval_m2(p, 10.0)
    smp = regressors.M2Regressor(DT, 42.0).step(10.0, y)
    assert smp.Y == pytest.approx(1.0, abs=1e-14)      # ln(e^1)
    smp = regressors.M2Regressor(DT, 42.0).step(10.0, 42.0 - 11.994)
    assert smp.Y == pytest.approx(2.48440652474631801, rel=1e-14)
    assert np.array_equal(smp.phi, [1.0, 10.0])


def test_m4_regressor_row():
    smp = regressors.M4Regressor(DT).step(10.0, 31.0)
    assert np.allclose(smp.phi, [1.0, 2.30258509299404568, 10.0], rtol=1e-15) and smp.Y == 31.0


def test_m3_sign_and_constant_input_zero():
    # equilibrium start: a constant input produces Y = phi = 0
    pipe = regressors.M3Pipeline(DT, 42.0, LAM)
    for _ in range(50):
        s = pipe.step(15.0, 30.0)
    assert abs(s.Y) < 1e-12 and abs(s.phi[0]) < 1e-12
    # a rising current lowers ln(E_oc - y) for b > 0, so Y and phi share sign
    pipe = regressors.M3Pipeline(DT, 42.0, LAM)
    p = models.ReducedParamsAB(42.0, 1.0, 0.5, "m3")
    for k in range(20):
        u = 10.0 + 0.1 * k
        s = pipe.step(u, models.eval_m3(p, u))
    assert s.phi[0] < 0 and s.Y < 0


def test_m1_constant_input_gives_zero_regressor():
    pipe = regressors.M1Pipeline(DT, LAM, derivative="exact")
    y = models.eval_m1(models.REFERENCE_THETA, 20.0)
    for _ in range(100):
        s = pipe.step(20.0, y, 0.0)
    assert np.max(np.abs(s.phi)) < 1e-12 and abs(s.Y) < 1e-12


def test_domain_and_config_errors():
    with pytest.raises(DomainError):
        regressors.M4Regressor(DT).step(0.0, 30.0)
    with pytest.raises(DomainError):
        regressors.M2Regressor(DT, 30.0).step(10.0, 31.0)
    with pytest.raises(ConfigError):
        regressors.M1Pipeline(DT, derivative="magic")
    with pytest.raises(ConfigError):
        regressors.M1Pipeline(DT, derivative="exact").step(10.0, 30.0)
    with pytest.raises(ConfigError):
        regressors.make_pipeline("m7", DT)
    with pytest.raises(ConfigError):
        regressors.M2Regressor(0.0, 42.0)


def test_stream_csv_round_trip(tmp_path, pulse):
    y = models.synthesize("m4", models.SIM_EST_M4, pulse)
    s = regressors.build_stream(regressors.M4Regressor(DT), pulse, y).window(0, 1)
    s.to_csv(tmp_path / "r.csv")
    cols = signals.read_columns(tmp_path / "r.csv")
    assert list(cols) == ["t", "Y", "phi_1", "phi_2", "phi_3"]
    assert np.array_equal(cols["Y"], s.Y) and np.array_equal(cols["phi_2"], s.phi[:, 1])


@settings(max_examples=40, deadline=None)
@given(st.floats(10.0, 30.0), st.floats(0.1, 3.0), st.floats(0.01, 0.2))
def test_m2_identity_property(E_oc, a, b):
    p = models.ReducedParamsAB(E_oc + 20.0, a, b, "m2")
    u = np.linspace(1.0, 10.0, 17)
    pipe = regressors.M2Regressor(DT, p.E_oc)
    smp = [pipe.step(x, models.eval_m2(p, x)) for x in u]
    s = RegressorStream.from_samples(smp)
    assert np.max(np.abs(s.residual(regressors.true_image("m2", p)))) < 1e-10
