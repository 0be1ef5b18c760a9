import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polcurve import signals
from polcurve.errors import ConfigError, DomainError
from polcurve.signals import Cascade, DirtyDerivative, HighPassGain, Leaky, LowPass, Trace

DT = 1e-3


def run(filt, fn, T, dt=DT):
    t = dt * np.arange(int(round(T / dt)) + 1)
    return t, filt.apply(fn(t))


# ---- closed-form responses --------------------------------------------------


def test_highpass_constant_from_rest_is_zero():
    _, z = run(HighPassGain(3.0, DT, "rest"), lambda t: np.full_like(t, 7.5), 2.0)
    assert np.max(np.abs(z)) < 1e-12


def test_highpass_unit_step():
    t, z = run(HighPassGain(1.0, DT), np.ones_like, 5.0)
    assert z[1000] == pytest.approx(math.exp(-1.0), rel=1e-9)
    assert np.max(np.abs(z - np.exp(-t))) < 1e-9


def test_highpass_sine_amplitude():
    t, z = run(HighPassGain(1.0, DT), np.sin, 60.0)
    tail = z[t > 40]
    assert tail.max() == pytest.approx(1 / math.sqrt(2), rel=1e-3)


def test_lowpass_fixed_point():
    _, z = run(LowPass(2.0, DT, "rest"), lambda t: np.full_like(t, 3.25), 1.0)
    assert np.allclose(z, 3.25, atol=1e-13)


def test_lowpass_unit_step():
    t, z = run(LowPass(2.0, DT), np.ones_like, 3.0)
    exact = 1 - np.exp(-2 * t)
    assert np.max(np.abs(z[1:] - exact[1:]) / exact[1:]) < 1e-3


def test_lowpass_sine_gain_and_phase():
    w = 3.0
    t, z = run(LowPass(w, DT), lambda t: np.sin(w * t), 20.0)
    exact = np.sin(w * t - math.pi / 4) / math.sqrt(2)
    m = t > 10
    assert np.max(np.abs(z[m] - exact[m])) < 1e-3 / math.sqrt(2)


def test_leaky_dc_gain():
    _, z = run(Leaky(4.0, DT, "rest"), lambda t: np.full_like(t, 2.0), 1.0)
    assert np.allclose(z, 0.5, atol=1e-12)


def test_cascade_of_lowpasses_step():
    lam = 2.0
    t, z = run(Cascade(LowPass(lam, DT), LowPass(lam, DT)), np.ones_like, 4.0)
    exact = 1 - np.exp(-lam * t) * (1 + lam * t)
    m = t > 0.5
    assert np.max(np.abs(z[m] - exact[m]) / exact[m]) < 1e-3


def test_dirty_derivative_constant():
    _, z = run(DirtyDerivative(0.01, DT, "rest"), lambda t: np.full_like(t, 9.0), 1.0)
    assert np.max(np.abs(z)) < 1e-12


def test_dirty_derivative_ramp():
    tau = 0.01
    t, z = run(DirtyDerivative(tau, DT), lambda t: t, 0.2)
    exact = 1 - np.exp(-t / tau)
    assert np.max(np.abs(z - exact)) < 1e-3
    assert z[t >= 5 * tau].min() > 0.99


def test_dirty_derivative_slow_sine():
    tau, w = 1e-3, 2.0
    t, z = run(DirtyDerivative(tau, DT, "rest"), lambda t: np.sin(w * t), 5.0)
    m = t > 0.1
    assert np.max(np.abs(z[m] - w * np.cos(w * t[m]))) < 3 * w * tau * w


@pytest.mark.parametrize("make", [lambda dt: LowPass(1.0, dt), lambda dt: HighPassGain(1.0, dt)])
def test_rk4_order_by_step_halving(make):
    def err(dt):
        t = dt * np.arange(int(round(4.0 / dt)) + 1)
        z = make(dt).apply(np.sin(t))
        if isinstance(make(dt), HighPassGain):
            exact = (np.sin(t) + np.cos(t) - np.exp(-t)) / 2
        else:
            exact = (np.sin(t) - np.cos(t) + np.exp(-t)) / 2
        return np.max(np.abs(z - exact))

    assert err(0.05) / err(0.025) >= 8.0


def test_non_finite_sample_rejected():
    f = LowPass(1.0, DT)
    f.step(1.0)
    with pytest.raises(DomainError, match="non-finite sample"):
        f.step(float("nan"))


def test_bad_parameters():
    with pytest.raises(ConfigError):
        LowPass(-1.0, DT)
    with pytest.raises(ConfigError):
        DirtyDerivative(0.0, DT)


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31 - 1))
def test_filters_are_linear(a, b, seed):
    r = np.random.default_rng(seed)
    v1, v2 = r.normal(size=50), r.normal(size=50)
    for cls in (LowPass, HighPassGain, Leaky):
        z = cls(7.0, 0.01).apply(a * v1 + b * v2)
        z1, z2 = cls(7.0, 0.01).apply(v1), cls(7.0, 0.01).apply(v2)
        assert np.allclose(z, a * z1 + b * z2, atol=1e-9)


# ---- signals ------------------------------------------------------------------


def test_constant_signal():
    tr = signals.generate_signal(signals.Constant(25.0, 1.0), 0.001)
    assert len(tr) == 1000 and np.all(tr.samples == 25.0)


def test_named_test_signals():
    t = np.linspace(0, 20, 2001)
    assert np.allclose(signals.current_test1()(t), 25 + 5 * np.cos(0.2 * np.pi * t))
    k = 20 / np.pi
    ref = 25 + k * (np.sin(0.2 * np.pi * t) + np.sin(0.6 * np.pi * t) / 3 + np.sin(np.pi * t) / 5)
    assert np.allclose(signals.current_test2()(t), ref)


def test_pulse_levels_and_ramps():
    p = signals.paper_pulse(2.0)
    t = np.array([0.0, 0.1, 0.26, 0.51])
    assert list(p(t)) == [20.0, 20.0, 10.0, 20.0]
    r = signals.paper_pulse(2.0, rise_time=0.1)
    assert r(np.array([0.30]))[0] == pytest.approx(15.0)
    assert r.derivative(np.array([0.30]))[0] == pytest.approx(-100.0)
    with pytest.raises(ConfigError):
        signals.PulseTrain(10, 20, 2.0, 1.0, rise_time=0.3)


def test_analytic_derivatives():
    for spec in (signals.current_test1(), signals.current_test2()):
        t = np.linspace(1, 5, 9)
        h = 1e-6
        fd = (spec(t + h) - spec(t - h)) / (2 * h)
        assert np.allclose(spec.derivative(t), fd, atol=1e-6)


def test_trace_csv_round_trip(tmp_path):
    tr = Trace(0.01, np.sin(np.arange(50) * 0.3) * 1e-7 + 1 / 3, t0=2.0)
    tr.to_csv(tmp_path / "x.csv")
    back = Trace.from_csv(tmp_path / "x.csv")
    assert back.dt == pytest.approx(tr.dt) and back.t0 == tr.t0
    assert np.array_equal(back.samples, tr.samples)
    assert (tmp_path / "x.csv").read_text().splitlines()[0] == "t,value"


def test_trace_rejects_non_finite():
    with pytest.raises(DomainError):
        Trace(0.1, [1.0, float("inf")])
