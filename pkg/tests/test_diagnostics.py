import math

import numpy as np
import pytest

from polcurve import diagnostics
from polcurve.errors import ConfigError, ExcitationError
from polcurve.regressors import RegressorStream

DT = 1e-3


def _stream(t, phi):
    return RegressorStream(t, np.zeros_like(t), phi)


def test_gram_trapezoid_exact_for_linear():
    t = np.linspace(0, 2, 201)
    G = diagnostics.gram(t, np.column_stack([np.ones_like(t), t]))
    assert np.allclose(G, [[2.0, 2.0], [2.0, 8 / 3]], rtol=1e-4)


def test_ie_pass_and_fail():
    t = np.arange(0, 3, DT)
    good = diagnostics.excitation_ie(_stream(t, np.column_stack([np.ones_like(t), np.sin(t)])), 2.0)
    assert good.passed and good.verdict == "IE-pass" and good.min_eigenvalue > 0
    bad = diagnostics.excitation_ie(_stream(t, np.column_stack([np.sin(t), 2 * np.sin(t)])), 2.0)
    assert not bad.passed and bad.verdict == "IE-fail" and bad.ratio < 1e-12
    d = good.to_dict()
    assert d["verdict"] == "IE-pass" and "min_eigenvalue" in d


def test_ie_absolute_threshold_and_short_stream():
    t = np.arange(0, 1, DT)
    s = _stream(t, np.column_stack([np.ones_like(t)]))
    assert diagnostics.excitation_ie(s, 0.5, threshold=0.4).passed
    assert not diagnostics.excitation_ie(s, 0.5, threshold=0.6).passed
    with pytest.raises(ExcitationError):
        diagnostics.excitation_ie(s, 5.0)


def test_pe_sliding_window():
    t = np.arange(0, 10, DT)
    s = _stream(t, np.column_stack([np.ones_like(t), np.sin(2 * math.pi * t)]))
    pe = diagnostics.excitation_pe(s, 1.0)
    assert pe.passed and pe.min_eig.min() == pytest.approx(0.5, rel=1e-2)
    # excitation that stops after 2 s is IE but not PE
    phi2 = np.where(t < 2, np.sin(2 * math.pi * t), 0.0)
    s2 = _stream(t, np.column_stack([np.ones_like(t), phi2]))
    assert diagnostics.excitation_ie(s2, 2.0).passed
    assert not diagnostics.excitation_pe(s2, 1.0).passed
    with pytest.raises(ExcitationError):
        diagnostics.excitation_pe(s, 20.0)


def test_fd_weights_exact_on_polynomials():
    offs = np.arange(-4, 5)
    for order in range(5):
        w = diagnostics.fd_weights(order, offs)
        for deg in range(9):
            expect = math.factorial(deg) if deg == order else 0.0
            assert np.dot(w, offs.astype(float) ** deg) == pytest.approx(expect, abs=1e-8)
    assert np.allclose(diagnostics.fd_weights(1, [-1, 0, 1]), [-0.5, 0, 0.5])
    with pytest.raises(ValueError):
        diagnostics.fd_weights(3, [-1, 0, 1])


def test_wronskian_separates_independent_from_dependent():
    t = np.arange(0, 2, DT)
    indep = np.column_stack([np.exp(t), np.exp(2 * t), np.exp(3 * t)])
    dep = np.column_stack([np.sin(t), np.cos(t), np.sin(t + 1)])
    wi = diagnostics.wronskian_determinant(_stream(t, indep))
    wd = diagnostics.wronskian_determinant(_stream(t, dep))
    # exact Wronskian of e^t, e^2t, e^3t is 2 e^{6t}
    mid = wi.t.size // 2
    assert wi.det[mid] == pytest.approx(2 * math.exp(6 * wi.t[mid]), rel=1e-5)
    assert np.median(wi.det_normalized) > 1e4 * np.max(wd.det_normalized)


def test_wronskian_errors():
    with pytest.raises(ConfigError):
        diagnostics.wronskian_determinant(np.ones((100, 2)))
    with pytest.raises(ExcitationError):
        diagnostics.wronskian_determinant(np.ones((5, 2)), dt=DT)
    with pytest.raises(ConfigError):
        diagnostics.wronskian_determinant(np.ones((100, 6)), dt=DT)


def test_m1_regressor_is_not_ie(m1_test2_consistent):
    rep = diagnostics.excitation_ie(m1_test2_consistent.window(5 / 80), 50.0)
    assert not rep.passed and rep.ratio < 1e-8


def test_wronskian_csv(tmp_path):
    t = np.arange(0, 0.1, DT)
    ws = diagnostics.wronskian_determinant(_stream(t, np.column_stack([np.sin(t), np.cos(t)])))
    ws.to_csv(tmp_path / "w.csv")
    assert (tmp_path / "w.csv").read_text().splitlines()[0] == "t,det,det_normalized"


def test_exponential_envelope_recovers_rate():
    t = np.arange(0, 5, DT)
    e = 2.0 * np.exp(-3.0 * t) * (1 + 0.05 * np.sin(40 * t)) + 1e-13
    fit = diagnostics.exponential_envelope(t, e)
    assert fit.rate == pytest.approx(-3.0, rel=1e-2) and fit.r_squared > 0.99
    with pytest.raises(ExcitationError):
        diagnostics.exponential_envelope(t, np.ones_like(t))
