"""Identifiability and excitation diagnostics for regressor streams."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ExcitationError
from .regressors import RegressorStream
from .signals import write_columns

DEFAULT_REL_THRESHOLD = 1e-6


def _phi_array(stream):
    if isinstance(stream, RegressorStream):
        return stream.t, stream.phi
    stream = RegressorStream.from_samples(stream)
    return stream.t, stream.phi


def gram(t, phi) -> np.ndarray:
    """Trapezoidal ``int phi phi^T dt`` over the given samples."""
    t = np.asarray(t, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if t.size < 2:
        return np.zeros((phi.shape[1], phi.shape[1]))
    w = np.empty_like(t)
    d = np.diff(t)
    w[0], w[-1] = d[0] / 2, d[-1] / 2
    w[1:-1] = (d[:-1] + d[1:]) / 2
    return (phi * w[:, None]).T @ phi


@dataclass
class ExcitationReport:
    window: tuple
    gram: np.ndarray
    min_eigenvalue: float
    max_eigenvalue: float
    threshold: float
    passed: bool

    @property
    def ratio(self) -> float:
        return self.min_eigenvalue / self.max_eigenvalue if self.max_eigenvalue > 0 else 0.0

    @property
    def verdict(self) -> str:
        return "IE-pass" if self.passed else "IE-fail"

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "gram": self.gram.tolist(),
            "min_eigenvalue": self.min_eigenvalue,
            "max_eigenvalue": self.max_eigenvalue,
            "eigenvalue_ratio": self.ratio,
            "threshold": self.threshold,
            "verdict": self.verdict,
        }


def _report(window, G, threshold, rel_threshold):
    ev = np.linalg.eigvalsh(0.5 * (G + G.T))
    lo, hi = float(ev[0]), float(ev[-1])
    thr = float(threshold) if threshold is not None else rel_threshold * hi
    return ExcitationReport(window, G, lo, hi, thr, bool(hi > 0 and lo >= thr))


def excitation_ie(stream, t_c: float, threshold=None, rel_threshold=DEFAULT_REL_THRESHOLD) -> ExcitationReport:
    """Interval excitation on ``[t_0, t_0 + t_c]``.

    Without an absolute ``threshold`` the test is scale-free: pass iff the
    smallest Gram eigenvalue is at least ``rel_threshold`` times the largest.
    """
    t, phi = _phi_array(stream)
    if t.size == 0:
        raise ExcitationError("empty stream")
    t_end = t[0] + t_c
    if t[-1] < t_end - 1e-9 * max(1.0, abs(t_end)):
        raise ExcitationError(f"stream ends at {t[-1]:g}, before t_c = {t_c:g}")
    m = t <= t_end + 1e-12
    return _report((float(t[0]), float(t_end)), gram(t[m], phi[m]), threshold, rel_threshold)


@dataclass
class PESeries:
    t_window: np.ndarray
    min_eig: np.ndarray
    max_eig: np.ndarray
    T_window: float
    threshold: float
    passed: bool

    @property
    def verdict(self) -> str:
        return "PE-pass" if self.passed else "PE-fail"

    def to_csv(self, path):
        write_columns(path, ["t_window", "min_eig"], [self.t_window, self.min_eig])

    def to_dict(self) -> dict:
        return {
            "T_window": self.T_window,
            "windows": int(self.t_window.size),
            "min_eig": float(self.min_eig.min()),
            "threshold": self.threshold,
            "verdict": self.verdict,
        }


def excitation_pe(stream, T_window: float, stride: int | None = None, threshold=None,
                  rel_threshold=DEFAULT_REL_THRESHOLD) -> PESeries:
    """Sliding-window Gram minimum eigenvalue.

    Windows start every ``stride`` samples (default: a tenth of a window).  The
    relative threshold is taken against the largest eigenvalue seen in any window.
    """
    t, phi = _phi_array(stream)
    if t.size < 2:
        raise ExcitationError("empty stream")
    dt = t[1] - t[0]
    n_win = int(round(T_window / dt))
    if n_win < 1 or n_win >= t.size:
        raise ExcitationError("stream shorter than the PE window")
    stride = stride or max(1, n_win // 10)
    # cumulative trapezoid of phi phi^T
    outer = phi[:, :, None] * phi[:, None, :]
    cum = np.concatenate([np.zeros((1,) + outer.shape[1:]), np.cumsum(0.5 * dt * (outer[1:] + outer[:-1]), axis=0)])
    starts = np.arange(0, t.size - n_win, stride)
    G = cum[starts + n_win] - cum[starts]
    ev = np.linalg.eigvalsh(0.5 * (G + np.swapaxes(G, 1, 2)))
    lo, hi = ev[:, 0], ev[:, -1]
    thr = float(threshold) if threshold is not None else rel_threshold * float(hi.max())
    return PESeries(t[starts], lo, hi, float(T_window), thr, bool(lo.min() >= thr and hi.max() > 0))


# --------------------------------------------------------------------------- #
# Wronskian
# --------------------------------------------------------------------------- #


def fd_weights(order: int, offsets) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at 0 (unit spacing)."""
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    if order >= n:
        raise ValueError("stencil too small for this derivative order")
    A = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(A, rhs)


_STENCIL = np.arange(-4, 5)
_WEIGHTS = [fd_weights(k, _STENCIL) for k in range(5)]


@dataclass
class WronskianSeries:
    t: np.ndarray
    det: np.ndarray
    det_normalized: np.ndarray
    transient_peak: float

    def to_csv(self, path):
        write_columns(path, ["t", "det", "det_normalized"], [self.t, self.det, self.det_normalized])

    def after(self, t_start):
        m = self.t >= t_start
        return self.det[m], self.det_normalized[m]


def wronskian_matrices(phi, dt, stride=1) -> np.ndarray:
    """Stacked ``[phi; p phi; ...; p^(n-1) phi]`` at every interior sample (central 9-point stencils)."""
    phi = np.asarray(phi, dtype=float)
    n, p = phi.shape
    h = dt * stride
    reach = 4 * stride
    if n < 2 * reach + 1:
        raise ExcitationError(f"need at least {2 * reach + 1} samples for the Wronskian stencils")
    if p > 5:
        raise ConfigError("Wronskian stencils support at most 5 components")
    idx = np.arange(reach, n - reach)
    W = np.empty((idx.size, p, p))
    for k in range(p):
        acc = np.zeros((idx.size, p))
        for w, off in zip(_WEIGHTS[k], _STENCIL):
            if w != 0.0:
                acc += w * phi[idx + off * stride]
        W[:, k, :] = acc / h**k
    return W


def wronskian_determinant(stream, dt=None, stride=1, transient_end=None) -> WronskianSeries:
    """Determinant of the Wronskian of ``phi`` and its row-norm-normalized version.

    ``transient_peak`` is the largest normalized determinant before
    ``transient_end`` (default: the whole series).
    """
    if isinstance(stream, RegressorStream):
        t, phi = stream.t, stream.phi
        dt = dt if dt is not None else stream.dt
    else:
        phi = np.asarray(stream, dtype=float)
        if dt is None:
            raise ConfigError("dt required for raw arrays")
        t = dt * np.arange(phi.shape[0])
    if t.size > 2:
        d = np.diff(t)
        if not np.allclose(d, dt, rtol=1e-6, atol=1e-12):
            raise ConfigError("Wronskian needs a uniformly sampled stream")
    W = wronskian_matrices(phi, dt, stride)
    det = np.linalg.det(W)
    norms = np.prod(np.linalg.norm(W, axis=2), axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        dn = np.where(norms > 0, np.abs(det) / norms, 0.0)
    reach = 4 * stride
    tt = t[reach: t.size - reach]
    m = tt <= transient_end if transient_end is not None else np.ones(tt.size, bool)
    peak = float(dn[m].max()) if m.any() else 0.0
    return WronskianSeries(tt, det, dn, peak)


# --------------------------------------------------------------------------- #
# convergence envelope
# --------------------------------------------------------------------------- #


@dataclass
class EnvelopeFit:
    rate: float          # slope of log error [1/s]
    r_squared: float
    t_start: float
    t_end: float
    n: int


def exponential_envelope(t, err, floor=1e-10) -> EnvelopeFit:
    """Straight-line fit of ``log err`` over the decaying segment.

    The segment opens at the first sample where the error has dropped below
    90% of its initial value and closes when it reaches the noise floor,
    ``max(floor, 10 * median of the last 10% of err)``.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(err, dtype=float)
    if e.ndim == 2:
        e = e.max(axis=1)
    tail = e[-max(1, e.size // 10):]
    stop = max(floor, 10.0 * float(np.median(tail)))
    below = np.flatnonzero(e < 0.9 * e[0])
    if below.size == 0:
        raise ExcitationError("error never decays")
    s = int(below[0])
    done = np.flatnonzero(e[s:] < stop)
    end = s + int(done[0]) if done.size else e.size
    if end - s < 3:
        raise ExcitationError("decaying segment too short to fit")
    tt, le = t[s:end], np.log(e[s:end])
    c = np.polyfit(tt, le, 1)
    ss = float(np.sum((le - np.polyval(c, tt)) ** 2))
    st = float(np.sum((le - le.mean()) ** 2))
    return EnvelopeFit(float(c[0]), 1.0 - ss / st if st > 0 else 1.0, float(tt[0]), float(tt[-1]), int(tt.size))


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
