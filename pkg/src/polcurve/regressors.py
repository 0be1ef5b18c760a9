"""Measurable regression pairs ``Y = phi^T W`` for each polarization-curve model.

Each pipeline consumes one ``(u, y)`` sample per tick (current, voltage) and
returns a :class:`RegressorSample`.  ``build_stream`` is the batch wrapper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import maps
from .errors import ConfigError, DomainError
from .signals import DirtyDerivative, FirstOrderFilter, HighPassGain, Leaky, LowPass, Trace, write_columns

DEFAULT_LAMBDA = 80.0


@dataclass(frozen=True)
class RegressorSample:
    t: float
    Y: float
    phi: np.ndarray


@dataclass
class RegressorStream:
    """A whole regressor stream as arrays: ``t (N,)``, ``Y (N,)``, ``phi (N, p)``."""

    t: np.ndarray
    Y: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.phi.ndim == 1:
            self.phi = self.phi[:, None]
        if not (self.t.shape == self.Y.shape == self.phi.shape[:1]):
            raise ValueError("stream arrays have inconsistent lengths")

    def __len__(self):
        return self.t.size

    @property
    def p(self) -> int:
        return self.phi.shape[1]

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else float("nan")

    def samples(self):
        for k in range(self.t.size):
            yield RegressorSample(float(self.t[k]), float(self.Y[k]), self.phi[k])

    def window(self, t_start=-math.inf, t_end=math.inf) -> "RegressorStream":
        m = (self.t >= t_start) & (self.t <= t_end)
        return RegressorStream(self.t[m], self.Y[m], self.phi[m])

    def residual(self, image) -> np.ndarray:
        """``Y - phi @ image`` for a candidate parameter image."""
        return self.Y - self.phi @ np.asarray(image, dtype=float)

    def to_csv(self, path) -> None:
        header = ["t", "Y"] + [f"phi_{k + 1}" for k in range(self.p)]
        write_columns(path, header, [self.t, self.Y] + [self.phi[:, k] for k in range(self.p)])

    @classmethod
    def from_samples(cls, samples) -> "RegressorStream":
        samples = list(samples)
        if not samples:
            raise ValueError("empty stream")
        return cls(
            np.array([s.t for s in samples]),
            np.array([s.Y for s in samples]),
            np.array([np.asarray(s.phi, dtype=float) for s in samples]),
        )


def _check_finite(Y, phi):
    if not (math.isfinite(Y) and np.all(np.isfinite(phi))):
        raise DomainError("non-finite regressor sample")


def _ln_current(u):
    if not u > 0:
        raise DomainError(f"logarithm domain: current must be > 0, got {u}")
    return math.log(u)


def _ln_gap(E_oc, y):
    gap = E_oc - y
    if not gap > 0:
        raise DomainError(f"E_oc dominance violated: E_oc - y = {gap}")
    return math.log(gap)


class _Clocked:
    def __init__(self, dt):
        if not dt > 0:
            raise ConfigError("dt must be positive")
        self.dt = float(dt)
        self.k = 0

    def _tick(self):
        t = self.k * self.dt
        self.k += 1
        return t


class M1Pipeline(_Clocked):
    """Filtered SNLP for the full model; parameters enter through ``maps.w_map``.

    ``derivative`` selects the source of ``du/dt``: ``"exact"`` (passed to
    :meth:`step`) or ``"dirty"`` (``p/(tau p + 1)`` of ``u``).

    ``init="consistent"`` starts every ``lam p/(p+lam)`` block with zero output
    and every low-pass at zero, which removes the exponentially decaying
    mismatch term; ``init="zero"`` zeroes all states instead.
    """

    p = 5
    model = "m1"

    def __init__(self, dt, lam=DEFAULT_LAMBDA, derivative="dirty", tau=None, init="consistent"):
        super().__init__(dt)
        if derivative not in ("exact", "dirty"):
            raise ConfigError(f"derivative must be 'exact' or 'dirty', got {derivative!r}")
        if init not in ("consistent", "zero"):
            raise ConfigError(f"init must be 'consistent' or 'zero', got {init!r}")
        self.lam = float(lam)
        self.derivative = derivative
        self.tau = float(tau) if tau is not None else 10.0 * dt
        hp_init = "rest" if init == "consistent" else "zero"
        self.hp_y = HighPassGain(lam, dt, hp_init)
        self.hp_lnu = HighPassGain(lam, dt, hp_init)
        self.lp_udy = LowPass(lam, dt)
        self.lp_udlnu = LowPass(lam, dt)
        self.hp_u2 = HighPassGain(lam, dt, hp_init)
        self.hp_u = HighPassGain(lam, dt, hp_init)
        self.dd = DirtyDerivative(self.tau, dt, "rest") if derivative == "dirty" else None

    def step(self, u, y, u_dot=None) -> RegressorSample:
        t = self._tick()
        lnu = _ln_current(u)
        if self.dd is not None:
            u_dot = self.dd.step(u)
        elif u_dot is None:
            raise ConfigError("exact derivative mode needs u_dot")
        Y = self.hp_y.step(y)
        phi = np.array([
            self.hp_lnu.step(lnu),
            self.lp_udy.step(u_dot * y),
            -self.lp_udlnu.step(u_dot * lnu),
            -0.5 * self.hp_u2.step(u * u),
            self.hp_u.step(u),
        ])
        _check_finite(Y, phi)
        return RegressorSample(t, Y, phi)


class M2Regressor(_Clocked):
    """Memoryless LRE ``ln(E_oc - y) = ln(a) + b*u``."""

    p = 2
    model = "m2"

    def __init__(self, dt, E_oc):
        super().__init__(dt)
        self.E_oc = float(E_oc)

    def step(self, u, y, u_dot=None) -> RegressorSample:
        t = self._tick()
        Y = _ln_gap(self.E_oc, y)
        phi = np.array([1.0, float(u)])
        _check_finite(Y, phi)
        return RegressorSample(t, Y, phi)


class M3Pipeline(_Clocked):
    """Scalar LRE ``Y = phi * b`` from the second-order dynamic extension.

    ``x1' = -lam (x1 - lam ln(E_oc - y))``, ``Y = x1 - lam ln(E_oc - y)`` and the
    same for ``x2`` with ``ln(u)``; both start at their equilibrium so no
    decaying term appears.
    """

    p = 1
    model = "m3"

    def __init__(self, dt, E_oc, lam=DEFAULT_LAMBDA):
        super().__init__(dt)
        self.E_oc = float(E_oc)
        self.lam = float(lam)
        # x' = -lam*x + lam^2*v, out = x - lam*v, equilibrium start
        self.x1 = FirstOrderFilter(lam, dt, b=lam * lam, c=1.0, d=-lam, init="rest")
        self.x2 = FirstOrderFilter(lam, dt, b=lam * lam, c=1.0, d=-lam, init="rest")

    def step(self, u, y, u_dot=None) -> RegressorSample:
        t = self._tick()
        w = _ln_gap(self.E_oc, y)
        m = _ln_current(u)
        Y = self.x1.step(w)
        phi = np.array([self.x2.step(m)])
        _check_finite(Y, phi)
        return RegressorSample(t, Y, phi)


class M4Regressor(_Clocked):
    """Memoryless LRE ``y = th6 + th1 ln(u) + th2 u``."""

    p = 3
    model = "m4"

    def __init__(self, dt):
        super().__init__(dt)

    def step(self, u, y, u_dot=None) -> RegressorSample:
        t = self._tick()
        phi = np.array([1.0, _ln_current(u), float(u)])
        Y = float(y)
        _check_finite(Y, phi)
        return RegressorSample(t, Y, phi)


class AppendixAPipeline(_Clocked):
    """Derivative-free SNLP ``Z = [G(th1..4); th3*omega^2]^T chi`` for sinusoidal current.

    The construction relies on ``u'' = -omega^2 (u - u_offset)``; ``u_offset`` is
    the known centre of the sinusoid (zero for a pure sine, which then cannot
    feed ``ln(u)``).  Neither ``du/dt`` nor ``omega`` is used.
    """

    p = 6
    model = "appendix_a"

    def __init__(self, dt, lam=DEFAULT_LAMBDA, u_offset=0.0):
        super().__init__(dt)
        self.lam = float(lam)
        self.u_offset = float(u_offset)
        L = lam
        self.hp_y = HighPassGain(L, dt, "rest")
        self.hp_lnu = HighPassGain(L, dt, "rest")
        self.hp_u = HighPassGain(L, dt, "rest")
        self.hp_ulnu = HighPassGain(L, dt, "rest")
        self.hp_u2 = HighPassGain(L, dt, "rest")
        self.leak_y = Leaky(L, dt)          # 1/(p+lam) y
        self.lp_xi6 = LowPass(L, dt)        # lam/(p+lam) (u-c) * 1/(p+lam) y
        self.lp_y = LowPass(L, dt)          # F y
        self.lp_lp_y = LowPass(L, dt)       # F^2 y
        self.leak_lp_y = Leaky(L, dt)       # lam/(p+lam)^2 y
        self.lp_term = LowPass(L, dt)       # F((u-c) * lam/(p+lam)^2 y)
        self.lp_Y = LowPass(L, dt)
        self.lp_xi = [LowPass(L, dt) for _ in range(6)]

    def step(self, u, y, u_dot=None) -> RegressorSample:
        t = self._tick()
        lnu = _ln_current(u)
        uc = u - self.u_offset
        Y = self.hp_y.step(y)
        hp_u = self.hp_u.step(u)
        xi = np.array([
            self.hp_lnu.step(lnu),
            hp_u,
            -hp_u,
            -self.hp_ulnu.step(u * lnu) + hp_u,
            -0.5 * self.hp_u2.step(u * u),
            0.0,
        ])
        xi[5] = self.lp_xi6.step(uc * self.leak_y.step(y))
        Fy = self.lp_y.step(y)
        F2y = self.lp_lp_y.step(Fy)
        g = self.leak_lp_y.step(Fy)
        term = self.lp_term.step(uc * g)
        FY = self.lp_Y.step(Y)
        Fxi = np.array([f.step(v) for f, v in zip(self.lp_xi, xi)])
        chi = F2y * xi - Fy * Fxi
        chi[5] -= term * Fy
        Z = Y * F2y - FY * Fy
        _check_finite(Z, chi)
        return RegressorSample(t, Z, chi)


PIPELINES = {
    "m1": M1Pipeline,
    "m2": M2Regressor,
    "m3": M3Pipeline,
    "m4": M4Regressor,
    "appendix_a": AppendixAPipeline,
}


def make_pipeline(model: str, dt: float, **kw):
    try:
        cls = PIPELINES[model]
    except KeyError:
        raise ConfigError(f"unknown model {model!r}") from None
    return cls(dt, **kw)


def build_stream(pipeline, u: Trace, y: Trace, u_dot: Trace | None = None) -> RegressorStream:
    """Feed whole traces through ``pipeline`` and collect the stream."""
    if len(u) != len(y):
        raise ValueError("u and y differ in length")
    ud = u_dot.samples if u_dot is not None else None
    n = len(u)
    Y = np.empty(n)
    phi = np.empty((n, pipeline.p))
    us, ys = u.samples, y.samples
    for k in range(n):
        s = pipeline.step(us[k], ys[k], None if ud is None else ud[k])
        Y[k] = s.Y
        phi[k] = s.phi
    t = u.t0 + u.dt * np.arange(n)
    return RegressorStream(t, Y, phi)


def true_image(model: str, params, omega: float | None = None) -> np.ndarray:
    """Image of the generating parameters under each model's regression map."""
    if model == "m1":
        return maps.w_map(params.theta14)
    if model == "m2":
        return np.array([math.log(params.a), params.b])
    if model == "m3":
        return np.array([params.b])
    if model == "m4":
        return params.as_array()
    if model == "appendix_a":
        if omega is None:
            raise ConfigError("appendix_a image needs omega")
        return maps.appendix_a_map(params.theta14, params.theta3 * omega**2)
    raise ConfigError(f"unknown model {model!r}")
