"""Sampled traces, excitation signals and the first-order LTI filters used by the regressors.

Every filter is a scalar state-space block ``x' = -pole*x + b*v``, ``z = c*x + d*v``
advanced with classical RK4 on a fixed grid.  The input between two samples is
reconstructed by Lagrange interpolation over the last four samples (cubic), so a
smooth input keeps the scheme fourth-order; the first two steps fall back to
linear and quadratic interpolation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DomainError

# midpoint weights for v(t_{n-1/2}) from samples ending at t_n
_MID_WEIGHTS = {
    1: (0.5, 0.5),
    2: (-0.125, 0.75, 0.375),
    3: (0.0625, -0.3125, 0.9375, 0.3125),
}


@dataclass
class Trace:
    """Uniformly sampled scalar channel."""

    dt: float
    samples: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("non-finite sample")

    def __len__(self):
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    def to_csv(self, path) -> None:
        write_columns(path, ["t", "value"], [self.times, self.samples])

    @classmethod
    def from_csv(cls, path) -> "Trace":
        cols = read_columns(path, ["t", "value"])
        t, v = cols["t"], cols["value"]
        if t.size < 2:
            raise ConfigError("trace needs at least two samples")
        dt = float(np.mean(np.diff(t)))
        if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
            raise ConfigError("trace is not uniformly sampled")
        return cls(dt=dt, samples=v, t0=float(t[0]))


def write_columns(path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    """Write equal-length columns as CSV, full double precision, LF line endings."""
    cols = [np.asarray(c, dtype=float).reshape(-1) for c in columns]
    n = cols[0].size
    if any(c.size != n for c in cols):
        raise ValueError("columns differ in length")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(format(float(x), ".17g") for x in row) + "\n")


def read_columns(path, required: Iterable[str] = ()) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        missing = [k for k in required if k not in header]
        if missing:
            raise ConfigError(f"{path}: missing columns {missing}, have {header}")
        rows = [r for r in reader if r]
    try:
        data = np.array([[float(x) for x in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data.size == 0:
        data = data.reshape(0, len(header))
    if data.shape[1] != len(header):
        raise ConfigError(f"{path}: ragged rows")
    return {h: data[:, k] for k, h in enumerate(header)}


# --------------------------------------------------------------------------- #
# filters
# --------------------------------------------------------------------------- #


class FirstOrderFilter:
    """Scalar LTI block ``x' = -pole*x + b*v``, ``z = c*x + d*v``.

    ``init`` fixes the state at the first sample: ``"zero"``, ``"rest"`` (the
    equilibrium for a constant input equal to the first sample) or a number.
    """

    kind = "FirstOrder"

    def __init__(self, pole, dt, b, c, d, init="zero"):
        if not pole > 0:
            raise ConfigError(f"filter pole must be positive, got {pole}")
        if not dt > 0:
            raise ConfigError(f"dt must be positive, got {dt}")
        self.pole = float(pole)
        self.dt = float(dt)
        self.b, self.c, self.d = float(b), float(c), float(d)
        self.init = init
        self.reset()

    def reset(self):
        self.x = None
        self._hist: list[float] = []

    @property
    def started(self) -> bool:
        return self.x is not None

    def _initial_state(self, v0):
        if self.init == "zero":
            return 0.0
        if self.init == "rest":
            return self.b * v0 / self.pole
        return float(self.init)

    def step(self, v: float) -> float:
        v = float(v)
        if not math.isfinite(v):
            raise DomainError("non-finite sample")
        if self.x is None:
            self.x = self._initial_state(v)
            self._hist = [v]
            return self.c * self.x + self.d * v
        hist = self._hist
        w = _MID_WEIGHTS[len(hist)]
        vm = w[-1] * v
        for wk, vk in zip(w, hist):
            vm += wk * vk
        v0 = hist[-1]
        a, b, h, x = self.pole, self.b, self.dt, self.x
        k1 = -a * x + b * v0
        k2 = -a * (x + 0.5 * h * k1) + b * vm
        k3 = -a * (x + 0.5 * h * k2) + b * vm
        k4 = -a * (x + h * k3) + b * v
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not math.isfinite(x):
            raise DomainError("non-finite sample")
        self.x = x
        hist.append(v)
        if len(hist) > 3:
            del hist[0]
        return self.c * x + self.d * v

    def apply(self, samples) -> np.ndarray:
        """Run the filter over a whole array from its current state."""
        return np.array([self.step(v) for v in np.asarray(samples, dtype=float)])


class LowPass(FirstOrderFilter):
    """``lam/(p+lam)``: unit DC gain."""

    kind = "LowPass"

    def __init__(self, lam, dt, init="zero"):
        super().__init__(lam, dt, b=lam, c=1.0, d=0.0, init=init)
        self.lam = float(lam)


class HighPassGain(FirstOrderFilter):
    """``lam*p/(p+lam)`` realized without differentiation:
    ``x' = -lam*(x + lam*v)``, ``z = x + lam*v``."""

    kind = "HighPassGain"

    def __init__(self, lam, dt, init="zero"):
        super().__init__(lam, dt, b=-lam * lam, c=1.0, d=lam, init=init)
        self.lam = float(lam)


class Leaky(FirstOrderFilter):
    """``1/(p+lam)``: integrator with leak, DC gain ``1/lam``."""

    kind = "Integrator"

    def __init__(self, lam, dt, init="zero"):
        super().__init__(lam, dt, b=1.0, c=1.0, d=0.0, init=init)
        self.lam = float(lam)


class DirtyDerivative(HighPassGain):
    """``p/(tau*p+1)``, identical to ``HighPassGain`` with ``lam = 1/tau``."""

    kind = "DirtyDerivative"

    def __init__(self, tau, dt, init="zero"):
        if not tau > 0:
            raise ConfigError(f"tau must be positive, got {tau}")
        super().__init__(1.0 / tau, dt, init=init)
        self.tau = float(tau)


class Cascade:
    """Series connection; the output of each block feeds the next."""

    kind = "Cascade"

    def __init__(self, *filters):
        if not filters:
            raise ConfigError("empty cascade")
        self.filters = list(filters)

    def reset(self):
        for f in self.filters:
            f.reset()

    def step(self, v: float) -> float:
        for f in self.filters:
            v = f.step(v)
        return v

    def apply(self, samples) -> np.ndarray:
        return np.array([self.step(v) for v in np.asarray(samples, dtype=float)])


def step_highpass_gain(state: HighPassGain, v: float) -> float:
    return state.step(v)


def step_lowpass(state: LowPass, v: float) -> float:
    return state.step(v)


def step_dirty_derivative(state: DirtyDerivative, v: float) -> float:
    return state.step(v)


# --------------------------------------------------------------------------- #
# excitation signals
# --------------------------------------------------------------------------- #


def _check_duration(duration):
    if not (duration > 0 and math.isfinite(duration)):
        raise ConfigError(f"duration must be positive, got {duration}")


@dataclass(frozen=True)
class Constant:
    value: float
    duration: float

    def __post_init__(self):
        _check_duration(self.duration)

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.value)

    def derivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def max_frequency(self) -> float:
        return 0.0


@dataclass(frozen=True)
class PulseTrain:
    """Square wave between ``low`` and ``high``, 50% duty.

    Starts at ``high`` unless ``start_high`` is false.  ``rise_time`` > 0 replaces
    every edge after t=0 with a linear ramp of that length (a finite load slew).
    """

    low: float
    high: float
    frequency: float
    duration: float
    rise_time: float = 0.0
    start_high: bool = True

    def __post_init__(self):
        _check_duration(self.duration)
        if not self.frequency > 0:
            raise ConfigError(f"pulse frequency must be positive, got {self.frequency}")
        if not 0 <= self.rise_time < 0.5 / self.frequency:
            raise ConfigError("rise_time must lie in [0, half period)")

    def _segments(self, t):
        t = np.asarray(t, dtype=float)
        half = 0.5 / self.frequency
        k = np.floor(t / half + 1e-9)
        tau = t - k * half
        first, second = (self.high, self.low) if self.start_high else (self.low, self.high)
        level = np.where(k % 2 == 0, first, second)
        prev = np.where(k % 2 == 0, second, first)
        ramping = (k >= 1) & (tau < self.rise_time) if self.rise_time > 0 else np.zeros(t.shape, bool)
        return level, prev, tau, ramping

    def __call__(self, t):
        level, prev, tau, ramping = self._segments(t)
        if self.rise_time > 0:
            ramp = prev + (level - prev) * tau / self.rise_time
            return np.where(ramping, ramp, level)
        return level

    def derivative(self, t):
        level, prev, _, ramping = self._segments(t)
        if self.rise_time > 0:
            return np.where(ramping, (level - prev) / self.rise_time, 0.0)
        return np.zeros_like(level)

    def max_frequency(self) -> float:
        return self.frequency


@dataclass(frozen=True)
class Sine:
    """``offset + amplitude*sin(2*pi*frequency*t + phase)``."""

    offset: float
    amplitude: float
    frequency: float
    duration: float
    phase: float = 0.0

    def __post_init__(self):
        _check_duration(self.duration)
        if self.frequency < 0:
            raise ConfigError("frequency must be non-negative")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    def __call__(self, t):
        return self.offset + self.amplitude * np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)

    def derivative(self, t):
        return self.amplitude * self.omega * np.cos(self.omega * np.asarray(t, dtype=float) + self.phase)

    def max_frequency(self) -> float:
        return self.frequency


@dataclass(frozen=True)
class FourierSum:
    """``offset + sum(A_k * sin(omega_k * t))`` with ``terms = [(A_k, omega_k), ...]``."""

    offset: float
    terms: tuple = field(default_factory=tuple)
    duration: float = 1.0

    def __post_init__(self):
        _check_duration(self.duration)
        object.__setattr__(self, "terms", tuple((float(a), float(w)) for a, w in self.terms))
        if any(w < 0 for _, w in self.terms):
            raise ConfigError("angular frequencies must be non-negative")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.offset)
        for a, w in self.terms:
            out = out + a * np.sin(w * t)
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a, w in self.terms:
            out = out + a * w * np.cos(w * t)
        return out

    def max_frequency(self) -> float:
        return max((w for _, w in self.terms), default=0.0) / (2.0 * math.pi)


SignalSpec = Constant | PulseTrain | Sine | FourierSum


def _grid(spec, dt):
    if not (dt > 0 and math.isfinite(dt)):
        raise ConfigError(f"dt must be positive, got {dt}")
    if spec.duration < dt:
        raise ConfigError("duration shorter than one step")
    n = int(round(spec.duration / dt))
    return dt * np.arange(n)


def generate_signal(spec: SignalSpec, dt: float) -> Trace:
    """Evaluate ``spec`` on the grid ``k*dt``, ``k = 0 .. round(duration/dt)-1``."""
    t = _grid(spec, dt)
    return Trace(dt=dt, samples=spec(t))


def generate_derivative(spec: SignalSpec, dt: float) -> Trace:
    """Analytic time derivative on the same grid (zero across ideal pulse edges)."""
    t = _grid(spec, dt)
    return Trace(dt=dt, samples=spec.derivative(t))


def current_test1(duration: float = 60.0) -> Sine:
    """``25 + 5*cos(0.2*pi*t)`` A."""
    return Sine(offset=25.0, amplitude=5.0, frequency=0.1, duration=duration, phase=math.pi / 2)


def current_test2(duration: float = 60.0) -> FourierSum:
    """``25 + (20/pi)*[sin(0.2 pi t) + sin(0.6 pi t)/3 + sin(pi t)/5]`` A."""
    k = 20.0 / math.pi
    return FourierSum(
        offset=25.0,
        terms=((k, 0.2 * math.pi), (k / 3.0, 0.6 * math.pi), (k / 5.0, math.pi)),
        duration=duration,
    )


def paper_pulse(duration: float = 60.0, rise_time: float = 0.0) -> PulseTrain:
    """10 A <-> 20 A at 2 Hz."""
    return PulseTrain(low=10.0, high=20.0, frequency=2.0, duration=duration, rise_time=rise_time)
