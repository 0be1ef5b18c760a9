"""Online estimators (LSD and gradient), algebraic certainty-equivalent
estimates, and the batch least-squares oracle.

The least-squares half of the LSD estimator is propagated in information form,
``P = F^{-1} = f0 I + gamma0 int phi phi^T`` and ``P W = f0 W(0) + gamma0 int phi Y``,
which is the exact solution of the Riccati and ``W`` equations and stays well
posed for gains that make the Riccati ODE stiff.  The ``eta`` flow is advanced
with RK4 when ``dt`` lies inside its stability region and with a linearly
implicit Euler step otherwise (``method="auto"``).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError, DomainError, ExcitationError
from .maps import ParamMap
from .regressors import RegressorStream

DIVERGENCE_BOUND = 1e12
RK4_STABILITY = 2.0  # h * spectral radius allowed for explicit RK4


_MINOR_INDEX: dict = {}


def _minor_index(n):
    if n not in _MINOR_INDEX:
        idx = np.arange(n)
        keep = np.array([idx[idx != i] for i in range(n)])          # (n, n-1)
        rows = keep[:, None, :, None]
        cols = keep[None, :, None, :]
        sign = (-1.0) ** (idx[:, None] + idx[None, :])
        _MINOR_INDEX[n] = (rows, cols, sign)
    return _MINOR_INDEX[n]


def adjugate(A) -> np.ndarray:
    """Adjugate by cofactor expansion (intended for p <= 6); accepts stacks ``(..., n, n)``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if n == 1:
        return np.ones(A.shape)
    rows, cols, sign = _minor_index(n)
    C = np.linalg.det(A[..., rows, cols])
    return np.swapaxes(sign * C, -1, -2)


def _as_gain(Gamma, q):
    G = np.asarray(Gamma, dtype=float)
    if G.ndim == 0:
        G = G * np.eye(q)
    elif G.ndim == 1:
        G = np.diag(G)
    if G.shape != (q, q):
        raise ConfigError(f"Gamma must be {q}x{q}")
    if not np.allclose(G, G.T) or np.linalg.eigvalsh(G)[0] <= 0:
        raise ConfigError("Gamma must be symmetric positive definite")
    return G


@dataclass
class LsdState:
    t: float
    W_hat: np.ndarray
    F: np.ndarray
    eta_hat: np.ndarray
    Delta: float
    Ycal: np.ndarray


@dataclass
class Trajectory:
    t: np.ndarray
    eta: np.ndarray
    W: np.ndarray | None = None
    Delta: np.ndarray | None = None
    F_eigs: np.ndarray | None = None

    @property
    def final(self) -> np.ndarray:
        return self.eta[-1]


class LsdEstimator:
    """Least-squares + DREM estimator for ``Y = phi^T W(eta)``.

    ``Gamma`` may be a scalar, a diagonal (vector) or a full SPD matrix.
    """

    def __init__(self, pmap: ParamMap, gamma0, f0, Gamma, dt, W0=None, eta0=None, method="auto",
                 record=True):
        if not (gamma0 > 0 and f0 > 0 and dt > 0):
            raise ConfigError("gamma0, f0 and dt must be positive")
        if method not in ("auto", "rk4", "implicit"):
            raise ConfigError(f"unknown integration method {method!r}")
        self.map = pmap
        self.p, self.q = pmap.p, pmap.q
        self.gamma0, self.f0, self.dt = float(gamma0), float(f0), float(dt)
        self.Gamma = _as_gain(Gamma, self.q)
        self.T = np.asarray(pmap.T, dtype=float)
        self.W0 = np.zeros(self.p) if W0 is None else np.asarray(W0, dtype=float).copy()
        self.eta = np.zeros(self.q) if eta0 is None else np.asarray(eta0, dtype=float).copy()
        self.method = method
        # for a linear map the Jacobian is constant: precompute its spectral radius
        self._rho_lin = (float(np.max(np.abs(np.linalg.eigvals(self.Gamma @ self.T @ pmap.jacobian(self.eta))))))\
            if pmap.linear else None
        self.M = np.zeros((self.p, self.p))     # gamma0 * int phi phi^T
        self.r = np.zeros(self.p)               # gamma0 * int phi Y
        self.F = np.eye(self.p) / self.f0
        self.W = self.W0.copy()
        self.Delta = 0.0
        self.Ycal = np.zeros(self.p)
        self.t = None
        self._prev = None
        self._log = deque(maxlen=100)
        self.record = record
        self.hist_t, self.hist_eta, self.hist_W, self.hist_Delta, self.hist_Feig = [], [], [], [], []

    @property
    def state(self) -> LsdState:
        return LsdState(self.t, self.W.copy(), self.F.copy(), self.eta.copy(), self.Delta, self.Ycal.copy())

    def _flow(self, eta, Delta, Ycal):
        return self.Gamma @ (Delta * (self.T @ (Ycal - Delta * self.map(eta))))

    def _ls_update(self, phi, Y):
        if self._prev is not None:
            phi0, Y0 = self._prev
            w = 0.5 * self.gamma0 * self.dt
            self.M += w * (np.outer(phi0, phi0) + np.outer(phi, phi))
            self.r += w * (phi0 * Y0 + phi * Y)
        P = self.f0 * np.eye(self.p) + self.M
        F = np.linalg.inv(P)
        self.F = 0.5 * (F + F.T)
        self.W = np.linalg.solve(P, self.f0 * self.W0 + self.r)
        A = np.eye(self.p) - self.f0 * self.F
        self.Delta = float(np.linalg.det(A))
        self.Ycal = adjugate(A) @ (self.W - self.f0 * self.F @ self.W0)

    def step(self, sample) -> LsdState:
        phi = np.asarray(sample.phi, dtype=float).reshape(-1)
        if phi.size != self.p:
            raise ConfigError(f"sample has dimension {phi.size}, estimator expects {self.p}")
        Y = float(sample.Y)
        first = self._prev is None
        D0, Yc0 = self.Delta, self.Ycal
        self._ls_update(phi, Y)
        if not first:
            self._eta_step(D0, Yc0, self.Delta, self.Ycal)
        self._prev = (phi, Y)
        self.t = float(sample.t)
        self._guard()
        if self.record:
            self.hist_t.append(self.t)
            self.hist_eta.append(self.eta.copy())
            self.hist_W.append(self.W.copy())
            self.hist_Delta.append(self.Delta)
            self.hist_Feig.append(np.linalg.eigvalsh(self.F))
        return self.state

    def _eta_step(self, D0, Yc0, D1, Yc1):
        h = self.dt
        J = -(D1 * D1) * self.Gamma @ self.T @ self.map.jacobian(self.eta)
        if self._rho_lin is not None:
            rho = D1 * D1 * self._rho_lin
        else:
            rho = float(np.max(np.abs(np.linalg.eigvals(J))))
        stiff = h * rho > RK4_STABILITY
        if self.method == "implicit" or (self.method == "auto" and stiff):
            f = self._flow(self.eta, D1, Yc1)
            self.eta = self.eta + h * np.linalg.solve(np.eye(self.q) - h * J, f)
            return
        Dm, Ycm = 0.5 * (D0 + D1), 0.5 * (Yc0 + Yc1)
        e = self.eta
        k1 = self._flow(e, D0, Yc0)
        k2 = self._flow(e + 0.5 * h * k1, Dm, Ycm)
        k3 = self._flow(e + 0.5 * h * k2, Dm, Ycm)
        k4 = self._flow(e + h * k3, D1, Yc1)
        self.eta = e + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def run_stream(self, stream: RegressorStream, chunk=4096) -> "Trajectory":
        """Process a whole stream; same arithmetic as repeated :meth:`step`, with
        the least-squares part evaluated in vectorized form."""
        if self._prev is not None or len(stream) < 2:
            for smp in stream.samples():
                self.step(smp)
            return self.trajectory()
        if stream.p != self.p:
            raise ConfigError(f"stream has dimension {stream.p}, estimator expects {self.p}")
        phi, Y, t = stream.phi, stream.Y, stream.t
        n, p = phi.shape
        w = 0.5 * self.gamma0 * self.dt
        outer = phi[:, :, None] * phi[:, None, :]
        dM = w * (outer[:-1] + outer[1:])
        dr = w * (phi[:-1] * Y[:-1, None] + phi[1:] * Y[1:, None])
        M = np.concatenate([np.zeros((1, p, p)), np.cumsum(dM, axis=0)])
        r = np.concatenate([np.zeros((1, p)), np.cumsum(dr, axis=0)])
        eye = np.eye(p)
        Wh = np.empty((n, p))
        Delta = np.empty(n)
        Ycal = np.empty((n, p))
        Feig = np.empty((n, p))
        for a in range(0, n, chunk):
            b = min(n, a + chunk)
            P = self.f0 * eye + M[a:b]
            F = np.linalg.inv(P)
            F = 0.5 * (F + np.swapaxes(F, 1, 2))
            Wh[a:b] = np.linalg.solve(P, (self.f0 * self.W0 + r[a:b])[..., None])[..., 0]
            A = eye - self.f0 * F
            Delta[a:b] = np.linalg.det(A)
            Ycal[a:b] = (adjugate(A) @ (Wh[a:b] - self.f0 * (F @ self.W0))[..., None])[..., 0]
            Feig[a:b] = np.linalg.eigvalsh(F)
        etas = np.empty((n, self.q))
        etas[0] = self.eta
        self.t = float(t[0])
        self.W, self.Delta, self.Ycal = Wh[0], float(Delta[0]), Ycal[0]
        self._guard()
        for k in range(1, n):
            self._eta_step(Delta[k - 1], Ycal[k - 1], Delta[k], Ycal[k])
            self.t = float(t[k])
            self.W, self.Delta, self.Ycal = Wh[k], float(Delta[k]), Ycal[k]
            self._guard()
            etas[k] = self.eta
        self.M, self.r = M[-1].copy(), r[-1].copy()
        self.F = np.linalg.inv(self.f0 * eye + self.M)
        self.W, self.Ycal = Wh[-1].copy(), Ycal[-1].copy()
        self._prev = (phi[-1].copy(), float(Y[-1]))
        if self.record:
            self.hist_t, self.hist_eta = list(t), list(etas)
            self.hist_W, self.hist_Delta, self.hist_Feig = list(Wh), list(Delta), list(Feig)
        return Trajectory(t.copy(), etas, Wh, Delta, Feig)

    def _guard(self):
        snap = {"t": self.t, "eta": self.eta.copy(), "W": self.W.copy(), "Delta": self.Delta}
        self._log.append(snap)
        big = max(np.max(np.abs(self.eta)), np.max(np.abs(self.W)))
        if not (math.isfinite(big) and math.isfinite(self.Delta)) or big > DIVERGENCE_BOUND:
            raise DivergenceError(f"LSD state diverged at t={self.t}", self._log)

    def trajectory(self) -> Trajectory:
        return Trajectory(np.array(self.hist_t), np.array(self.hist_eta), np.array(self.hist_W),
                          np.array(self.hist_Delta), np.array(self.hist_Feig))


class GradientEstimator:
    """``eta' = -Gamma psi (psi^T eta - Y)`` for a linear regression."""

    def __init__(self, Gamma, dt, eta0=None, q=None, method="auto", record=True):
        if eta0 is None and q is None:
            raise ConfigError("give eta0 or q")
        self.eta = np.zeros(q) if eta0 is None else np.asarray(eta0, dtype=float).copy()
        self.q = self.eta.size
        self.Gamma = _as_gain(Gamma, self.q)
        if not dt > 0:
            raise ConfigError("dt must be positive")
        if method not in ("auto", "rk4", "implicit"):
            raise ConfigError(f"unknown integration method {method!r}")
        self.dt = float(dt)
        self.method = method
        self.t = None
        self._prev = None
        self._log = deque(maxlen=100)
        self.record = record
        self.hist_t, self.hist_eta = [], []

    def _flow(self, eta, psi, Y):
        return -self.Gamma @ psi * (psi @ eta - Y)

    def step(self, sample) -> np.ndarray:
        psi = np.asarray(sample.phi, dtype=float).reshape(-1)
        if psi.size != self.q:
            raise ConfigError(f"sample has dimension {psi.size}, estimator expects {self.q}")
        Y = float(sample.Y)
        if self._prev is not None:
            h = self.dt
            psi0, Y0 = self._prev
            stiff = h * float(psi @ self.Gamma @ psi) > RK4_STABILITY or \
                h * float(psi0 @ self.Gamma @ psi0) > RK4_STABILITY
            if self.method == "implicit" or (self.method == "auto" and stiff):
                A = np.eye(self.q) + h * self.Gamma @ np.outer(psi, psi)
                self.eta = np.linalg.solve(A, self.eta + h * self.Gamma @ psi * Y)
            else:
                pm, Ym = 0.5 * (psi0 + psi), 0.5 * (Y0 + Y)
                e = self.eta
                k1 = self._flow(e, psi0, Y0)
                k2 = self._flow(e + 0.5 * h * k1, pm, Ym)
                k3 = self._flow(e + 0.5 * h * k2, pm, Ym)
                k4 = self._flow(e + h * k3, psi, Y)
                self.eta = e + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        self._prev = (psi, Y)
        self.t = float(sample.t)
        self._log.append({"t": self.t, "eta": self.eta.copy()})
        big = float(np.max(np.abs(self.eta)))
        if not math.isfinite(big) or big > DIVERGENCE_BOUND:
            raise DivergenceError(f"gradient state diverged at t={self.t}", self._log)
        if self.record:
            self.hist_t.append(self.t)
            self.hist_eta.append(self.eta.copy())
        return self.eta.copy()

    def trajectory(self) -> Trajectory:
        return Trajectory(np.array(self.hist_t), np.array(self.hist_eta))


def run(estimator, stream: RegressorStream) -> Trajectory:
    if hasattr(estimator, "run_stream"):
        return estimator.run_stream(stream)
    for s in stream.samples():
        estimator.step(s)
    return estimator.trajectory()


def whitening_gain(stream: RegressorStream, gamma: float, t_window=None) -> np.ndarray:
    """``gamma * (mean psi psi^T)^{-1}`` over the first ``t_window`` seconds.

    A full SPD gradient gain that equalizes the convergence rate across
    parameter directions for a known, periodic excitation.
    """
    s = stream.window(stream.t[0], stream.t[0] + t_window) if t_window else stream
    R = s.phi.T @ s.phi / len(s)
    ev = np.linalg.eigvalsh(R)
    if ev[0] <= 1e-14 * ev[-1]:
        raise ExcitationError("regressor not PE over the whitening window")
    G = gamma * np.linalg.inv(R)
    return 0.5 * (G + G.T)


# --------------------------------------------------------------------------- #
# algebraic estimates
# --------------------------------------------------------------------------- #


def estimate_theta5(theta_hat14, u, y):
    """``exp(-th3 u) (y - th4 - th1 ln u - th2 u)``."""
    t1, t2, t3, t4 = np.asarray(theta_hat14, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise DomainError("logarithm domain: current must be > 0")
    return np.exp(-t3 * u) * (np.asarray(y, dtype=float) - t4 - t1 * np.log(u) - t2 * u)


def estimate_a_m3(E_oc, u, y, b_hat):
    """Certainty-equivalent ``a = (E_oc - y) u^{-b}``."""
    u = np.asarray(u, dtype=float)
    gap = E_oc - np.asarray(y, dtype=float)
    if np.any(~(u > 0)):
        raise DomainError("power domain: current must be > 0")
    if np.any(~(gap > 0)):
        raise DomainError("E_oc dominance violated")
    return gap * u ** (-b_hat)


# --------------------------------------------------------------------------- #
# batch oracle
# --------------------------------------------------------------------------- #


@dataclass
class BatchLSResult:
    w: np.ndarray
    gram: np.ndarray
    min_eigenvalue: float
    max_eigenvalue: float
    residual_rms: float

    @property
    def ratio(self) -> float:
        return self.min_eigenvalue / self.max_eigenvalue


def batch_ls(samples, rel_tol=1e-8) -> BatchLSResult:
    """Minimize ``sum (Y - phi^T w)^2``; refuses numerically singular Gram matrices."""
    s = samples if isinstance(samples, RegressorStream) else RegressorStream.from_samples(samples)
    G = s.phi.T @ s.phi
    ev = np.linalg.eigvalsh(G)
    if ev[-1] <= 0 or ev[0] < rel_tol * ev[-1]:
        raise ExcitationError(
            f"regressor not IE: Gram eigenvalue ratio {ev[0] / ev[-1] if ev[-1] > 0 else 0:.3e} < {rel_tol:g}")
    w, *_ = np.linalg.lstsq(s.phi, s.Y, rcond=None)
    res = s.Y - s.phi @ w
    return BatchLSResult(w, G, float(ev[0]), float(ev[-1]), float(np.sqrt(np.mean(res**2))))
