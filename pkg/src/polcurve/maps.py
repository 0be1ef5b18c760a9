"""Parameter maps of the nonlinear regressions, their Jacobians, and the
sample-based check of the monotonizability LMI ``T J + J^T T^T >= rho I``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class ParamMap:
    """``eta (q,) -> W(eta) (p,)`` with Jacobian ``(p, q)`` and mixing matrix ``T (q, p)``."""

    name: str
    q: int
    p: int
    fn: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    T: np.ndarray
    rho: float = 1.0
    linear: bool = False

    def __call__(self, eta):
        return self.fn(np.asarray(eta, dtype=float))

    def jacobian(self, eta):
        return self.jac(np.asarray(eta, dtype=float))


# --------------------------------------------------------------------------- #
# full-model maps
# --------------------------------------------------------------------------- #


def w_map(theta14) -> np.ndarray:
    t1, t2, t3, t4 = np.asarray(theta14, dtype=float)
    return np.array([t1, t3, t1 * t3, t2 * t3, t2 - t3 * t4])


def w_jacobian(theta14) -> np.ndarray:
    t1, t2, t3, t4 = np.asarray(theta14, dtype=float)
    return np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [t3, 0.0, t1, 0.0],
        [0.0, t3, t2, 0.0],
        [0.0, 1.0, -t4, -t3],
    ])


def d_map(eta) -> np.ndarray:
    """``eta -> theta_{1..4}``; needs ``eta_2 != 0``."""
    e1, e2, e3, e4 = np.asarray(eta, dtype=float)
    if e2 == 0:
        raise DomainError("singular reparameterization: eta_2 = 0")
    return np.array([e1, e3 / e2, e2, (e3 / e2 - e4) / e2])


def d_inverse(theta14) -> np.ndarray:
    """``theta_{1..4} -> eta``; the pair is one-to-one only for ``theta_3 != 0``."""
    t1, t2, t3, t4 = np.asarray(theta14, dtype=float)
    if t3 == 0:
        raise DomainError("singular reparameterization: theta_3 = 0")
    return np.array([t1, t3, t2 * t3, t2 - t3 * t4])


def g_map(eta) -> np.ndarray:
    e1, e2, e3, e4 = np.asarray(eta, dtype=float)
    return np.array([e1, e2, e1 * e2, e3, e4])


def g_jacobian(eta) -> np.ndarray:
    e1, e2, _, _ = np.asarray(eta, dtype=float)
    return np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [e2, e1, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])


T_G = np.array([
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0],
])

G_MAP = ParamMap("G", q=4, p=5, fn=g_map, jac=g_jacobian, T=T_G)


# --------------------------------------------------------------------------- #
# sinusoidal-current (derivative-free) map
# --------------------------------------------------------------------------- #


def appendix_a_map(theta14, theta6) -> np.ndarray:
    """``(th1, th2, th3 th4, th1 th3, th2 th3, th6)``."""
    t1, t2, t3, t4 = np.asarray(theta14, dtype=float)
    return np.array([t1, t2, t3 * t4, t1 * t3, t2 * t3, float(theta6)])


def appendix_a_d_inverse(theta14, theta6) -> np.ndarray:
    """Coordinates ``eta = (th1, th2, th3 th4, th2 th3, th6)``; needs ``th2, th3 != 0``."""
    t1, t2, t3, t4 = np.asarray(theta14, dtype=float)
    if t2 == 0 or t3 == 0:
        raise DomainError("singular reparameterization: theta_2 * theta_3 = 0")
    return np.array([t1, t2, t3 * t4, t2 * t3, float(theta6)])


def appendix_a_d_map(eta) -> tuple[np.ndarray, float]:
    """Inverse of :func:`appendix_a_d_inverse`: ``eta -> (theta_{1..4}, theta6)``."""
    e1, e2, e3, e4, e5 = np.asarray(eta, dtype=float)
    if e2 == 0 or e4 == 0:
        raise DomainError("singular reparameterization: eta_2 * eta_4 = 0")
    t3 = e4 / e2
    return np.array([e1, e2, t3, e3 / t3]), e5


def ga_map(eta) -> np.ndarray:
    e1, e2, e3, e4, e5 = np.asarray(eta, dtype=float)
    if e2 == 0:
        raise DomainError("singular reparameterization: eta_2 = 0")
    return np.array([e1, e2, e3, e1 * e4 / e2, e4, e5])


def ga_jacobian(eta) -> np.ndarray:
    e1, e2, _, e4, _ = np.asarray(eta, dtype=float)
    if e2 == 0:
        raise DomainError("singular reparameterization: eta_2 = 0")
    J = np.zeros((6, 5))
    J[0, 0] = J[1, 1] = J[2, 2] = J[4, 3] = J[5, 4] = 1.0
    J[3] = [e4 / e2, -e1 * e4 / e2**2, 0.0, e1 / e2, 0.0]
    return J


T_GA = np.zeros((5, 6))
for _r, _c in enumerate((0, 1, 2, 4, 5)):
    T_GA[_r, _c] = 1.0

GA_MAP = ParamMap("G_appendix_a", q=5, p=6, fn=ga_map, jac=ga_jacobian, T=T_GA)


def identity_map(n: int) -> ParamMap:
    """Linear regressions: ``W(eta) = eta``, ``T = I``."""
    eye = np.eye(n)
    return ParamMap(f"identity{n}", q=n, p=n, fn=lambda e: np.array(e, dtype=float),
                    jac=lambda e: eye, T=eye, linear=True)


# --------------------------------------------------------------------------- #
# LMI check
# --------------------------------------------------------------------------- #


@dataclass
class MonotonizabilityReport:
    map_name: str
    min_eigenvalue: float
    rho_required: float
    passed: bool
    sample_count: int
    domain: list = field(default_factory=list)

    @property
    def rho_estimate(self) -> float:
        return self.min_eigenvalue

    def to_json(self) -> str:
        d = asdict(self)
        d["rho_estimate"] = self.rho_estimate
        return json.dumps(d, indent=2)

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{self.map_name}: min eig of T J + J^T T^T = {self.min_eigenvalue:.12g} "
                f"over {self.sample_count} samples (required >= {self.rho_required:g}) {verdict}")


def symmetrized(T, J) -> np.ndarray:
    M = T @ J
    return M + M.T


def check_monotonizability(pmap: ParamMap, domain_samples, rho: float | None = None,
                           domain=None) -> MonotonizabilityReport:
    """Smallest eigenvalue of ``T J(eta) + J(eta)^T T^T`` over the samples."""
    T = np.asarray(pmap.T, dtype=float)
    if T.shape != (pmap.q, pmap.p):
        raise ConfigError(f"T has shape {T.shape}, expected {(pmap.q, pmap.p)}")
    rho = pmap.rho if rho is None else float(rho)
    samples = np.atleast_2d(np.asarray(domain_samples, dtype=float))
    if samples.shape[1] != pmap.q:
        raise ConfigError(f"samples have dimension {samples.shape[1]}, map expects {pmap.q}")
    lo = np.inf
    for eta in samples:
        J = pmap.jacobian(eta)
        if J.shape != (pmap.p, pmap.q):
            raise ConfigError(f"Jacobian has shape {J.shape}, expected {(pmap.p, pmap.q)}")
        lo = min(lo, float(np.linalg.eigvalsh(symmetrized(T, J))[0]))
    return MonotonizabilityReport(pmap.name, lo, rho, bool(lo >= rho), len(samples),
                                  list(domain) if domain is not None else [])


def sample_box(q: int, lo: float, hi: float, n: int, rng=None, nonzero=(), min_abs=1e-3):
    """Uniform samples in ``[lo, hi]^q``; coordinates in ``nonzero`` are kept away from 0."""
    rng = rng if rng is not None else np.random.default_rng(0)
    x = rng.uniform(lo, hi, size=(n, q))
    for k in nonzero:
        small = np.abs(x[:, k]) < min_abs
        x[small, k] = np.where(x[small, k] < 0, -min_abs, min_abs)
    return x


def numerical_jacobian(fn, x, rel_step=1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``fn`` at ``x``."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fn(x))
    J = np.empty((f0.size, x.size))
    for k in range(x.size):
        h = rel_step * max(1.0, abs(x[k]))
        e = np.zeros_like(x)
        e[k] = h
        J[:, k] = (np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h)
    return J
