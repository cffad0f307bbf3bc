"""Homogeneous potentials, mass bookkeeping and pair-cabling parameter laws.

Everything here is a pure function or an immutable value object.  The
conventions: the two cabled bodies carry the physical masses ``m0, m1``
(normalised so that ``m0 + m1 = 1``), the remaining bodies are ``m2..mn``.
The "fictional" masses are ``M0 = m0*m1``, ``M1 = 1`` and ``Ml = ml`` for
``l >= 2``; the pair offsets are ``mu0 = m1`` and ``mu1 = -m0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "CollisionError",
    "ParameterError",
    "ConfigurationError",
    "ConvergenceError",
    "MassSystem",
    "CablingSetup",
    "phi",
    "dphi",
    "d2phi",
    "jacobi_forward",
    "jacobi_inverse",
    "coupling_integrand",
    "frequencies_from_epsilon",
    "epsilon_from_pq",
    "symplectic_J",
    "rotation",
]


class CollisionError(ValueError):
    """Two bodies coincide: the potential is undefined."""


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class ConfigurationError(ValueError):
    """A structural/case-compatibility requirement is violated."""


class ConvergenceError(RuntimeError):
    """An iterative solve failed to reach its tolerance."""


# ---------------------------------------------------------------------------
# homogeneous potentials


def phi(r, alpha: float):
    """Potential kernel with phi'(r) = -r**(-alpha).

    alpha = 2 is the Newtonian kernel 1/r, alpha = 1 the logarithmic
    (vortex filament) kernel -log r; for general alpha > 1 the antiderivative
    r**(1-alpha)/(alpha-1) is used (integration constant zero).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise CollisionError("phi requires strictly positive separation")
    if alpha < 1.0:
        raise ParameterError(f"alpha must be >= 1, got {alpha}")
    if alpha == 1.0:
        out = -np.log(r)
    else:
        out = r ** (1.0 - alpha) / (alpha - 1.0)
    return out if out.ndim else float(out)


def dphi(r, alpha: float):
    """First derivative of :func:`phi`: -r**(-alpha)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise CollisionError("dphi requires strictly positive separation")
    out = -(r ** (-alpha))
    return out if out.ndim else float(out)


def d2phi(r, alpha: float):
    """Second derivative of :func:`phi`: alpha * r**(-alpha-1)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise CollisionError("d2phi requires strictly positive separation")
    out = alpha * r ** (-alpha - 1.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# rotations


def symplectic_J(d: int) -> np.ndarray:
    """Block diagonal rotation generator J + ... + J on R^(2d)."""
    J2 = np.array([[0.0, -1.0], [1.0, 0.0]])
    out = np.zeros((2 * d, 2 * d))
    for i in range(d):
        out[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = J2
    return out


def rotation(t, d: int) -> np.ndarray:
    """exp(t*J) acting on R^(2d); for array t, shape (len(t), 2d, 2d)."""
    t = np.asarray(t, dtype=float)
    c, s = np.cos(t), np.sin(t)
    blk = np.zeros(t.shape + (2 * d, 2 * d))
    for i in range(d):
        blk[..., 2 * i, 2 * i] = c
        blk[..., 2 * i, 2 * i + 1] = -s
        blk[..., 2 * i + 1, 2 * i] = s
        blk[..., 2 * i + 1, 2 * i + 1] = c
    return blk


# ---------------------------------------------------------------------------
# masses


@dataclass(frozen=True)
class MassSystem:
    """Masses of the N = n+1 body problem with the pair normalisation.

    ``m`` are the physical masses (m0..mn); the constructor rescales all of
    them so that m0 + m1 = 1.  ``M`` are the fictional masses of the
    Jacobi-like coordinates and ``mu = (m1, -m0)`` the pair offsets.
    """

    alpha: float
    m: Tuple[float, ...]
    M: Tuple[float, ...] = field(init=False)
    mu: Tuple[float, float] = field(init=False)

    def __post_init__(self):
        if self.alpha < 1.0:
            raise ParameterError(f"alpha must be >= 1, got {self.alpha}")
        m = np.asarray(self.m, dtype=float)
        if m.size < 2:
            raise ParameterError("need at least the two pair masses")
        if np.any(m <= 0.0):
            raise ParameterError("all masses must be strictly positive")
        total01 = m[0] + m[1]
        m = m / total01
        object.__setattr__(self, "m", tuple(float(v) for v in m))
        M = [m[0] * m[1], 1.0] + [float(v) for v in m[2:]]
        object.__setattr__(self, "M", tuple(M))
        object.__setattr__(self, "mu", (float(m[1]), float(-m[0])))

    @property
    def n(self) -> int:
        """Number of bodies after cabling the pair (configuration size)."""
        return len(self.m) - 1

    @property
    def N(self) -> int:
        return len(self.m)


# ---------------------------------------------------------------------------
# Jacobi-like coordinates


def jacobi_forward(q: np.ndarray, ms: MassSystem):
    """(q0..qn) -> (Q0, Q) with Q0 = q1 - q0, Q1 = m0 q0 + m1 q1, Ql = ql."""
    q = np.asarray(q, dtype=float)
    if q.shape[0] != ms.N:
        raise ParameterError(f"expected {ms.N} bodies, got {q.shape[0]}")
    m0, m1 = ms.m[0], ms.m[1]
    Q0 = q[1] - q[0]
    Q = q[1:].copy()
    Q[0] = m0 * q[0] + m1 * q[1]
    return Q0, Q


def jacobi_inverse(Q0: np.ndarray, Q: np.ndarray, ms: MassSystem) -> np.ndarray:
    """Inverse of :func:`jacobi_forward`: q_j = Q1 - mu_j Q0 for j = 0, 1."""
    Q0 = np.asarray(Q0, dtype=float)
    Q = np.asarray(Q, dtype=float)
    q = np.empty((Q.shape[0] + 1,) + Q0.shape)
    q[0] = Q[0] - ms.mu[0] * Q0
    q[1] = Q[0] - ms.mu[1] * Q0
    q[2:] = Q[1:]
    return q


# ---------------------------------------------------------------------------
# parameter laws (conditions (A)-(B))


def frequencies_from_epsilon(epsilon: float, alpha: float, sign: int = +1):
    """Pair and loop frequencies: omega = sign * eps^(-(alpha+1)/2), nu = omega - 1."""
    if not 0.0 < epsilon < 1.0:
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    if sign not in (+1, -1):
        raise ParameterError("sign must be +1 (prograde) or -1 (retrograde)")
    omega = sign * epsilon ** (-(alpha + 1.0) / 2.0)
    return omega, omega - 1.0


def epsilon_from_pq(p: int, q: int, alpha: float) -> float:
    """Pair radius for an exactly rational |omega| = p/|q|, p coprime to q."""
    if q == 0:
        raise ParameterError("q must be nonzero")
    if p <= 0:
        raise ParameterError("p must be a positive integer")
    if math.gcd(p, abs(q)) != 1:
        raise ParameterError(f"p={p} and q={q} must be coprime")
    ratio = Fraction(p, abs(q))
    if ratio <= 1:
        raise ParameterError("p/|q| must exceed 1 so that epsilon < 1")
    return float(ratio) ** (-2.0 / (alpha + 1.0))


# ---------------------------------------------------------------------------
# symmetry case tags and the cabling setup


@dataclass(frozen=True)
class CaseC1:
    tag: str = "C1"


@dataclass(frozen=True)
class CaseC2:
    m: int
    sigma: Tuple[int, ...]  # 0-indexed permutation of the n configuration slots
    tag: str = "C2"

    def __post_init__(self):
        n = len(self.sigma)
        if sorted(self.sigma) != list(range(n)):
            raise ConfigurationError("sigma must be a permutation of 0..n-1")
        if self.sigma[0] != 0:
            raise ConfigurationError("sigma must fix the cabled slot (sigma(1)=1)")
        # sigma^m must be the identity
        perm = list(range(n))
        for _ in range(self.m):
            perm = [self.sigma[i] for i in perm]
        if perm != list(range(n)):
            raise ConfigurationError("sigma^m must be the identity permutation")


@dataclass(frozen=True)
class CaseC3:
    d: int
    tag: str = "C3"

    def __post_init__(self):
        if self.d < 2:
            raise ConfigurationError("case C3 requires d >= 2")


@dataclass(frozen=True)
class CablingSetup:
    """Pair radius, rotation sense, frequencies and the symmetry case."""

    epsilon: float
    sign: int
    omega: float
    nu: float
    case: object
    d: int
    pq: Optional[Tuple[int, int]] = None  # set when built from a rational omega

    def __post_init__(self):
        if self.case.tag in ("C1", "C2") and self.d != 1:
            raise ConfigurationError(f"case {self.case.tag} requires d = 1")
        if self.case.tag == "C3" and self.d < 2:
            raise ConfigurationError("case C3 requires d >= 2")

    @classmethod
    def from_epsilon(cls, epsilon, alpha, sign=+1, case=CaseC1(), d=1):
        omega, nu = frequencies_from_epsilon(epsilon, alpha, sign)
        return cls(epsilon=float(epsilon), sign=sign, omega=omega, nu=nu,
                   case=case, d=d)

    @classmethod
    def from_pq(cls, p, q, alpha, sign=+1, case=CaseC1(), d=1):
        eps = epsilon_from_pq(p, q, alpha)
        omega, nu = frequencies_from_epsilon(eps, alpha, sign)
        return cls(epsilon=eps, sign=sign, omega=omega, nu=nu, case=case, d=d,
                   pq=(p, abs(q)))

    @property
    def prograde(self) -> bool:
        return self.sign > 0

    @property
    def period(self) -> Optional[float]:
        """Full period 2*pi*q of the reconstructed orbit (rational omega only)."""
        if self.pq is None:
            return None
        return 2.0 * math.pi * self.pq[1]


# ---------------------------------------------------------------------------
# coupling term


def coupling_integrand(u0, u, s, setup: CablingSetup, ms: MassSystem) -> float:
    """Pointwise coupling h between the tight pair and the far bodies.

    h = sum_{k=2..n} sum_{j=0,1} M_k m_j [ phi(|u1 - mu_j eps R(s) u0 - uk|)
                                           - phi(|u1 - uk|) ],
    with R(s) = exp(s*J).  Vanishes identically for eps = 0 and for n = 1.
    """
    u0 = np.asarray(u0, dtype=float)
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    if n < 2:
        return 0.0
    eps = setup.epsilon
    rot = rotation(s, setup.d)
    ru0 = rot @ u0
    total = 0.0
    for k in range(1, n):
        base = u[0] - u[k]
        rbase = float(np.linalg.norm(base))
        if rbase <= 0.0:
            raise CollisionError(f"bodies 1 and {k + 1} coincide")
        for j, mu_j in enumerate(ms.mu):
            w = base - mu_j * eps * ru0
            rw = float(np.linalg.norm(w))
            if rw <= 0.0:
                raise CollisionError(f"pair body {j} collides with body {k + 1}")
            total += ms.M[k + 1] * ms.m[j] * (phi(rw, ms.alpha) - phi(rbase, ms.alpha))
    return total
