"""Truncated Fourier loops in E^N, Sobolev norms, the mode-diagonal operator
calculus and the discrete symmetry actions/projectors.

A loop x(s) = sum_{|l| <= L} c_l e^{i l s} is stored as a complex coefficient
array of shape (2L+1, 2dN) with the reality constraint c_{-l} = conj(c_l)
enforced at construction.  The first 2d columns are the pair component u0,
the remaining columns the configuration bodies u1..un.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

import numpy as np

from .model import CablingSetup, ConfigurationError, ParameterError, symplectic_J

__all__ = [
    "LoopState",
    "SymmetryAction",
    "sample",
    "from_samples",
    "sobolev_norm",
    "h1_inner",
    "apply_rotating_derivative_sq",
    "riesz_apply",
    "mean_projection",
    "gamma_act",
    "gamma_project",
]


@dataclass(frozen=True)
class LoopState:
    """Immutable band-limited 2*pi-periodic path in E^N, E = R^(2d)."""

    L: int
    d: int
    N: int
    coeffs: np.ndarray  # (2L+1, 2dN) complex, row index l+L

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (2 * self.L + 1, 2 * self.d * self.N):
            raise ConfigurationError(
                f"coefficient array must be ({2 * self.L + 1}, {2 * self.d * self.N})"
            )
        # enforce reality: c_{-l} = conj(c_l)
        sym = 0.5 * (c + np.conj(c[::-1]))
        object.__setattr__(self, "coeffs", sym)
        self.coeffs.setflags(write=False)

    # -- construction --------------------------------------------------------

    @classmethod
    def zeros(cls, L: int, d: int, N: int) -> "LoopState":
        return cls(L, d, N, np.zeros((2 * L + 1, 2 * d * N), dtype=complex))

    @classmethod
    def constant(cls, L: int, d: int, value: np.ndarray) -> "LoopState":
        value = np.asarray(value, dtype=float).ravel()
        N = value.size // (2 * d)
        c = np.zeros((2 * L + 1, value.size), dtype=complex)
        c[L] = value
        return cls(L, d, N, c)

    def with_coeffs(self, coeffs: np.ndarray) -> "LoopState":
        return LoopState(self.L, self.d, self.N, coeffs)

    # -- indexing -------------------------------------------------------------

    def mode(self, l: int) -> np.ndarray:
        if abs(l) > self.L:
            raise ParameterError(f"mode {l} outside truncation L={self.L}")
        return self.coeffs[l + self.L]

    @property
    def modes(self) -> np.ndarray:
        """Mode indices -L..L matching the coefficient rows."""
        return np.arange(-self.L, self.L + 1)

    @property
    def width(self) -> int:
        return 2 * self.d

    def u0_cols(self) -> slice:
        return slice(0, self.width)

    def u_cols(self) -> slice:
        return slice(self.width, self.coeffs.shape[1])

    # -- algebra ---------------------------------------------------------------

    def __add__(self, other: "LoopState") -> "LoopState":
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "LoopState") -> "LoopState":
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "LoopState":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "L": self.L,
                "d": self.d,
                "N": self.N,
                "re": self.coeffs.real.tolist(),
                "im": self.coeffs.imag.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "LoopState":
        doc = json.loads(text)
        c = np.array(doc["re"]) + 1j * np.array(doc["im"])
        return cls(doc["L"], doc["d"], doc["N"], c)


@dataclass(frozen=True)
class SymmetryAction:
    """Discrete symmetry data for the three cases.

    C1: trivial.  C2: time shift by theta = 2*pi/m composed with the rotation
    exp(-theta*J) and a body permutation sigma (0-indexed slots, sigma[0]=0).
    C3: half-period shift composed with the reflection R = (-I2) + I2 + ... + I2
    applied with an extra sign flip on the pair component.
    """

    case: str  # "C1" | "C2" | "C3"
    d: int
    n: int
    m: int = 1
    sigma: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.case not in ("C1", "C2", "C3"):
            raise ConfigurationError(f"unknown case {self.case}")
        if self.case == "C2":
            if len(self.sigma) != self.n or self.sigma[0] != 0:
                raise ConfigurationError("C2 needs sigma fixing slot 0")
            if self.m < 2:
                raise ConfigurationError("C2 symmetry order m must be >= 2")
        if self.case == "C3" and self.d < 2:
            raise ConfigurationError("C3 requires d >= 2")

    @property
    def order(self) -> int:
        if self.case == "C1":
            return 1
        if self.case == "C2":
            return self.m
        return 2

    def reflection(self) -> np.ndarray:
        R = np.eye(2 * self.d)
        R[0, 0] = -1.0
        R[1, 1] = -1.0
        return R

    @classmethod
    def from_setup(cls, setup: CablingSetup, n: int) -> "SymmetryAction":
        tag = setup.case.tag
        if tag == "C1":
            return cls("C1", setup.d, n)
        if tag == "C2":
            return cls("C2", setup.d, n, m=setup.case.m, sigma=setup.case.sigma)
        return cls("C3", setup.d, n)


# ---------------------------------------------------------------------------
# sampling


def sample(loop: LoopState, K: int) -> np.ndarray:
    """Values x(s_k) at s_k = 2*pi*k/K, k = 0..K-1; requires K >= 2L+2."""
    if K < 2 * loop.L + 2:
        raise ParameterError(f"K={K} aliases modes of a loop with L={loop.L}")
    spec = np.zeros((K, loop.coeffs.shape[1]), dtype=complex)
    for l in range(-loop.L, loop.L + 1):
        spec[l % K] += loop.mode(l)
    return np.fft.ifft(spec, axis=0).real * K


def from_samples(samples: np.ndarray, L: int, d: int) -> LoopState:
    """Inverse of :func:`sample` (exact for band-limited input)."""
    samples = np.asarray(samples, dtype=float)
    K = samples.shape[0]
    if K < 2 * L + 2:
        raise ParameterError(f"{K} samples cannot resolve modes up to L={L}")
    spec = np.fft.fft(samples, axis=0) / K
    c = np.empty((2 * L + 1, samples.shape[1]), dtype=complex)
    for l in range(-L, L + 1):
        c[l + L] = spec[l % K]
    N = samples.shape[1] // (2 * d)
    return LoopState(L, d, N, c)


def derivative(loop: LoopState) -> LoopState:
    """d/ds in Fourier space."""
    c = loop.coeffs * (1j * loop.modes)[:, None]
    return loop.with_coeffs(c)


# ---------------------------------------------------------------------------
# norms and projections


def sobolev_norm(loop: LoopState, s: float = 1.0) -> float:
    w = (loop.modes.astype(float) ** 2 + 1.0) ** s
    return float(np.sqrt(np.sum(w[:, None] * np.abs(loop.coeffs) ** 2)))


def h1_inner(a: LoopState, b: LoopState, s: float = 1.0) -> float:
    w = (a.modes.astype(float) ** 2 + 1.0) ** s
    return float(np.sum(w[:, None] * (np.conj(a.coeffs) * b.coeffs).real))


def riesz_apply(loop: LoopState) -> LoopState:
    """Mode-wise division by (l^2 + 1): the Riesz map H^-1 -> H^1."""
    w = 1.0 / (loop.modes.astype(float) ** 2 + 1.0)
    return loop.with_coeffs(loop.coeffs * w[:, None])


def mean_projection(loop: LoopState):
    """Split into the mean value xi and the zero-mean remainder eta."""
    xi = loop.mode(0).real.copy()
    c = loop.coeffs.copy()
    c[loop.L] = 0.0
    return xi, loop.with_coeffs(c)


def apply_rotating_derivative_sq(
    loop: LoopState,
    nu: float,
    block: str = "u",
    scale: float = 1.0,
) -> LoopState:
    """Apply (−d_s^2+1)^{-1} (nu d_s + J)^2 to one block (identity on the other).

    Per Fourier mode the factor is (i*l*nu + J)^2 / (l^2 + 1), i.e.
    ((−l^2 nu^2 − 1) I + 2 i l nu J) / (l^2 + 1), block-diagonal over the
    2d-planes of E.
    """
    if block not in ("u0", "u"):
        raise ParameterError("block must be 'u0' or 'u'")
    J = symplectic_J(loop.d)
    cols = loop.u0_cols() if block == "u0" else loop.u_cols()
    c = loop.coeffs.copy()
    sub = c[:, cols]
    ncomp = sub.shape[1] // (2 * loop.d)
    sub = sub.reshape(2 * loop.L + 1, ncomp, 2 * loop.d)
    l = loop.modes.astype(float)[:, None, None]
    out = (-(l**2) * nu**2 - 1.0) * sub + (2j * nu * l) * (sub @ J.T)
    out /= l**2 + 1.0
    c[:, cols] = (scale * out).reshape(2 * loop.L + 1, -1)
    return loop.with_coeffs(c)


# ---------------------------------------------------------------------------
# symmetry actions


def gamma_act(loop: LoopState, action: SymmetryAction) -> LoopState:
    """Apply the generator of the discrete symmetry group to a loop."""
    if action.d != loop.d or action.n != loop.N - 1:
        raise ConfigurationError("symmetry action does not match loop dimensions")
    if action.case == "C1":
        return loop
    D = 2 * loop.d
    if action.case == "C2":
        theta = 2.0 * np.pi / action.m
        phase = np.exp(1j * loop.modes * theta)[:, None]
        c = loop.coeffs * phase
        cs, sn = np.cos(theta), np.sin(theta)
        rot = np.array([[cs, sn], [-sn, cs]])  # exp(-theta*J) on each plane
        u = c[:, D:].reshape(2 * loop.L + 1, action.n, loop.d, 2)
        u = u[:, list(action.sigma)] @ rot.T
        c = np.concatenate([c[:, :D], u.reshape(2 * loop.L + 1, -1)], axis=1)
        return loop.with_coeffs(c)
    # C3: half-period shift, reflection, sign flip on the pair component
    phase = np.where(loop.modes % 2 == 0, 1.0, -1.0)[:, None]
    c = loop.coeffs * phase
    R = action.reflection()
    u0 = -(c[:, :D] @ R.T)
    u = c[:, D:].reshape(2 * loop.L + 1, action.n, D) @ R.T
    return loop.with_coeffs(
        np.concatenate([u0, u.reshape(2 * loop.L + 1, -1)], axis=1)
    )


def gamma_project(loop: LoopState, action: SymmetryAction) -> LoopState:
    """Group-average projection onto the fixed-point subspace."""
    acc = loop
    cur = loop
    for _ in range(action.order - 1):
        cur = gamma_act(cur, action)
        acc = acc + cur
    return acc * (1.0 / action.order)
