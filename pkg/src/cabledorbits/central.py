"""Central configurations: the amended potential, its derivatives, solvers,
example families (ring polygons, Maxwell ring-plus-center) and the
non-degeneracy spectrum report.

A configuration lives in E^n with E = R^(2d); its masses are the fictional
masses M1..Mn of the cabled problem (M1 is the mass of the slot that the
tight pair replaces).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import (
    CollisionError,
    ConfigurationError,
    ConvergenceError,
    ParameterError,
    d2phi,
    dphi,
    phi,
    rotation,
    symplectic_J,
)

__all__ = [
    "Configuration",
    "SpectrumReport",
    "amended_potential",
    "grad_V",
    "hess_V",
    "solve_central_configuration",
    "maxwell_configuration",
    "lagrange_polygon",
    "nondegeneracy_report",
    "rotation_generators",
    "check_c2a",
    "check_c2b",
]

SCHEMA_VERSION = 1


@dataclass
class Configuration:
    """n points in R^(2d) with masses, weighted center at the origin."""

    points: np.ndarray  # (n, 2d)
    masses: np.ndarray  # (n,)
    alpha: float
    d: int

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.masses = np.asarray(self.masses, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2 * self.d:
            raise ConfigurationError(
                f"points must have shape (n, {2 * self.d}), got {self.points.shape}"
            )
        if self.masses.shape != (self.points.shape[0],):
            raise ConfigurationError("one mass per point required")
        if np.any(self.masses <= 0.0):
            raise ParameterError("masses must be strictly positive")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def weighted_center(self) -> np.ndarray:
        return self.masses @ self.points / self.masses.sum()

    def recentred(self) -> "Configuration":
        c = self.masses @ self.points / self.masses.sum()
        return Configuration(self.points - c, self.masses.copy(), self.alpha, self.d)

    def min_separation(self) -> float:
        diff = self.points[:, None, :] - self.points[None, :, :]
        r = np.linalg.norm(diff, axis=-1)
        np.fill_diagonal(r, np.inf)
        return float(r.min())

    # -- serialization -----------------------------------------------------

    def to_json(self, hex_floats: bool = False) -> str:
        if hex_floats:
            enc = lambda v: float(v).hex()
        else:
            enc = float
        doc = {
            "schema": SCHEMA_VERSION,
            "alpha": enc(self.alpha),
            "d": self.d,
            "masses": [enc(v) for v in self.masses],
            "points": [[enc(v) for v in row] for row in self.points],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Configuration":
        doc = json.loads(text)
        dec = lambda v: float.fromhex(v) if isinstance(v, str) else float(v)
        return cls(
            points=np.array([[dec(v) for v in row] for row in doc["points"]]),
            masses=np.array([dec(v) for v in doc["masses"]]),
            alpha=dec(doc["alpha"]),
            d=int(doc["d"]),
        )


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    kernel_dim: int
    expected_kernel_dim: int
    nondegenerate: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": SCHEMA_VERSION,
                "eigenvalues": [float(v) for v in self.eigenvalues],
                "kernel_dim": self.kernel_dim,
                "expected_kernel_dim": self.expected_kernel_dim,
                "nondegenerate": self.nondegenerate,
            },
            indent=2,
            sort_keys=True,
        )


# ---------------------------------------------------------------------------
# amended potential and derivatives


def _separations(points: np.ndarray):
    diff = points[:, None, :] - points[None, :, :]  # (n, n, 2d)
    r = np.linalg.norm(diff, axis=-1)
    off = ~np.eye(points.shape[0], dtype=bool)
    if np.any(r[off] <= 0.0):
        raise CollisionError("configuration has coinciding points")
    return diff, r


def amended_potential(cfg: Configuration) -> float:
    """V(v) = 1/2 sum Mj |vj|^2 + sum_{j<k} Mj Mk phi(|vj - vk|)."""
    M = cfg.masses
    v = cfg.points
    _, r = _separations(v)
    val = 0.5 * float(M @ np.sum(v * v, axis=1))
    iu, ju = np.triu_indices(cfg.n, k=1)
    if iu.size:
        val += float(np.sum(M[iu] * M[ju] * phi(r[iu, ju], cfg.alpha)))
    return val


def grad_V(cfg: Configuration) -> np.ndarray:
    """Gradient of the amended potential; zero exactly at central configurations."""
    M = cfg.masses
    v = cfg.points
    diff, r = _separations(v)
    np.fill_diagonal(r, np.inf)
    w = r ** (-(cfg.alpha + 1.0))  # (n, n), zero on the diagonal via inf
    pair = (M[:, None] * M[None, :] * w)[:, :, None] * diff
    return M[:, None] * v - pair.sum(axis=1)


def hess_V(cfg: Configuration) -> np.ndarray:
    """Analytic Hessian of V as a symmetric (2dn, 2dn) matrix."""
    M = cfg.masses
    v = cfg.points
    n, D = v.shape
    diff, r = _separations(v)
    H = np.zeros((n * D, n * D))
    eye = np.eye(D)
    for l in range(n):
        H[l * D : (l + 1) * D, l * D : (l + 1) * D] += M[l] * eye
        for k in range(n):
            if k == l:
                continue
            w = diff[l, k]
            rr = r[l, k]
            # Jacobian of -(v_l - v_k) / r^(alpha+1) with respect to v_l
            blk = M[l] * M[k] * (
                -eye * rr ** (-(cfg.alpha + 1.0))
                + (cfg.alpha + 1.0) * np.outer(w, w) * rr ** (-(cfg.alpha + 3.0))
            )
            H[l * D : (l + 1) * D, l * D : (l + 1) * D] += blk
            H[l * D : (l + 1) * D, k * D : (k + 1) * D] -= blk
    return 0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# solver


def solve_central_configuration(
    guess: Configuration,
    tol: float = 1e-12,
    max_iters: int = 60,
) -> Configuration:
    """Damped Newton iteration on grad_V = 0.

    The rotation degeneracy is handled with a least-squares step (the kernel
    directions get no update), collisions reject the step, and the weighted
    center is re-projected to the origin at the end.
    """
    cfg = guess.recentred()
    res = float(np.linalg.norm(grad_V(cfg)))
    for _ in range(max_iters):
        if res <= tol:
            break
        g = grad_V(cfg).ravel()
        H = hess_V(cfg)
        step, *_ = np.linalg.lstsq(H, -g, rcond=1e-10)
        step = step.reshape(cfg.points.shape)
        t = 1.0
        while t >= 1e-8:
            trial = Configuration(cfg.points + t * step, cfg.masses, cfg.alpha, cfg.d)
            try:
                new_res = float(np.linalg.norm(grad_V(trial)))
            except CollisionError:
                t *= 0.5
                continue
            if new_res < res or res <= tol:
                cfg, res = trial, new_res
                break
            t *= 0.5
        else:
            raise ConvergenceError(
                f"damping floor reached at residual {res:.3e}"
            )
    if res > tol:
        raise ConvergenceError(
            f"central configuration solve stalled at residual {res:.3e} (tol {tol:.1e})"
        )
    return cfg.recentred()


# ---------------------------------------------------------------------------
# example families


def ring_constant(m: int, alpha: float) -> float:
    """Proportionality constant S with sum_k (e_l - e_k)/|e_l - e_k|^(a+1) = S e_l
    on the unit regular m-gon."""
    if m < 2:
        raise ParameterError("ring needs at least two bodies")
    angles = 2.0 * np.pi * np.arange(m) / m
    pts = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    e0 = pts[0]
    diff = e0 - pts[1:]
    r = np.linalg.norm(diff, axis=1)
    force = np.sum(diff * (r ** (-(alpha + 1.0)))[:, None], axis=0)
    return float(force @ e0)


def _ring_points(m: int, radius: float) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(m) / m
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def maxwell_configuration(n: int, mu: float, alpha: float) -> Configuration:
    """Saturn's-ring model: central mass mu at the origin plus a ring of n-1
    unit masses.  The ring radius solves R^(alpha+1) = mu + S_{n-1}."""
    if n < 4:
        raise ParameterError("Maxwell configuration needs n >= 4")
    if mu <= 0.0:
        raise ParameterError("central mass mu must be positive")
    m_ring = n - 1
    S = ring_constant(m_ring, alpha)
    R = (mu + S) ** (1.0 / (alpha + 1.0))
    points = np.vstack([np.zeros((1, 2)), _ring_points(m_ring, R)])
    masses = np.concatenate([[mu], np.ones(m_ring)])
    return Configuration(points, masses, alpha, d=1)


def lagrange_polygon(n_ring: int, alpha: float) -> Configuration:
    """Regular polygon of equal unit masses (no central body)."""
    S = ring_constant(n_ring, alpha)
    R = S ** (1.0 / (alpha + 1.0))
    return Configuration(_ring_points(n_ring, R), np.ones(n_ring), alpha, d=1)


# ---------------------------------------------------------------------------
# non-degeneracy


def rotation_generators(d: int):
    """Real 2d x 2d matrices spanning u(d) (antisymmetric, commuting with J)."""
    gens = []

    def realify(A):
        # complex d x d -> real 2d x 2d, identifying C^d with R^(2d)
        out = np.zeros((2 * d, 2 * d))
        for j in range(d):
            for k in range(d):
                a, b = A[j, k].real, A[j, k].imag
                out[2 * j, 2 * k] = a
                out[2 * j, 2 * k + 1] = -b
                out[2 * j + 1, 2 * k] = b
                out[2 * j + 1, 2 * k + 1] = a
        return out

    for j in range(d):
        A = np.zeros((d, d), dtype=complex)
        A[j, j] = 1j
        gens.append(realify(A))
    for j in range(d):
        for k in range(j + 1, d):
            A = np.zeros((d, d), dtype=complex)
            A[j, k] = 1.0
            A[k, j] = -1.0
            gens.append(realify(A))
            B = np.zeros((d, d), dtype=complex)
            B[j, k] = 1j
            B[k, j] = 1j
            gens.append(realify(B))
    return gens


def nondegeneracy_report(
    a: Configuration,
    tol: Optional[float] = None,
    residual_tol: float = 1e-8,
) -> SpectrumReport:
    """Spectrum of hess_V(a) with the rotation-orbit kernel count.

    The expected kernel dimension is the rank of the span of the rotation
    generators applied to the configuration; the configuration is
    non-degenerate when the numerical kernel has exactly that dimension.
    """
    res = float(np.linalg.norm(grad_V(a)))
    if res > residual_tol:
        raise ParameterError(
            f"not a central configuration (residual {res:.3e} > {residual_tol:.1e})"
        )
    H = hess_V(a)
    eigs = np.linalg.eigvalsh(H)
    scale = float(np.max(np.abs(eigs)))
    if tol is None:
        tol = 1e-8 * scale
    kernel_dim = int(np.sum(np.abs(eigs) < tol))
    tangent = []
    for A in rotation_generators(a.d):
        tangent.append((a.points @ A.T).ravel())
    T = np.array(tangent)
    svals = np.linalg.svd(T, compute_uv=False)
    expected = int(np.sum(svals > 1e-10 * max(1.0, svals.max())))
    return SpectrumReport(
        eigenvalues=np.sort(eigs),
        kernel_dim=kernel_dim,
        expected_kernel_dim=expected,
        nondegenerate=(kernel_dim == expected),
    )


# ---------------------------------------------------------------------------
# symmetry checks for the Newtonian case (C2)


def check_c2a(masses: Sequence[float], sigma: Sequence[int], tol: float = 1e-12) -> bool:
    """Masses invariant under the permutation: M_sigma(l) = M_l."""
    masses = np.asarray(masses, dtype=float)
    return bool(np.all(np.abs(masses[list(sigma)] - masses) <= tol * (1.0 + masses)))


def check_c2b(cfg: Configuration, sigma: Sequence[int], m: int, tol: float = 1e-12) -> bool:
    """Positions satisfy a_sigma(l) = exp(theta*J) a_l with theta = 2*pi/m."""
    theta = 2.0 * np.pi / m
    rot = rotation(theta, cfg.d)
    lhs = cfg.points[list(sigma)]
    rhs = cfg.points @ rot.T
    scale = 1.0 + float(np.max(np.abs(cfg.points)))
    return bool(np.max(np.abs(lhs - rhs)) <= tol * scale)
