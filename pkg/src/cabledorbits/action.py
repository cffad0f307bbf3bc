"""The normalised action functional on loop space, its H^1 gradient, the
epsilon-scaling of the residual and the closed-form limit Hessian blocks.

The functional splits as A = A0 + H:

    A0 = eps^(1-a) M0 int [ |(nu/om d_s + J) u0|^2 / 2 + phi(|u0|) ] ds
       + int [ sum Mj |(nu d_s + J) uj|^2 / 2 + sum_{j<k} Mj Mk phi(|uj-uk|) ] ds

and H integrates the pair/far-body coupling h.  Gradients are H^1 gradients
through the Riesz map: mode l of the first variation is divided by l^2 + 1,
so that dA(x)(y) = 2*pi * h1_inner(gradient(x), y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .central import Configuration
from .model import (
    CablingSetup,
    CollisionError,
    ConfigurationError,
    MassSystem,
    ParameterError,
    phi,
    symplectic_J,
)
from .loops import (
    LoopState,
    SymmetryAction,
    derivative,
    from_samples,
    gamma_project,
    sample,
)

__all__ = [
    "ActionParams",
    "HessianBlock",
    "ModeBound",
    "action_A0",
    "action_H",
    "coupling_gradient",
    "action_total",
    "gradient",
    "scaled_gradient",
    "hessian_block",
    "invertibility_report",
    "pairing",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ActionParams:
    """Masses, cabling parameters, Kepler orientation and quadrature size."""

    ms: MassSystem
    setup: CablingSetup
    a0: np.ndarray = None
    K: Optional[int] = None  # quadrature nodes; default 4L+4 per loop

    def __post_init__(self):
        d = self.setup.d
        a0 = self.a0
        if a0 is None:
            a0 = np.zeros(2 * d)
            a0[0] = 1.0
        a0 = np.asarray(a0, dtype=float)
        if a0.shape != (2 * d,):
            raise ConfigurationError(f"a0 must live in R^{2 * d}")
        if abs(np.linalg.norm(a0) - 1.0) > 1e-12:
            raise ConfigurationError("a0 must have unit length")
        if self.setup.case.tag == "C3" and np.any(np.abs(a0[2:]) > 1e-14):
            raise ConfigurationError("case C3 requires a0 in the first plane")
        object.__setattr__(self, "a0", a0)

    def nodes(self, loop: LoopState) -> int:
        return self.K if self.K is not None else 4 * loop.L + 4

    @property
    def n(self) -> int:
        return self.ms.n


@dataclass(frozen=True)
class HessianBlock:
    """Limit (eps -> 0) Hessian block of the scaled residual at mode l."""

    l: int
    T_u0: np.ndarray  # (2d, 2d) complex Hermitian
    T_u: np.ndarray   # (2dn, 2dn) real diagonal
    lam1: Tuple[float, float]  # (minus, plus), multiplicity 1 each
    lam2: Tuple[float, float]  # (minus, plus), multiplicity d-1 each


@dataclass(frozen=True)
class ModeBound:
    l: int
    min_abs_eigenvalue: float
    resonant: bool


# ---------------------------------------------------------------------------
# sampling helpers


def _blocks(xs: np.ndarray, d: int, N: int):
    D = 2 * d
    u0 = xs[:, :D]
    u = xs[:, D:].reshape(xs.shape[0], N - 1, D)
    return u0, u


def _pair_data(u: np.ndarray, alpha: float):
    """Pairwise differences/distances among the configuration bodies."""
    diff = u[:, :, None, :] - u[:, None, :, :]  # (K, n, n, D)
    r = np.linalg.norm(diff, axis=-1)
    n = u.shape[1]
    off = ~np.eye(n, dtype=bool)
    if np.any(r[:, off] <= 0.0):
        bad = int(np.argwhere(r[:, off] <= 0.0)[0, 0])
        raise CollisionError(f"configuration bodies collide at quadrature node {bad}")
    return diff, r


def _rotated_u0(u0: np.ndarray, K: int, d: int):
    """exp(s_k J) u0(s_k) on the uniform grid."""
    s = TWO_PI * np.arange(K) / K
    c, sn = np.cos(s), np.sin(s)
    out = np.empty_like(u0)
    for i in range(d):
        x, y = u0[:, 2 * i], u0[:, 2 * i + 1]
        out[:, 2 * i] = c * x - sn * y
        out[:, 2 * i + 1] = sn * x + c * y
    return out


def _unrotate(v: np.ndarray, K: int, d: int):
    """exp(-s_k J) v(s_k): transpose of the rotation applied pointwise."""
    s = TWO_PI * np.arange(K) / K
    c, sn = np.cos(s), np.sin(s)
    out = np.empty_like(v)
    for i in range(d):
        x, y = v[:, 2 * i], v[:, 2 * i + 1]
        out[:, 2 * i] = c * x + sn * y
        out[:, 2 * i + 1] = -sn * x + c * y
    return out


# ---------------------------------------------------------------------------
# functional values


def action_A0(x: LoopState, p: ActionParams) -> float:
    ms, st = p.ms, p.setup
    K = p.nodes(x)
    J = symplectic_J(x.d)
    xs = sample(x, K)
    dxs = sample(derivative(x), K)
    u0, u = _blocks(xs, x.d, x.N)
    du0, du = _blocks(dxs, x.d, x.N)

    r0 = np.linalg.norm(u0, axis=1)
    if np.any(r0 <= 0.0):
        bad = int(np.argmax(r0 <= 0.0))
        raise CollisionError(f"pair separation vanishes at quadrature node {bad}")
    v0 = (st.nu / st.omega) * du0 + u0 @ J.T
    kepler = 0.5 * np.sum(v0 * v0, axis=1) + phi(r0, ms.alpha)
    total = st.epsilon ** (1.0 - ms.alpha) * ms.M[0] * np.mean(kepler) * TWO_PI

    M = np.asarray(ms.M[1:])
    vu = st.nu * du + u @ J.T
    kinetic = 0.5 * np.sum(M[None, :] * np.sum(vu * vu, axis=2), axis=1)
    _, r = _pair_data(u, ms.alpha)
    iu, ju = np.triu_indices(x.N - 1, k=1)
    pot = np.zeros(K)
    if iu.size:
        pot = np.sum(M[iu] * M[ju] * phi(r[:, iu, ju], ms.alpha), axis=1)
    total += np.mean(kinetic + pot) * TWO_PI
    return float(total)


def _coupling_samples(x: LoopState, p: ActionParams, K: int):
    """h and its pointwise derivatives on the quadrature grid.

    Returns (h_values, dh_du0, dh_du) with dh_du of shape (K, n, 2d).
    """
    ms, st = p.ms, p.setup
    xs = sample(x, K)
    u0, u = _blocks(xs, x.d, x.N)
    n = x.N - 1
    D = 2 * x.d
    h = np.zeros(K)
    g0 = np.zeros((K, D))
    gu = np.zeros((K, n, D))
    if n < 2 or st.epsilon == 0.0:
        return h, g0, gu
    ru0 = _rotated_u0(u0, K, x.d)
    alpha = ms.alpha
    for k in range(1, n):
        base = u[:, 0] - u[:, k]
        rb = np.linalg.norm(base, axis=1)
        if np.any(rb <= 0.0):
            raise CollisionError(f"bodies 1 and {k + 1} collide on the grid")
        fb = base * (rb ** (-(alpha + 1.0)))[:, None]
        for j, mu_j in enumerate(ms.mu):
            w = base - mu_j * st.epsilon * ru0
            rw = np.linalg.norm(w, axis=1)
            if np.any(rw <= 0.0):
                raise CollisionError(f"pair body {j} collides with body {k + 1}")
            coef = ms.M[k + 1] * ms.m[j]
            h += coef * (phi(rw, alpha) - phi(rb, alpha))
            fw = w * (rw ** (-(alpha + 1.0)))[:, None]
            g0 += coef * mu_j * st.epsilon * _unrotate(fw, K, x.d)
            gu[:, 0] -= coef * (fw - fb)
            gu[:, k] += coef * (fw - fb)
    return h, g0, gu


def coupling_gradient(x: LoopState, p: ActionParams) -> LoopState:
    """H^1 gradient of the coupling term alone."""
    K = p.nodes(x)
    _, g0, gu = _coupling_samples(x, p, K)
    f = np.concatenate([g0, gu.reshape(K, -1)], axis=1)
    g = from_samples(f, x.L, x.d)
    return g.with_coeffs(g.coeffs / (x.modes.astype(float) ** 2 + 1.0)[:, None])


def action_H(x: LoopState, p: ActionParams) -> float:
    h, _, _ = _coupling_samples(x, p, p.nodes(x))
    return float(np.mean(h) * TWO_PI)


def action_total(x: LoopState, p: ActionParams) -> float:
    return action_A0(x, p) + action_H(x, p)


# ---------------------------------------------------------------------------
# gradient


def _rot_sq_block(coeffs: np.ndarray, modes: np.ndarray, nu: float, d: int):
    """(i*l*nu + J)^2 c_l per mode, block-diagonal over the planes of E."""
    J = symplectic_J(d)
    ncomp = coeffs.shape[1] // (2 * d)
    sub = coeffs.reshape(coeffs.shape[0], ncomp, 2 * d)
    l = modes.astype(float)[:, None, None]
    out = (-(l**2) * nu**2 - 1.0) * sub + (2j * nu * l) * (sub @ J.T)
    return out.reshape(coeffs.shape)


def gradient(x: LoopState, p: ActionParams) -> LoopState:
    """H^1 gradient of A = A0 + H; linear terms mode-diagonal, forces
    pseudo-spectral (sample -> pointwise force -> transform)."""
    ms, st = p.ms, p.setup
    K = p.nodes(x)
    D = 2 * x.d
    modes = x.modes

    xs = sample(x, K)
    u0, u = _blocks(xs, x.d, x.N)
    r0 = np.linalg.norm(u0, axis=1)
    if np.any(r0 <= 0.0):
        raise CollisionError("pair separation vanishes on the grid")
    diff, r = _pair_data(u, ms.alpha)

    # pointwise first-variation forces
    f = np.zeros_like(xs)
    scale0 = st.epsilon ** (1.0 - ms.alpha) * ms.M[0]
    f[:, :D] = -scale0 * u0 * (r0 ** (-(ms.alpha + 1.0)))[:, None]
    M = np.asarray(ms.M[1:])
    rr = r.copy()
    n = x.N - 1
    rr[:, np.arange(n), np.arange(n)] = np.inf
    w = rr ** (-(ms.alpha + 1.0))
    force = -(M[None, :, None, None] * M[None, None, :, None] * w[..., None] * diff)
    f[:, D:] = force.sum(axis=2).reshape(K, -1)

    _, g0, gu = _coupling_samples(x, p, K)
    f[:, :D] += g0
    f[:, D:] += gu.reshape(K, -1)

    grad = from_samples(f, x.L, x.d)
    c = grad.coeffs.copy()

    # mode-diagonal kinetic terms: -(i l nu + J)^2 with the u0 block at nu/omega
    c[:, :D] += -scale0 * _rot_sq_block(x.coeffs[:, :D], modes, st.nu / st.omega, x.d)
    mass_cols = np.repeat(M, D)
    c[:, D:] += -mass_cols[None, :] * _rot_sq_block(x.coeffs[:, D:], modes, st.nu, x.d)

    c /= (modes.astype(float) ** 2 + 1.0)[:, None]
    return x.with_coeffs(c)


def scaled_gradient(x: LoopState, p: ActionParams) -> LoopState:
    """Gradient with the D_eps / C_eps row scalings that stay bounded as
    eps -> 0: u0 rows get eps^(alpha-1); u rows get eps^(alpha+1) on the
    nonzero modes and 1 on the mean."""
    g = gradient(x, p)
    eps, alpha = p.setup.epsilon, p.ms.alpha
    D = 2 * x.d
    c = g.coeffs.copy()
    c[:, :D] *= eps ** (alpha - 1.0)
    nonzero = x.modes != 0
    c[np.ix_(nonzero, np.arange(D, c.shape[1]))] *= eps ** (alpha + 1.0)
    return x.with_coeffs(c)


def pairing(grad: LoopState, direction: LoopState) -> float:
    """dA(x)(y) for the H^1 gradient convention used here."""
    from .loops import h1_inner

    return TWO_PI * h1_inner(grad, direction, s=1.0)


# ---------------------------------------------------------------------------
# limit Hessian blocks


def hessian_block(l: int, p: ActionParams) -> HessianBlock:
    """Closed-form eps -> 0 block of the scaled Hessian at the ansatz.

    T_u0 = M0/(l^2+1) [ l^2 I - 2 i l J + (a+1) a0 a0^t ],
    T_u  = l^2/(l^2+1) diag(M1..Mn), with eigenvalues
    lam1 = M0/(l^2+1) [ l^2 + (a+1)/2 +- sqrt(16 l^2 + (a+1)^2)/2 ]  (mult. 1)
    lam2 = M0/(l^2+1) l (l +- 2)                                     (mult. d-1).
    """
    if l == 0:
        raise ParameterError("mean mode handled separately; l must be nonzero")
    ms = p.ms
    d = p.setup.d
    alpha = ms.alpha
    M0 = ms.M[0]
    J = symplectic_J(d)
    a0 = p.a0
    den = l * l + 1.0
    T0 = (M0 / den) * (
        l * l * np.eye(2 * d) - 2j * l * J + (alpha + 1.0) * np.outer(a0, a0)
    )
    M = np.asarray(ms.M[1:])
    Tu = np.diag(np.repeat((l * l / den) * M, 2 * d))
    root = math.sqrt(16.0 * l * l + (alpha + 1.0) ** 2)
    lam1 = (
        (M0 / den) * (l * l + (alpha + 1.0) / 2.0 - root / 2.0),
        (M0 / den) * (l * l + (alpha + 1.0) / 2.0 + root / 2.0),
    )
    lam2 = ((M0 / den) * l * (l - 2.0), (M0 / den) * l * (l + 2.0))
    return HessianBlock(l=l, T_u0=T0, T_u=Tu, lam1=lam1, lam2=lam2)


def _surviving_u0_components(l: int, d: int, action: SymmetryAction):
    """Indices of u0 components of mode l that survive the Gamma projection."""
    if action.case == "C1":
        return list(range(2 * d))
    if action.case == "C2":
        return list(range(2 * d)) if l % action.m == 0 else []
    # C3: first plane on even modes, remaining planes on odd modes
    if l % 2 == 0:
        return [0, 1]
    return list(range(2, 2 * d))


def invertibility_report(p: ActionParams, Lmax: int, n_bodies: int,
                         resonance_tol: float = 1e-9) -> List[ModeBound]:
    """Per-mode minimal |eigenvalue| of the limit block restricted to the
    Gamma-fixed components; flags any surviving resonance."""
    action = SymmetryAction.from_setup(p.setup, n_bodies)
    rows = []
    Mmin = min(p.ms.M[1:])
    for l in range(1, Lmax + 1):
        blk = hessian_block(l, p)
        vals = [l * l / (l * l + 1.0) * Mmin]
        comps = _surviving_u0_components(l, p.setup.d, action)
        if comps:
            sub = blk.T_u0[np.ix_(comps, comps)]
            vals.extend(np.abs(np.linalg.eigvalsh(sub)))
        m = float(min(vals))
        rows.append(ModeBound(l=l, min_abs_eigenvalue=m, resonant=m < resonance_tol))
    return rows
