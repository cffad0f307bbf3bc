"""Ansatz construction, Newton-Krylov refinement of loops to critical points
of the normalised action, trajectory reconstruction and independent
equation-of-motion certification.

The refinement works on the packed real degrees of freedom of a LoopState,
keeps iterates in the symmetry-fixed subspace by group averaging, pins the
continuous symmetry directions (diagonal rotations and the twisted time
shift) with a bordered system, and solves each Newton step with GMRES using
finite-difference Jacobian products and a mode-diagonal block preconditioner
built from the closed-form limit Hessian.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .central import Configuration, grad_V, rotation_generators, check_c2a, check_c2b
from .model import (
    CablingSetup,
    CollisionError,
    ConfigurationError,
    ConvergenceError,
    MassSystem,
    ParameterError,
    symplectic_J,
)
from .loops import (
    LoopState,
    SymmetryAction,
    derivative,
    gamma_project,
    h1_inner,
    sobolev_norm,
)
from .action import ActionParams, action_total, gradient, scaled_gradient, \
    hessian_block, invertibility_report

__all__ = [
    "RefineOptions",
    "OrbitSolution",
    "ODEReport",
    "build_ansatz",
    "embed_perpendicular",
    "refine",
    "reconstruct_trajectory",
    "ode_residual",
    "pack",
    "unpack",
]

TWO_PI = 2.0 * math.pi
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RefineOptions:
    L: int = 64
    max_iters: int = 40
    gtol: float = 1e-9          # H^1 norm of the unscaled projected gradient
    gmres_rtol: float = 1e-4
    gmres_maxiter: int = 400
    fd_step: float = 1e-7
    verbose: bool = False


@dataclass
class OrbitSolution:
    """A refined loop with its parameters and refinement diagnostics."""

    loop: LoopState
    ms: MassSystem
    setup: CablingSetup
    grad_norm: float
    scaled_grad_norm: float
    action_value: float
    iterations: int
    ansatz_distance: float  # H^1 distance to the constant starting loop

    def to_json(self, indent: int = 2) -> str:
        case = self.setup.case
        case_doc = {"tag": case.tag}
        if case.tag == "C2":
            case_doc.update({"m": case.m, "sigma": list(case.sigma)})
        if case.tag == "C3":
            case_doc.update({"d": case.d})
        doc = {
            "schema": SCHEMA_VERSION,
            "alpha": self.ms.alpha,
            "masses": list(self.ms.m),
            "epsilon": self.setup.epsilon,
            "sign": self.setup.sign,
            "pq": list(self.setup.pq) if self.setup.pq else None,
            "d": self.setup.d,
            "case": case_doc,
            "loop": json.loads(self.loop.to_json()),
            "grad_norm": self.grad_norm,
            "scaled_grad_norm": self.scaled_grad_norm,
            "action_value": self.action_value,
            "iterations": self.iterations,
            "ansatz_distance": self.ansatz_distance,
        }
        return json.dumps(doc, indent=indent, sort_keys=True)


@dataclass
class ODEReport:
    """Independent certification of a reconstructed trajectory."""

    spectral_residual: float   # relative sup-norm of m q'' + grad U on a dense grid
    rk_mismatch: float         # max position gap vs DOP853 at the checkpoints
    periodicity_error: float   # |q(T) - q(0)| + |q'(T) - q'(0)| from the loop
    period: float

    def passed(self, residual_tol: float = 1e-6, periodicity_tol: float = 1e-9) -> bool:
        return (
            self.spectral_residual < residual_tol
            and self.rk_mismatch < residual_tol
            and self.periodicity_error < periodicity_tol
        )

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(
            {
                "schema": SCHEMA_VERSION,
                "spectral_residual": self.spectral_residual,
                "rk_mismatch": self.rk_mismatch,
                "periodicity_error": self.periodicity_error,
                "period": self.period,
            },
            indent=indent,
            sort_keys=True,
        )


# ---------------------------------------------------------------------------
# ansatz


def embed_perpendicular(cfg: Configuration, d: int) -> Configuration:
    """Embed a planar configuration into R^(2d) using planes 2..d, leaving the
    first plane (the one that carries the tight pair in the d >= 2 case) empty."""
    if d < 2:
        raise ParameterError("embedding target needs d >= 2")
    if cfg.d != 1:
        raise ParameterError("only planar configurations can be embedded here")
    pts = np.zeros((cfg.n, 2 * d))
    pts[:, 2:4] = cfg.points
    return Configuration(pts, cfg.masses.copy(), cfg.alpha, d)


def build_ansatz(
    cfg: Configuration,
    ms: MassSystem,
    setup: CablingSetup,
    L: int,
    a0: Optional[np.ndarray] = None,
    residual_tol: float = 1e-8,
) -> Tuple[LoopState, ActionParams]:
    """Constant loop (a0, a1..an) from a central configuration, with all the
    case-compatibility requirements checked up front.

    Raises ConfigurationError naming the violated requirement.
    """
    if cfg.n != ms.n:
        raise ConfigurationError(
            f"configuration has {cfg.n} bodies but the mass system expects {ms.n}"
        )
    if cfg.d != setup.d:
        raise ConfigurationError("configuration dimension does not match the setup")
    if cfg.alpha != ms.alpha:
        raise ConfigurationError("potential exponents of configuration and masses differ")
    if not np.allclose(cfg.masses, ms.M[1:], rtol=0, atol=1e-12):
        raise ConfigurationError(
            "configuration masses must equal the fictional masses M1..Mn"
        )
    res = float(np.linalg.norm(grad_V(cfg)))
    if res > residual_tol:
        raise ConfigurationError(
            f"not a central configuration: residual {res:.3e} > {residual_tol:.1e}"
        )

    tag = setup.case.tag
    if tag == "C1" and ms.alpha == 2.0:
        raise ConfigurationError(
            "alpha = 2 has a resonant first mode; the trivial symmetry case "
            "cannot remove it (use the time-shift symmetry case or d >= 2)"
        )
    if tag == "C2":
        if ms.alpha != 2.0:
            raise ConfigurationError("the time-shift symmetry case requires alpha = 2")
        m, sigma = setup.case.m, setup.case.sigma
        if not check_c2a(ms.M[1:], sigma):
            raise ConfigurationError(
                "masses are not invariant under the body permutation"
            )
        if not check_c2b(cfg, sigma, m, tol=1e-8):
            raise ConfigurationError(
                "configuration is not rotation-covariant under the body permutation"
            )
    if tag == "C3":
        if np.max(np.abs(cfg.points[:, :2])) > 1e-12:
            raise ConfigurationError(
                "the d >= 2 case needs the configuration in the orthogonal "
                "complement of the pair plane (first two components zero)"
            )

    params = ActionParams(ms=ms, setup=setup, a0=a0)
    value = np.concatenate([params.a0, cfg.recentred().points.ravel()])
    x = LoopState.constant(L, setup.d, value)

    # the ansatz must be fixed by the symmetry group
    act = SymmetryAction.from_setup(setup, ms.n)
    fixed = gamma_project(x, act)
    if sobolev_norm(x - fixed) > 1e-8 * max(1.0, sobolev_norm(x)):
        raise ConfigurationError("ansatz is not fixed by the symmetry group")
    return fixed, params


# ---------------------------------------------------------------------------
# packing


def pack(loop: LoopState) -> np.ndarray:
    """Free real degrees of freedom: mode 0 (real) then re/im of modes 1..L."""
    L = loop.L
    c = loop.coeffs
    parts = [c[L].real]
    for l in range(1, L + 1):
        parts.append(c[L + l].real)
        parts.append(c[L + l].imag)
    return np.concatenate(parts)


def unpack(vec: np.ndarray, L: int, d: int, N: int) -> LoopState:
    W = 2 * d * N
    c = np.zeros((2 * L + 1, W), dtype=complex)
    c[L] = vec[:W]
    off = W
    for l in range(1, L + 1):
        cl = vec[off : off + W] + 1j * vec[off + W : off + 2 * W]
        c[L + l] = cl
        c[L - l] = np.conj(cl)
        off += 2 * W
    return LoopState(L, d, N, c)


# ---------------------------------------------------------------------------
# continuous-symmetry pins


def _allowed_rotation_generators(d: int, case_tag: str) -> List[np.ndarray]:
    """Generators of the rotations that commute with the discrete symmetries."""
    if case_tag in ("C1", "C2"):
        return rotation_generators(d)
    # d >= 2: rotations preserving the pair plane and its complement
    gens = [np.zeros((2 * d, 2 * d))]
    gens[0][0:2, 0:2] = symplectic_J(1)
    for A in rotation_generators(d - 1):
        B = np.zeros((2 * d, 2 * d))
        B[2:, 2:] = A
        gens.append(B)
    return gens


def _symmetry_tangents(x: LoopState, case_tag: str) -> List[LoopState]:
    """Tangent loops of the continuous symmetry orbits through x."""
    D = 2 * x.d
    J = symplectic_J(x.d)
    tangents = []
    for A in _allowed_rotation_generators(x.d, case_tag):
        c = np.zeros_like(x.coeffs)
        c[:, :D] = x.coeffs[:, :D] @ A.T
        u = x.coeffs[:, D:].reshape(x.coeffs.shape[0], x.N - 1, D)
        c[:, D:] = (u @ A.T).reshape(x.coeffs.shape[0], -1)
        tangents.append(x.with_coeffs(c))
    # twisted time shift: (u0', u' - J u)
    c = derivative(x).coeffs.copy()
    u = x.coeffs[:, D:].reshape(x.coeffs.shape[0], x.N - 1, D)
    c[:, D:] -= (u @ J.T).reshape(x.coeffs.shape[0], -1)
    tangents.append(x.with_coeffs(c))
    return tangents


def _pin_matrix(x: LoopState, act: SymmetryAction) -> np.ndarray:
    """Orthonormal packed basis of the symmetry tangent space at x."""
    cols = []
    for t in _symmetry_tangents(x, act.case):
        v = pack(gamma_project(t, act))
        nv = np.linalg.norm(v)
        if nv > 1e-12:
            cols.append(v / nv)
    if not cols:
        return np.zeros((pack(x).size, 0))
    Tm = np.stack(cols, axis=1)
    q, r = np.linalg.qr(Tm)
    keep = np.abs(np.diag(r)) > 1e-8
    return q[:, keep]


# ---------------------------------------------------------------------------
# preconditioner


def _block_preconditioner(params: ActionParams, L: int, d: int, N: int):
    """Apply inv of the limit Hessian blocks mode-wise (identity on mode 0)."""
    D = 2 * d
    inv_u0 = {}
    inv_u = {}
    M = np.asarray(params.ms.M[1:])
    for l in range(1, L + 1):
        blk = hessian_block(l, params)
        w, V = np.linalg.eigh(blk.T_u0)
        w = np.where(np.abs(w) > 1e-6, w, np.sign(w) * 1e-6 + (w == 0) * 1e-6)
        inv_u0[l] = (V * (1.0 / w)) @ V.conj().T
        inv_u[l] = np.repeat((l * l + 1.0) / (l * l) / M, D)

    def apply(vec: np.ndarray) -> np.ndarray:
        loop = unpack(vec, L, d, N)
        c = loop.coeffs.copy()
        for l in range(1, L + 1):
            row = c[L + l].copy()
            row[:D] = inv_u0[l] @ row[:D]
            row[D:] *= inv_u[l]
            c[L + l] = row
            c[L - l] = np.conj(row)
        return pack(LoopState(L, d, N, c))

    return apply


# ---------------------------------------------------------------------------
# refinement


def refine(
    x0: LoopState,
    params: ActionParams,
    opts: RefineOptions = RefineOptions(),
) -> OrbitSolution:
    """Newton-Krylov refinement of x0 to a critical point of the action.

    Refuses to run when a symmetry-surviving mode of the limit Hessian is
    resonant (the bordered system would be structurally singular).
    """
    act = SymmetryAction.from_setup(params.setup, params.ms.n)
    report = invertibility_report(params, x0.L, params.ms.n)
    bad = [r.l for r in report if r.resonant]
    if bad:
        raise ConfigurationError(
            f"resonant symmetry-surviving modes {bad}: refinement would be singular"
        )

    L, d, N = x0.L, x0.d, x0.N
    x = gamma_project(x0, act)
    x_start = x
    precond = _block_preconditioner(params, L, d, N)

    def residual(vec: np.ndarray) -> np.ndarray:
        loop = unpack(vec, L, d, N)
        return pack(gamma_project(scaled_gradient(loop, params), act))

    xv = pack(x)
    rv = residual(xv)
    rn = np.linalg.norm(rv)
    iterations = 0
    for iterations in range(1, opts.max_iters + 1):
        g = gamma_project(gradient(unpack(xv, L, d, N), params), act)
        gn = sobolev_norm(g)
        if opts.verbose:
            print(f"iter {iterations - 1}: |grad| = {gn:.3e}, |scaled| = {rn:.3e}")
        if gn < opts.gtol:
            iterations -= 1
            break

        T = _pin_matrix(unpack(xv, L, d, N), act)
        npin = T.shape[1]
        ndof = xv.size
        h = opts.fd_step * (1.0 + np.linalg.norm(xv))

        def matvec(z):
            v, lam = z[:ndof], z[ndof:]
            jv = (residual(xv + (h / max(np.linalg.norm(v), 1e-300)) * v) - rv) \
                * (max(np.linalg.norm(v), 1e-300) / h)
            return np.concatenate([jv + T @ lam, T.T @ v])

        def mprec(z):
            return np.concatenate([precond(z[:ndof]), z[ndof:]])

        A = spla.LinearOperator((ndof + npin, ndof + npin), matvec=matvec)
        Mop = spla.LinearOperator((ndof + npin, ndof + npin), matvec=mprec)
        rhs = np.concatenate([-rv, np.zeros(npin)])
        forcing = min(opts.gmres_rtol, 0.5 * math.sqrt(rn)) if rn < 1.0 else opts.gmres_rtol
        sol, info = spla.gmres(
            A, rhs, rtol=max(forcing, 1e-12), atol=0.0,
            maxiter=opts.gmres_maxiter, M=Mop, restart=80,
        )
        if info != 0:
            raise ConvergenceError(f"GMRES stalled in Newton step {iterations}")
        step = sol[:ndof]

        t = 1.0
        while True:
            try:
                new_rv = residual(xv + t * step)
            except CollisionError:
                new_rv = None
            if new_rv is not None and np.linalg.norm(new_rv) < rn:
                xv = xv + t * step
                rv, rn = new_rv, float(np.linalg.norm(new_rv))
                break
            t *= 0.5
            if t < 1e-6:
                raise ConvergenceError(
                    f"line search failed at |scaled residual| = {rn:.3e}"
                )
    else:
        g = gamma_project(gradient(unpack(xv, L, d, N), params), act)
        gn = sobolev_norm(g)
        if gn >= opts.gtol:
            raise ConvergenceError(
                f"no convergence in {opts.max_iters} Newton steps (|grad| = {gn:.3e})"
            )

    x = gamma_project(unpack(xv, L, d, N), act)
    g = gamma_project(gradient(x, params), act)
    return OrbitSolution(
        loop=x,
        ms=params.ms,
        setup=params.setup,
        grad_norm=float(sobolev_norm(g)),
        scaled_grad_norm=float(np.linalg.norm(residual(pack(x)))),
        action_value=action_total(x, params),
        iterations=iterations,
        ansatz_distance=float(sobolev_norm(x - x_start)),
    )


# ---------------------------------------------------------------------------
# reconstruction


def _eval_loop(loop: LoopState, s: np.ndarray) -> np.ndarray:
    """x(s) for arbitrary (not necessarily uniform) phases s."""
    E = np.exp(1j * np.outer(s, loop.modes))  # (T, 2L+1)
    return (E @ loop.coeffs).real


def _rotate_planes(v: np.ndarray, angles: np.ndarray, d: int) -> np.ndarray:
    """exp(angle*J) v pointwise; v shape (T, 2d), angles shape (T,)."""
    c, sn = np.cos(angles), np.sin(angles)
    out = np.empty_like(v)
    for i in range(d):
        x, y = v[:, 2 * i], v[:, 2 * i + 1]
        out[:, 2 * i] = c * x - sn * y
        out[:, 2 * i + 1] = sn * x + c * y
    return out


def reconstruct_trajectory(
    loop: LoopState,
    ms: MassSystem,
    setup: CablingSetup,
    t: np.ndarray,
):
    """Physical positions and velocities of all N bodies at the times t.

    q0 = e^(tJ) u1(nu t) - m1 eps e^(omega t J) u0(nu t)
    q1 = e^(tJ) u1(nu t) + m0 eps e^(omega t J) u0(nu t)
    qk = e^(tJ) uk(nu t)            (k = 2..n)

    Returns (pos, vel) of shape (len(t), N, 2d).
    """
    t = np.asarray(t, dtype=float)
    d, N = loop.d, loop.N
    D = 2 * d
    s = setup.nu * t
    vals = _eval_loop(loop, s)
    dvals = _eval_loop(derivative(loop), s)
    u0, u = vals[:, :D], vals[:, D:].reshape(len(t), N - 1, D)
    du0, du = dvals[:, :D], dvals[:, D:].reshape(len(t), N - 1, D)

    J = symplectic_J(d)
    pos = np.empty((len(t), N, D))
    vel = np.empty((len(t), N, D))
    # slow rotating frame for the configuration bodies
    for k in range(N - 1):
        rk = _rotate_planes(u[:, k], t, d)
        pos[:, k + 1] = rk
        vel[:, k + 1] = _rotate_planes(u[:, k] @ J.T + setup.nu * du[:, k], t, d)
    # fast rotating frame for the pair offset
    p0 = setup.epsilon * _rotate_planes(u0, setup.omega * t, d)
    v0 = setup.epsilon * _rotate_planes(
        setup.omega * (u0 @ J.T) + setup.nu * du0, setup.omega * t, d
    )
    pos[:, 0] = pos[:, 1] - ms.m[1] * p0
    vel[:, 0] = vel[:, 1] - ms.m[1] * v0
    pos[:, 1] = pos[:, 1] + ms.m[0] * p0
    vel[:, 1] = vel[:, 1] + ms.m[0] * v0
    return pos, vel


def _accelerations(pos: np.ndarray, masses: np.ndarray, alpha: float) -> np.ndarray:
    """q_l'' = - sum_{k != l} m_k (q_l - q_k) / |q_l - q_k|^(alpha+1)."""
    diff = pos[:, :, None, :] - pos[:, None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    Nb = pos.shape[1]
    r[:, np.arange(Nb), np.arange(Nb)] = np.inf
    w = r ** (-(alpha + 1.0))
    return -np.sum(masses[None, None, :, None] * w[..., None] * diff, axis=2)


def _eom(t, y, masses, alpha, Nb, D):
    pos = y[: Nb * D].reshape(1, Nb, D)
    acc = _accelerations(pos, masses, alpha)
    return np.concatenate([y[Nb * D :], acc.ravel()])


def ode_residual(
    loop: LoopState,
    ms: MassSystem,
    setup: CablingSetup,
    rk_checkpoints: Sequence[float] = (0.5, 1.0),
    rk_tol: float = 1e-12,
) -> ODEReport:
    """Certify a reconstructed trajectory against the equations of motion.

    Two independent checks: a spectral second derivative of the reconstructed
    positions on a dense grid inserted into the equations, and a DOP853
    integration from the initial state compared at fractions of the period.
    """
    if setup.pq is None:
        raise ParameterError("certification needs a rational frequency ratio p/q")
    p, q = setup.pq
    T = setup.period
    masses = np.asarray(ms.m)
    Nb, D = loop.N, 2 * loop.d

    # highest harmonic of t with fundamental 2*pi/T present in the reconstruction
    max_harm = p + (p - q) * loop.L
    K = 1 << max(10, math.ceil(math.log2(3 * max_harm)))
    t = T * np.arange(K) / K
    pos, vel = reconstruct_trajectory(loop, ms, setup, t)

    flat = pos.reshape(K, Nb * D)
    spec = np.fft.fft(flat, axis=0)
    freqs = np.fft.fftfreq(K, d=1.0 / K)  # integer harmonics
    acc_spec = spec * (-((TWO_PI / T) * freqs[:, None]) ** 2)
    acc = np.fft.ifft(acc_spec, axis=0).real.reshape(K, Nb, D)
    forces = _accelerations(pos, masses, ms.alpha)
    scale = max(1.0, float(np.max(np.linalg.norm(forces, axis=-1))))
    spectral = float(np.max(np.linalg.norm(acc - forces, axis=-1))) / scale

    # periodicity of the reconstruction itself
    ends, vends = reconstruct_trajectory(loop, ms, setup, np.array([0.0, T]))
    periodicity = float(
        np.max(np.linalg.norm(ends[1] - ends[0], axis=-1))
        + np.max(np.linalg.norm(vends[1] - vends[0], axis=-1))
    )

    # independent integration
    y0 = np.concatenate([pos[0].ravel(), vel[0].ravel()])
    times = sorted(float(c) * T for c in rk_checkpoints)
    sol = solve_ivp(
        _eom, (0.0, times[-1]), y0, t_eval=times, method="DOP853",
        rtol=rk_tol, atol=rk_tol, args=(masses, ms.alpha, Nb, D), dense_output=False,
    )
    if not sol.success:
        raise ConvergenceError(f"reference integration failed: {sol.message}")
    mismatch = 0.0
    for i, tc in enumerate(times):
        ref = sol.y[: Nb * D, i].reshape(Nb, D)
        here, _ = reconstruct_trajectory(loop, ms, setup, np.array([tc]))
        mismatch = max(mismatch, float(np.max(np.linalg.norm(here[0] - ref, axis=-1))))

    return ODEReport(
        spectral_residual=spectral,
        rk_mismatch=mismatch,
        periodicity_error=periodicity,
        period=T,
    )
