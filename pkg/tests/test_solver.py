import numpy as np
import pytest

from cabledorbits.central import Configuration, lagrange_polygon, maxwell_configuration
from cabledorbits.loops import LoopState, sobolev_norm
from cabledorbits.model import (
    CablingSetup,
    CaseC1,
    CaseC2,
    CaseC3,
    ConfigurationError,
    MassSystem,
)
from cabledorbits.solver import (
    ODEReport,
    RefineOptions,
    build_ansatz,
    embed_perpendicular,
    ode_residual,
    pack,
    reconstruct_trajectory,
    refine,
    unpack,
)


def _triangle(alpha=1.0, p=5, L=16, sign=+1):
    ms = MassSystem(alpha=alpha, m=(0.5, 0.5, 1.0, 1.0))
    st = CablingSetup.from_pq(p, 1, alpha, sign=sign, case=CaseC1(), d=1)
    cfg = lagrange_polygon(3, alpha)
    return ms, st, cfg


def test_pack_unpack_round_trip():
    rng = np.random.default_rng(0)
    L, d, N = 5, 2, 3
    c = rng.standard_normal((2 * L + 1, 2 * d * N)) + 1j * rng.standard_normal(
        (2 * L + 1, 2 * d * N)
    )
    x = LoopState(L, d, N, c)
    y = unpack(pack(x), L, d, N)
    assert np.allclose(y.coeffs, x.coeffs, atol=1e-14)
    v = rng.standard_normal(pack(x).size)
    assert np.allclose(pack(unpack(v, L, d, N)), v, atol=1e-14)


def test_build_ansatz_is_constant_loop():
    ms, st, cfg = _triangle()
    x0, params = build_ansatz(cfg, ms, st, L=8)
    assert np.allclose(x0.mode(0).real[:2], params.a0)
    assert np.allclose(x0.mode(0).real[2:], cfg.points.ravel(), atol=1e-14)
    for l in range(1, 9):
        assert np.max(np.abs(x0.mode(l))) < 1e-15


def test_build_ansatz_refuses_alpha_two_without_symmetry():
    ms = MassSystem(alpha=2.0, m=(0.5, 0.5, 1.0, 1.0))
    st = CablingSetup.from_pq(5, 1, 2.0, case=CaseC1(), d=1)
    cfg = lagrange_polygon(3, 2.0)
    with pytest.raises(ConfigurationError, match="resonant"):
        build_ansatz(cfg, ms, st, L=8)


def test_build_ansatz_validates_masses_and_residual():
    ms, st, cfg = _triangle()
    wrong = Configuration(cfg.points, cfg.masses * 2.0, cfg.alpha, 1)
    with pytest.raises(ConfigurationError, match="masses"):
        build_ansatz(wrong, ms, st, L=8)
    shifted = Configuration(cfg.points * 1.1, cfg.masses, cfg.alpha, 1)
    with pytest.raises(ConfigurationError, match="central"):
        build_ansatz(shifted, ms, st, L=8)


def test_build_ansatz_validates_c2_data():
    ms = MassSystem(alpha=2.0, m=(0.5, 0.5) + (1.0,) * 6)
    cfg = maxwell_configuration(7, 1.0, 2.0)
    bad = CablingSetup.from_pq(64, 1, 2.0,
                               case=CaseC2(m=5, sigma=(0, 1, 2, 3, 4, 5, 6)), d=1)
    with pytest.raises(ConfigurationError, match="covariant"):
        build_ansatz(cfg, ms, bad, L=8)
    ms1 = MassSystem(alpha=1.0, m=(0.5, 0.5) + (1.0,) * 6)
    cfg1 = maxwell_configuration(7, 1.0, 1.0)
    st1 = CablingSetup.from_pq(5, 1, 1.0,
                               case=CaseC2(m=6, sigma=(0, 2, 3, 4, 5, 6, 1)), d=1)
    with pytest.raises(ConfigurationError, match="alpha = 2"):
        build_ansatz(cfg1, ms1, st1, L=8)


def test_build_ansatz_validates_c3_embedding():
    ms = MassSystem(alpha=2.0, m=(0.5, 0.5, 1.0, 1.0))
    st = CablingSetup.from_pq(5, 1, 2.0, case=CaseC3(d=2), d=2)
    cfg = lagrange_polygon(3, 2.0)
    planar_in_pair_plane = Configuration(
        np.hstack([cfg.points, np.zeros_like(cfg.points)]), cfg.masses, 2.0, 2
    )
    with pytest.raises(ConfigurationError, match="complement"):
        build_ansatz(planar_in_pair_plane, ms, st, L=8)
    ok = embed_perpendicular(cfg, 2)
    x0, _ = build_ansatz(ok, ms, st, L=8)
    assert x0.d == 2


def test_refine_reaches_gradient_tolerance():
    ms, st, cfg = _triangle(p=5, L=16)
    x0, params = build_ansatz(cfg, ms, st, L=16)
    sol = refine(x0, params, RefineOptions(L=16, gtol=1e-9))
    assert sol.grad_norm < 1e-9
    assert sol.iterations <= 10
    assert 0 < sol.ansatz_distance < 1.0


def test_refined_solution_json_round_trip():
    ms, st, cfg = _triangle(p=5, L=8)
    x0, params = build_ansatz(cfg, ms, st, L=8)
    sol = refine(x0, params, RefineOptions(L=8))
    import json

    doc = json.loads(sol.to_json())
    assert doc["pq"] == [5, 1]
    back = LoopState.from_json(json.dumps(doc["loop"]))
    assert np.allclose(back.coeffs, sol.loop.coeffs)


def test_reconstruction_satisfies_newton_equations():
    ms, st, cfg = _triangle(p=5, L=16)
    x0, params = build_ansatz(cfg, ms, st, L=16)
    sol = refine(x0, params, RefineOptions(L=16))
    rep = ode_residual(sol.loop, ms, st)
    assert rep.spectral_residual < 1e-8
    assert rep.rk_mismatch < 1e-8
    assert rep.periodicity_error < 1e-12
    assert rep.passed()


def test_reconstruction_velocity_fd():
    ms, st, cfg = _triangle(p=5, L=8)
    x0, params = build_ansatz(cfg, ms, st, L=8)
    t = np.array([0.3, 1.7])
    h = 1e-6
    pos_p, _ = reconstruct_trajectory(x0, ms, st, t + h)
    pos_m, _ = reconstruct_trajectory(x0, ms, st, t - h)
    _, vel = reconstruct_trajectory(x0, ms, st, t)
    assert np.allclose((pos_p - pos_m) / (2 * h), vel, atol=1e-6)


def test_reconstruction_body_positions():
    """Pair bodies straddle their center with the mass-weighted offsets."""
    ms, st, cfg = _triangle(p=5, L=8)
    x0, params = build_ansatz(cfg, ms, st, L=8)
    t = np.array([0.0])
    pos, _ = reconstruct_trajectory(x0, ms, st, t)
    center = ms.m[0] * pos[0, 0] + ms.m[1] * pos[0, 1]
    # at t=0 the constant ansatz puts the center on the first body slot
    assert np.allclose(center, cfg.points[0], atol=1e-13)
    gap = np.linalg.norm(pos[0, 1] - pos[0, 0])
    assert gap == pytest.approx(st.epsilon, rel=1e-12)


def test_ode_report_pass_logic():
    rep = ODEReport(1e-8, 1e-8, 1e-12, 6.28)
    assert rep.passed()
    assert not rep.passed(residual_tol=1e-9)
    assert not ODEReport(1e-8, 1e-8, 1e-6, 6.28).passed()


def test_ode_residual_needs_rational_setup():
    ms, st, cfg = _triangle(p=5, L=8)
    irr = CablingSetup.from_epsilon(0.21, 1.0)
    x0, params = build_ansatz(cfg, ms, st, L=8)
    from cabledorbits.model import ParameterError

    with pytest.raises(ParameterError):
        ode_residual(x0, ms, irr)
