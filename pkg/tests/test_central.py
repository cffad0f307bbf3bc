import math

import numpy as np
import pytest

from cabledorbits.central import (
    Configuration,
    amended_potential,
    check_c2a,
    check_c2b,
    grad_V,
    hess_V,
    lagrange_polygon,
    maxwell_configuration,
    nondegeneracy_report,
    ring_constant,
    solve_central_configuration,
)
from cabledorbits.model import ConvergenceError, ParameterError


def _random_config(rng, n=4, d=1, alpha=2.0):
    pts = rng.standard_normal((n, 2 * d)) * 2.0
    masses = rng.uniform(0.5, 2.0, n)
    return Configuration(pts, masses, alpha, d).recentred()


@pytest.mark.parametrize("alpha", [1.0, 2.0, 3.0])
def test_grad_V_matches_finite_differences(alpha):
    rng = np.random.default_rng(11)
    cfg = _random_config(rng, alpha=alpha)
    g = grad_V(cfg)
    h = 1e-6
    for l in range(cfg.n):
        for c in range(2):
            p = cfg.points.copy()
            p[l, c] += h
            vp = amended_potential(Configuration(p, cfg.masses, alpha, 1))
            p[l, c] -= 2 * h
            vm = amended_potential(Configuration(p, cfg.masses, alpha, 1))
            assert g[l, c] == pytest.approx((vp - vm) / (2 * h), rel=1e-6, abs=1e-8)


def test_hess_V_matches_finite_differences():
    rng = np.random.default_rng(12)
    cfg = _random_config(rng, n=3)
    H = hess_V(cfg)
    h = 1e-6
    flat = cfg.points.ravel()
    for i in range(flat.size):
        p = flat.copy()
        p[i] += h
        gp = grad_V(Configuration(p.reshape(cfg.points.shape), cfg.masses, cfg.alpha, 1))
        p[i] -= 2 * h
        gm = grad_V(Configuration(p.reshape(cfg.points.shape), cfg.masses, cfg.alpha, 1))
        col = (gp - gm).ravel() / (2 * h)
        assert np.allclose(H[:, i], col, atol=1e-6)


def test_ring_constant_triangle():
    # equilateral triangle, Newtonian kernel: S3 = 1/sqrt(3)
    assert ring_constant(3, 2.0) == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-14)


def test_lagrange_triangle_circumradius():
    cfg = lagrange_polygon(3, 2.0)
    R = np.linalg.norm(cfg.points[0])
    assert R == pytest.approx(3.0 ** (-1.0 / 6.0), rel=1e-14)
    assert np.linalg.norm(grad_V(cfg)) < 1e-13


def test_maxwell_radius_and_residual():
    cfg = maxwell_configuration(7, 1.0, 2.0)
    S6 = ring_constant(6, 2.0)
    assert S6 == pytest.approx(1.82735, abs=1e-5)
    R = np.linalg.norm(cfg.points[1])
    assert R == pytest.approx((1.0 + S6) ** (1.0 / 3.0), rel=1e-14)
    assert R == pytest.approx(1.41403, abs=1e-4)
    assert np.linalg.norm(grad_V(cfg)) < 1e-12


def test_maxwell_validation():
    with pytest.raises(ParameterError):
        maxwell_configuration(3, 1.0, 2.0)
    with pytest.raises(ParameterError):
        maxwell_configuration(7, -1.0, 2.0)


def test_solve_from_perturbed_guess():
    rng = np.random.default_rng(5)
    exact = lagrange_polygon(4, 2.0)
    noisy = Configuration(
        exact.points + 0.05 * rng.standard_normal(exact.points.shape),
        exact.masses, 2.0, 1,
    )
    cfg = solve_central_configuration(noisy, tol=1e-12)
    assert np.linalg.norm(grad_V(cfg)) < 1e-12
    assert np.linalg.norm(cfg.weighted_center()) < 1e-12


def test_solve_reports_divergence():
    # two equal masses started on top of a huge gradient plateau far away
    cfg = Configuration(np.array([[1e6, 0.0], [-1e6, 0.0]]), np.ones(2), 2.0, 1)
    with pytest.raises(ConvergenceError):
        solve_central_configuration(cfg, tol=1e-12, max_iters=3)


@pytest.mark.parametrize("alpha", [1.0, 2.0])
@pytest.mark.parametrize("n", [3, 4, 5])
def test_nondegeneracy_of_rings(n, alpha):
    rep = nondegeneracy_report(lagrange_polygon(n, alpha))
    assert rep.kernel_dim == 1
    assert rep.expected_kernel_dim == 1
    assert rep.nondegenerate


def test_nondegeneracy_rejects_noncentral_input():
    rng = np.random.default_rng(8)
    with pytest.raises(ParameterError):
        nondegeneracy_report(_random_config(rng))


def test_c2_symmetry_checks():
    cfg = maxwell_configuration(7, 1.0, 2.0)
    sigma = (0, 2, 3, 4, 5, 6, 1)
    assert check_c2a(cfg.masses, sigma)
    assert check_c2b(cfg, sigma, m=6)
    assert not check_c2b(cfg, sigma, m=5)
    assert not check_c2a((1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0), sigma)


def test_configuration_json_round_trip():
    cfg = maxwell_configuration(5, 0.7, 2.0)
    for hexf in (False, True):
        back = Configuration.from_json(cfg.to_json(hex_floats=hexf))
        assert np.array_equal(back.points, cfg.points)
        assert np.array_equal(back.masses, cfg.masses)
        assert back.alpha == cfg.alpha and back.d == cfg.d


def test_spectrum_report_json():
    rep = nondegeneracy_report(lagrange_polygon(3, 2.0))
    import json

    doc = json.loads(rep.to_json())
    assert doc["nondegenerate"] is True
    assert doc["kernel_dim"] == 1
