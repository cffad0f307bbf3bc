import math

import numpy as np
import pytest

from cabledorbits.braid import (
    braid_word,
    braid_word_of_paths,
    exponent_sum,
    free_reduce,
    winding_numbers,
    word_permutation,
)
from cabledorbits.central import lagrange_polygon
from cabledorbits.model import CablingSetup, CaseC1, MassSystem, ParameterError
from cabledorbits.solver import RefineOptions, build_ansatz, refine


def _rigid_polygon_paths(n, direction=+1, radius=1.0):
    a = radius * np.stack(
        [np.cos(2 * np.pi * np.arange(n) / n), np.sin(2 * np.pi * np.arange(n) / n)],
        axis=1,
    )

    def paths(t):
        t = direction * np.atleast_1d(t)
        c, s = np.cos(t), np.sin(t)
        out = np.empty((len(t), n, 2))
        out[..., 0] = c[:, None] * a[None, :, 0] - s[:, None] * a[None, :, 1]
        out[..., 1] = s[:, None] * a[None, :, 0] + c[:, None] * a[None, :, 1]
        return out

    return paths


def test_free_reduce():
    assert free_reduce([1, -1]) == ()
    assert free_reduce([2, 1, -1, -2, 3]) == (3,)
    assert free_reduce([1, 2, -2, 2]) == (1, 2)


def test_word_permutation():
    assert word_permutation([1], 3) == (1, 0, 2)
    assert word_permutation([1, 2], 3) == (1, 2, 0)
    assert word_permutation([1, 1], 3) == (0, 1, 2)


def test_rigid_triangle_exponent_sum_convention():
    w = braid_word_of_paths(_rigid_polygon_paths(3, +1), 2 * math.pi, 3)
    assert exponent_sum(w) == -6
    assert word_permutation(w, 3) == (0, 1, 2)
    w = braid_word_of_paths(_rigid_polygon_paths(3, -1), 2 * math.pi, 3)
    assert exponent_sum(w) == 6


def test_two_body_circling():
    """Two bodies making p relative turns produce 2p crossings of one sign."""

    def paths(t):
        t = np.atleast_1d(t)
        out = np.empty((len(t), 2, 2))
        out[:, 0, 0] = np.cos(3 * t)
        out[:, 0, 1] = np.sin(3 * t)
        out[:, 1] = -out[:, 0]
        return out

    w = braid_word_of_paths(paths, 2 * math.pi, 2)
    assert len(w) == 6
    assert exponent_sum(w) == -6


def test_static_strands_have_empty_word():
    def paths(t):
        t = np.atleast_1d(t)
        out = np.zeros((len(t), 3, 2))
        out[:, 0, 0] = -1.0
        out[:, 1, 0] = 0.0
        out[:, 2, 0] = 1.0
        return out

    assert braid_word_of_paths(paths, 1.0, 3) == ()


def test_degenerate_axis_is_retried():
    """A crossing landing exactly on a grid sample (t = 0 here) cannot be
    classified on the default axis; the rotated-axis retry must recover it."""

    def paths(t):
        t = np.atleast_1d(t)
        out = np.empty((len(t), 2, 2))
        out[:, 0, 0] = np.sin(t)   # equal x at the t = 0 sample
        out[:, 0, 1] = np.cos(t)
        out[:, 1] = -out[:, 0]
        return out

    # (sin t, cos t) rotates clockwise, so both crossings are positive
    w = braid_word_of_paths(paths, 2 * math.pi, 2)
    assert exponent_sum(w) == 2


def test_winding_numbers_of_refined_orbit():
    ms = MassSystem(alpha=1.0, m=(0.5, 0.5, 1.0, 1.0))
    st = CablingSetup.from_pq(5, 1, 1.0, case=CaseC1(), d=1)
    cfg = lagrange_polygon(3, 1.0)
    x0, params = build_ansatz(cfg, ms, st, L=16)
    sol = refine(x0, params, RefineOptions(L=16))
    pair, centers = winding_numbers(sol.loop, ms, st)
    assert pair == 5
    assert centers == (1, 1, 1, 1)


def test_braid_report_of_refined_orbit():
    ms = MassSystem(alpha=1.0, m=(0.5, 0.5, 1.0, 1.0))
    st = CablingSetup.from_pq(3, 1, 1.0, case=CaseC1(), d=1)
    cfg = lagrange_polygon(3, 1.0)
    x0, params = build_ansatz(cfg, ms, st, L=24)
    sol = refine(x0, params, RefineOptions(L=24))
    rep = braid_word(sol.loop, ms, st)
    assert rep.pair_winding == 3
    assert rep.permutation == (0, 1, 2, 3)
    # pair contributes 2p, the doubled-strand rigid braid the rest
    assert rep.exponent_sum == exponent_sum(rep.word)
    assert rep.exponent_sum < 0
    import json

    doc = json.loads(rep.to_json())
    assert doc["pair_winding"] == 3


def test_winding_requires_rational_setup():
    ms = MassSystem(alpha=1.0, m=(0.5, 0.5, 1.0, 1.0))
    st = CablingSetup.from_pq(5, 1, 1.0, case=CaseC1(), d=1)
    cfg = lagrange_polygon(3, 1.0)
    x0, _ = build_ansatz(cfg, ms, st, L=8)
    with pytest.raises(ParameterError):
        winding_numbers(x0, ms, CablingSetup.from_epsilon(0.3, 1.0))
