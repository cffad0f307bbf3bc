"""Topological certification: winding numbers, planar braid words and their
invariants (exponent sum, strand permutation) for reconstructed trajectories.

Conventions: strands are ordered by their first planar coordinate; a crossing
happens when two x-adjacent strands exchange that order.  Signs are fixed so
that a rigid counter-clockwise rotation of a triangle over one period has
exponent sum -6.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .model import CablingSetup, ConfigurationError, MassSystem, ParameterError
from .loops import LoopState
from .solver import reconstruct_trajectory

__all__ = [
    "BraidReport",
    "winding_numbers",
    "braid_word",
    "braid_word_of_paths",
    "free_reduce",
    "exponent_sum",
    "word_permutation",
]

TWO_PI = 2.0 * math.pi
SCHEMA_VERSION = 1


@dataclass
class BraidReport:
    pair_winding: int
    center_windings: Tuple[Optional[int], ...]
    word: Tuple[int, ...]            # +-(i+1) encodes the i-th generator
    exponent_sum: int
    permutation: Tuple[int, ...]

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(
            {
                "schema": SCHEMA_VERSION,
                "pair_winding": self.pair_winding,
                "center_windings": list(self.center_windings),
                "word": list(self.word),
                "exponent_sum": self.exponent_sum,
                "permutation": list(self.permutation),
            },
            indent=indent,
            sort_keys=True,
        )


# ---------------------------------------------------------------------------
# winding numbers


def _winding_of_path(xy: np.ndarray, tol: float = 1e-6) -> int:
    """Integer winding of a closed planar path around the origin."""
    r = np.linalg.norm(xy, axis=1)
    if np.min(r) < 1e-9:
        raise ParameterError("path passes through the origin; winding undefined")
    ang = np.unwrap(np.arctan2(xy[:, 1], xy[:, 0]))
    turns = (ang[-1] - ang[0]) / TWO_PI
    k = round(turns)
    if abs(turns - k) > tol:
        raise ParameterError(f"winding {turns} is not close to an integer")
    return int(k)


def winding_numbers(
    loop: LoopState,
    ms: MassSystem,
    setup: CablingSetup,
    samples: int = 8192,
    min_radius: float = 1e-3,
):
    """(pair winding, per-body windings around the mass center).

    The pair winding counts turns of q1 - q0 about the moving pair center.
    A body whose path comes within ``min_radius`` of the center gets None
    (its winding about the center is not well defined).
    """
    if setup.pq is None:
        raise ParameterError("winding certification needs a rational frequency ratio")
    T = setup.period
    t = T * np.arange(samples + 1) / samples
    pos, _ = reconstruct_trajectory(loop, ms, setup, t)
    rel = pos[:, 1, :2] - pos[:, 0, :2]
    pair = _winding_of_path(rel)
    centers: List[Optional[int]] = []
    for k in range(pos.shape[1]):
        xy = pos[:, k, :2]
        if np.min(np.linalg.norm(xy, axis=1)) < min_radius:
            centers.append(None)
        else:
            centers.append(_winding_of_path(xy))
    return pair, tuple(centers)


# ---------------------------------------------------------------------------
# braid words


def free_reduce(word: Sequence[int]) -> Tuple[int, ...]:
    """Cancel adjacent inverse generator pairs until stable."""
    out: List[int] = []
    for g in word:
        if out and out[-1] == -g:
            out.pop()
        else:
            out.append(g)
    return tuple(out)


def exponent_sum(word: Sequence[int]) -> int:
    return int(sum(1 if g > 0 else -1 for g in word))


def word_permutation(word: Sequence[int], n_strands: int) -> Tuple[int, ...]:
    """Permutation taking the start slot of each strand to its end slot."""
    perm = list(range(n_strands))
    for g in word:
        i = abs(g) - 1
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
    return tuple(perm)


def braid_word_of_paths(
    paths: Callable[[np.ndarray], np.ndarray],
    period: float,
    n_strands: int,
    grid: int = 4096,
    t_tol: float = 1e-10,
    axis_angle: float = 0.0,
    max_retries: int = 8,
) -> Tuple[int, ...]:
    """Braid word of closed planar paths t -> (n_strands, 2).

    Crossing times are located by sign changes of the projected coordinate
    difference on a uniform grid and sharpened by bisection.  Degenerate
    projections (triple coincidences, grazing contacts) trigger a small
    rotation of the projection axis and a retry.
    """
    for attempt in range(max_retries):
        ang = axis_angle + attempt * 0.07721
        c, s = math.cos(ang), math.sin(ang)

        def proj(t):
            p = paths(np.atleast_1d(np.asarray(t, dtype=float)))
            x = c * p[..., 0] + s * p[..., 1]
            y = -s * p[..., 0] + c * p[..., 1]
            return x, y

        try:
            return _braid_word_once(proj, period, n_strands, grid, t_tol)
        except _DegenerateProjection:
            continue
    raise ConfigurationError(
        "no generic projection axis found for the braid word"
    )


class _DegenerateProjection(Exception):
    pass


def _braid_word_once(proj, period, n_strands, grid, t_tol):
    t = period * np.arange(grid + 1) / grid
    x, y = proj(t)
    crossings = []  # (time, a, b)
    for a in range(n_strands):
        for b in range(a + 1, n_strands):
            dx = x[:, a] - x[:, b]
            # a grid sample exactly on a crossing (or strands sharing the
            # projected coordinate) cannot be classified; rotate the axis
            if np.min(np.abs(dx)) < 1e-13:
                raise _DegenerateProjection
            flips = np.nonzero(np.sign(dx[:-1]) * np.sign(dx[1:]) < 0)[0]
            for i in flips:
                f = lambda tt: float(
                    proj(tt)[0][0, a] - proj(tt)[0][0, b]
                )
                tc = brentq(f, t[i], t[i + 1], xtol=t_tol)
                crossings.append((tc, a, b))
    crossings.sort()
    word = []
    for tc, a, b in crossings:
        xe, ye = proj(tc)
        xe, ye = xe[0], ye[0]
        order = np.argsort(xe, kind="stable")
        pos = {int(body): idx for idx, body in enumerate(order)}
        if abs(pos[a] - pos[b]) != 1:
            raise _DegenerateProjection
        i = min(pos[a], pos[b])
        # slope of the projected difference at the crossing and the vertical gap
        h = t_tol * 100.0
        xp, _ = proj(tc + h)
        xm, _ = proj(tc - h)
        dxdot = ((xp[0, a] - xp[0, b]) - (xm[0, a] - xm[0, b])) / (2 * h)
        dy = ye[a] - ye[b]
        sgn = math.copysign(1.0, dxdot * dy)
        if abs(dy) < 1e-10 or abs(dxdot) < 1e-12:
            raise _DegenerateProjection
        word.append(int(sgn) * (i + 1))
    return free_reduce(word)


def braid_word(
    loop: LoopState,
    ms: MassSystem,
    setup: CablingSetup,
    grid: int = 4096,
    t_tol: float = 1e-10,
) -> BraidReport:
    """Full topological report of a reconstructed trajectory."""
    if setup.pq is None:
        raise ParameterError("braid certification needs a rational frequency ratio")
    T = setup.period
    Nb = loop.N

    def paths(t):
        pos, _ = reconstruct_trajectory(loop, ms, setup, t)
        return pos[:, :, :2]

    word = braid_word_of_paths(paths, T, Nb, grid=grid, t_tol=t_tol)
    pair, centers = winding_numbers(loop, ms, setup)
    return BraidReport(
        pair_winding=pair,
        center_windings=centers,
        word=word,
        exponent_sum=exponent_sum(word),
        permutation=word_permutation(word, Nb),
    )
