"""One-dimensional maximization: coarse grid bracketing plus golden-section refinement."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(
    f: Callable[[float], float], a: float, b: float, tol: float = 1e-9
) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[a, b]`` until the bracket is narrower than ``tol``.

    Returns ``(x, f(x))`` for the best point visited, endpoints included.
    """
    a, b = min(a, b), max(a, b)
    fa, fb = f(a), f(b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best = max((fa, a), (fb, b), (fc, c), (fd, d))
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
            cand = (fc, c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
            cand = (fd, d)
        if cand[0] > best[0]:
            best = cand
        if c == d:
            break
    return best[1], best[0]


def grid_golden_max(
    f: Callable[[float], float],
    a: float,
    b: float,
    n_grid: int,
    tol: float,
    vectorized: bool = False,
) -> tuple[float, float]:
    """Global-ish maximization: evaluate ``n_grid`` points, refine around the best one.

    No concavity is assumed; the grid picks the basin, golden section polishes it.
    With ``vectorized=True`` ``f`` is called once on the whole grid array.
    """
    grid = np.linspace(a, b, n_grid)
    if vectorized:
        values = np.asarray(f(grid), dtype=float)
    else:
        values = np.array([f(float(x)) for x in grid])
    values = np.where(np.isnan(values), -np.inf, values)
    j = int(np.argmax(values))
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, n_grid - 1)]
    scalar = (lambda x: float(f(np.array([x]))[0])) if vectorized else f
    x, fx = golden_section_max(scalar, float(lo), float(hi), tol)
    if values[j] > fx:
        return float(grid[j]), float(values[j])
    return x, fx
