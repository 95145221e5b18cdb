"""Gauss-Legendre panel quadrature on meshes graded toward a point singularity."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.interpolate import BSpline

TWO_PI = 2.0 * np.pi


@lru_cache(maxsize=32)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def graded_breakpoints(a, b, singular_at, pad, max_panel=TWO_PI,
                       inner_ratio=0.15, outer_ratio=2.0):
    """Panel edges on [a, b] refined geometrically toward ``singular_at``.

    Inside the window of half-width ``pad`` edges shrink by ``inner_ratio``
    per level; outside it they grow by ``outer_ratio`` until the panel
    length reaches ``max_panel``, after which panels are uniform.
    """
    if not b > a:
        return np.array([a, b], dtype=float)
    edges = [a, b]
    s = singular_at
    # keeps every node well clear of the singular point in floating point
    floor = 1e-10 * max(abs(s), 1.0)
    span = (b - a) + abs(s - a) + abs(s - b)
    offsets = []
    o = pad * inner_ratio
    while o > floor:
        offsets.append(o)
        o *= inner_ratio
    o = pad
    while o < span:
        offsets.append(o)
        o *= outer_ratio
    for o in offsets:
        for p in (s - o, s + o):
            if a < p < b:
                edges.append(p)
    if a < s < b:
        edges.append(s)
    edges = np.unique(np.asarray(edges, dtype=float))
    out = [edges[:1]]
    for lo, hi in zip(edges[:-1], edges[1:]):
        n = max(1, int(np.ceil((hi - lo) / max_panel)))
        out.append(np.linspace(lo, hi, n + 1)[1:])
    return np.concatenate(out)


def panel_nodes(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an n-point rule on every panel, shape (P, n)."""
    t, w = gauss_legendre(n)
    lo = edges[:-1, None]
    half = 0.5 * (edges[1:, None] - lo)
    return lo + half * (t + 1.0), half * w


@lru_cache(maxsize=16)
def irwin_hall_cdf(passes: int) -> BSpline:
    """CDF of a sum of ``passes`` uniforms on [0, 1] (support [0, passes])."""
    return BSpline.basis_element(np.arange(passes + 1.0), extrapolate=False).antiderivative()


def taper_weights(u: np.ndarray, start: float, passes: int) -> np.ndarray:
    """Weight 1 - CDF((u - start) / 2pi).

    Integrating f·taper over [start, start + 2pi·passes] and adding the plain
    integral over [0, start] equals averaging the running integral of f over
    one oscillation period, applied ``passes`` times.
    """
    s = np.clip((u - start) / TWO_PI, 0.0, float(passes))
    cdf = irwin_hall_cdf(passes)(s)
    cdf = np.where(s >= passes, 1.0, np.nan_to_num(cdf))
    return 1.0 - cdf
