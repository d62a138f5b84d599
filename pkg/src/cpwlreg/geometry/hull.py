"""Orthogonal projection onto the convex hull of the grid points.

Solved as min ||p - x||^2 over the hull by Frank-Wolfe with away steps: the
linear minimization oracle is a plain argmin over the vertices, so no facet
enumeration is needed, and away steps restore linear convergence so the
duality-gap target is reachable within the iteration budget (plain
Frank-Wolfe stalls at O(1/k) when the projection lands on a face).
"""

from __future__ import annotations

import numpy as np

from ..errors import ConvergenceFailure
from .delaunay import Triangulation

GAP_TOL = 1e-8
MAX_ITERS = 10_000


def project_to_hull(t: Triangulation, x: np.ndarray, gap_tol: float = GAP_TOL,
                    max_iters: int = MAX_ITERS) -> np.ndarray:
    """Nearest point to `x` in Hull(t.vertices); returns `x` itself when inside."""
    x = np.asarray(x, dtype=np.float64)
    if t.locate(x).simplex_id is not None:
        return x.copy()

    V = t.vertices
    start = int(np.argmin(np.einsum("ij,ij->i", V - x, V - x)))
    weights: dict[int, float] = {start: 1.0}
    p = V[start].copy()

    for _ in range(max_iters):
        g = p - x
        scores = V @ g
        fw = int(np.argmin(scores))
        gap = float(g @ p - scores[fw])
        if gap <= gap_tol:
            return p
        active = list(weights)
        away = active[int(np.argmax([scores[a] for a in active]))]

        d_fw = V[fw] - p
        d_aw = p - V[away]
        if -(g @ d_fw) >= -(g @ d_aw):
            d, gamma_max, mode = d_fw, 1.0, "fw"
        else:
            a = weights[away]
            d, gamma_max, mode = d_aw, a / (1.0 - a) if a < 1.0 else np.inf, "away"

        denom = float(d @ d)
        if denom <= 0.0:
            return p
        gamma = min(max(-(g @ d) / denom, 0.0), gamma_max)
        if gamma <= 0.0:
            return p

        if mode == "fw":
            for k in weights:
                weights[k] *= 1.0 - gamma
            weights[fw] = weights.get(fw, 0.0) + gamma
        else:
            for k in weights:
                weights[k] *= 1.0 + gamma
            weights[away] -= gamma
        weights = {k: w for k, w in weights.items() if w > 1e-16}
        p = p + gamma * d

    raise ConvergenceFailure(
        f"hull projection did not reach duality gap {gap_tol} in {max_iters} iterations")
