"""Exact-sign orientation and circumsphere predicates.

Every predicate first evaluates its determinant in floating point against a
conservative error bound; only ambiguous cases fall back to exact integer
arithmetic (IEEE doubles are dyadic rationals, so a common power-of-two
scaling turns every entry into an integer and Bareiss elimination gives the
exact sign). Circumsphere ties between cospherical points are broken by a
symbolic perturbation of the lifted heights ordered by global point index,
which makes the triangulation unique for a fixed input ordering.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

# |det_float| must exceed _filter_bound() before its sign is trusted.
# The constant is ~1e6 x machine epsilon times a Hadamard-type scale, which
# dwarfs the worst-case LU rounding error for the n <= 11 matrices seen here.
_FILTER_EPS = 1e-9


def _filter_bound(mat: np.ndarray) -> float:
    n = mat.shape[0]
    scale = 1.0
    for j in range(n):
        m = float(np.abs(mat[:, j]).max())
        if m == 0.0:
            return 0.0
        scale *= m
    return _FILTER_EPS * math.factorial(n) * scale


def _float_det_sign(mat: np.ndarray) -> int | None:
    """Sign of det(mat) if the floating-point value is trustworthy, else None."""
    bound = _filter_bound(mat)
    det = float(np.linalg.det(mat))
    if det > bound:
        return 1
    if det < -bound:
        return -1
    if bound == 0.0:
        return 0  # a whole column is exactly zero
    return None


def _bareiss_sign(m: list[list[int]]) -> int:
    """Exact sign of an integer determinant (fraction-free elimination)."""
    n = len(m)
    m = [row[:] for row in m]
    sign = 1
    prev = 1
    for k in range(n - 1):
        piv = -1
        for i in range(k, n):
            if m[i][k] != 0:
                piv = i
                break
        if piv < 0:
            return 0
        if piv != k:
            m[k], m[piv] = m[piv], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
            m[i][k] = 0
        prev = m[k][k]
    last = m[n - 1][n - 1]
    return sign * (1 if last > 0 else -1 if last < 0 else 0)


def _exact_sign(rows: list[list[Fraction]]) -> int:
    """Exact determinant sign for a matrix of Fractions."""
    denom = 1
    for row in rows:
        for f in row:
            denom = denom * f.denominator // math.gcd(denom, f.denominator)
    ints = [[int(f * denom) for f in row] for row in rows]
    return _bareiss_sign(ints)


def _frac(x: float) -> Fraction:
    return Fraction(float(x))


def orient_sign(pts: np.ndarray) -> int:
    """Orientation of d+1 points in R^d: sign of det[p_0-p_d; ...; p_{d-1}-p_d].

    Returns +1, -1, or 0 (affinely dependent). Exact for any float input.
    """
    pts = np.asarray(pts, dtype=np.float64)
    mat = pts[:-1] - pts[-1]
    s = _float_det_sign(mat)
    if s is not None:
        return s
    last = [_frac(x) for x in pts[-1]]
    rows = [[_frac(pts[i, j]) - last[j] for j in range(pts.shape[1])]
            for i in range(pts.shape[0] - 1)]
    return _exact_sign(rows)


def _lifted_sign(simplex_pts: np.ndarray, p: np.ndarray) -> int:
    """Exact sign of det[x_i - p | |x_i|^2 - |p|^2], the unperturbed test."""
    diff = simplex_pts - p
    h = np.sum(simplex_pts ** 2, axis=1) - np.sum(p ** 2)
    s = _float_det_sign(np.column_stack([diff, h]))
    if s is not None:
        return s
    pf = [_frac(x) for x in p]
    hp = sum(f * f for f in pf)
    rows = []
    for i in range(simplex_pts.shape[0]):
        vf = [_frac(x) for x in simplex_pts[i]]
        rows.append([vf[j] - pf[j] for j in range(len(pf))]
                    + [sum(f * f for f in vf) - hp])
    return _exact_sign(rows)


def _ones_col_sign(simplex_pts: np.ndarray, p: np.ndarray) -> int:
    """Sign of det[x_i - p | 1]; equals the orientation of the simplex itself."""
    diff = simplex_pts - p
    s = _float_det_sign(np.column_stack([diff, np.ones(len(simplex_pts))]))
    if s is not None:
        return s
    pf = [_frac(x) for x in p]
    rows = []
    for i in range(simplex_pts.shape[0]):
        vf = [_frac(x) for x in simplex_pts[i]]
        rows.append([vf[j] - pf[j] for j in range(len(pf))] + [Fraction(1)])
    return _exact_sign(rows)


def _height_cofactor_sign(simplex_pts: np.ndarray, p: np.ndarray, drop: int) -> int:
    """Sign of the cofactor of entry (drop, last) in the lifted matrix."""
    d = p.shape[0]
    keep = [i for i in range(simplex_pts.shape[0]) if i != drop]
    minor = orient_sign(np.vstack([simplex_pts[keep], p[None, :]]))
    if (drop + d) % 2:
        minor = -minor
    return minor


def insphere_sign(simplex_pts: np.ndarray, simplex_ids, p: np.ndarray, p_id: int) -> int:
    """Perturbed circumsphere test for a positively oriented simplex.

    Returns +1 if point `p` lies strictly inside the circum-hypersphere of the
    simplex, -1 if strictly outside. Exact cospherical ties are resolved by the
    index-ordered height perturbation, so 0 is never returned as long as `p_id`
    differs from every simplex vertex id.
    """
    simplex_pts = np.asarray(simplex_pts, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    s = _lifted_sign(simplex_pts, p)
    if s != 0:
        return s

    # Cospherical tie. Height of global point i carries a -eps^(i+1) term, so
    # the perturbed determinant is  det(M) - sum_i C_i eps^(g_i) + (sum_i C_i)
    # eps^(g_p) with C_i the height-column cofactors; the surviving term is the
    # involved point of smallest global index with a nonzero coefficient.
    events = sorted([(int(simplex_ids[k]), k) for k in range(len(simplex_ids))]
                    + [(int(p_id), -1)])
    for _, row in events:
        if row == -1:
            total = _ones_col_sign(simplex_pts, p)
            if total != 0:
                return total
        else:
            c = _height_cofactor_sign(simplex_pts, p, row)
            if c != 0:
                return -c
    raise ArithmeticError("symbolic perturbation failed to resolve circumsphere tie")


def affine_rank(pts: np.ndarray) -> int:
    """Exact affine rank of a point set (rank of differences to the first point)."""
    pts = np.asarray(pts, dtype=np.float64)
    if pts.shape[0] <= 1:
        return 0
    base = [_frac(x) for x in pts[0]]
    rows = [[_frac(pts[i, j]) - base[j] for j in range(pts.shape[1])]
            for i in range(1, pts.shape[0])]
    ncols = pts.shape[1]
    rank = 0
    col = 0
    while rows and col < ncols:
        piv = next((i for i, r in enumerate(rows) if r[col] != 0), None)
        if piv is None:
            col += 1
            continue
        rows[0], rows[piv] = rows[piv], rows[0]
        lead = rows[0]
        rows = [[r[j] - lead[j] * r[col] / lead[col] for j in range(ncols)]
                for r in rows[1:]]
        rank += 1
        col += 1
    return rank
