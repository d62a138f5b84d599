"""Sparse forward and regularization operators on a triangulation.

The forward operator H scatters barycentric weights of the data points, so
H @ c evaluates the piecewise-linear interpolant. The regularization operator
L has one row per neighboring-simplex pair: volume of the shared facet times
the normal component of the gradient jump, expressed as a linear map of the
grid values, so that ||L @ c||_1 is the second-order total variation of the
interpolant. Both are scipy CSR matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (DegenerateInput, DimensionMismatch, IllConditioned,
                     NegativeDiscriminant, PointOutsideHull)
from .geometry.delaunay import Triangulation

COND_LIMIT = 1e12
VOL_SQ_TOL = 1e-12


@dataclass
class NeighborPairGeometry:
    """Per-pair quantities entering one row of the regularization operator."""

    pair: tuple[int, int]
    shared_vertex_ids: np.ndarray      # d ids, ascending
    apex_a: int
    apex_b: int
    unit_normal: np.ndarray            # (d,)
    intersection_volume: float
    columns: np.ndarray                # (d+2,) = [apex_a, shared..., apex_b]
    gradient_map: np.ndarray           # (d, d+2): (a_A - a_B) = map @ c[columns]
    reg_row: np.ndarray                # (d+2,) = vol * normal @ gradient_map


def _pair_indices(t: Triangulation, pair) -> tuple[np.ndarray, int, int]:
    a, b = int(pair[0]), int(pair[1])
    row_a, row_b = t.simplices[a], t.simplices[b]
    shared = np.intersect1d(row_a, row_b)
    if shared.size != t.dimension:
        raise DegenerateInput(f"simplices {a} and {b} are not facet neighbors")
    apex_a = int(np.setdiff1d(row_a, shared)[0])
    apex_b = int(np.setdiff1d(row_b, shared)[0])
    return shared, apex_a, apex_b


def _checked_inv(M: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditioned(f"{what} has condition estimate {cond:.3g}")
    return np.linalg.inv(M)


def gradient_difference(t: Triangulation, pair) -> tuple[np.ndarray, np.ndarray]:
    """Map from grid values to the gradient jump across a shared facet.

    Returns (columns, mat) with mat of shape (d, d+2) such that
    a_A - a_B = mat @ c[columns]; columns are [apex_A, shared ascending, apex_B]
    where A is the pair's smaller simplex id.
    """
    shared, apex_a, apex_b = _pair_indices(t, pair)
    V = t.vertices
    d = t.dimension
    G_a = _checked_inv(V[apex_a][None, :] - V[shared], f"gradient matrix of pair {pair}")
    G_b = _checked_inv(V[apex_b][None, :] - V[shared], f"gradient matrix of pair {pair}")
    ones = np.ones(d)
    mat = np.concatenate(
        [(G_a @ ones)[:, None], G_b - G_a, -(G_b @ ones)[:, None]], axis=1)
    cols = np.concatenate([[apex_a], shared, [apex_b]]).astype(np.int64)
    return cols, mat


def facet_normal(t: Triangulation, pair) -> np.ndarray:
    """Unit normal of the shared facet, from the inverse homogeneous matrix."""
    shared, apex_a, _ = _pair_indices(t, pair)
    V = t.vertices
    pts = np.vstack([V[apex_a][None, :], V[shared]])
    N = _checked_inv(np.column_stack([pts, np.ones(len(pts))]),
                     f"normal system of pair {pair}")
    z = N[: t.dimension, 0]
    nrm = float(np.linalg.norm(z))
    if nrm == 0.0 or not np.isfinite(nrm):
        raise IllConditioned(f"degenerate facet normal for pair {pair}")
    return z / nrm


def _cayley_menger_gamma(d: int) -> float:
    return (-1) ** d / (math.factorial(d - 1) ** 2 * 2 ** (d - 1))


def facet_volume(t: Triangulation, pair) -> float:
    """(d-1)-volume of the shared facet via the Cayley-Menger determinant."""
    shared, _, _ = _pair_indices(t, pair)
    pts = t.vertices[shared]
    d = t.dimension
    diff = pts[:, None, :] - pts[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    B = np.ones((d + 1, d + 1))
    B[:d, :d] = sq
    B[d, d] = 0.0
    vol2 = _cayley_menger_gamma(d) * float(np.linalg.det(B))
    if vol2 < -VOL_SQ_TOL:
        raise NegativeDiscriminant(
            f"squared facet volume {vol2:.3g} below tolerance for pair {pair}")
    return math.sqrt(max(vol2, 0.0))


def neighbor_pair_geometry(t: Triangulation, pair) -> NeighborPairGeometry:
    """All per-pair quantities for one row of the regularization operator."""
    shared, apex_a, apex_b = _pair_indices(t, pair)
    cols, mat = gradient_difference(t, pair)
    u = facet_normal(t, pair)
    vol = facet_volume(t, pair)
    return NeighborPairGeometry(
        pair=(int(pair[0]), int(pair[1])),
        shared_vertex_ids=shared,
        apex_a=apex_a,
        apex_b=apex_b,
        unit_normal=u,
        intersection_volume=vol,
        columns=cols,
        gradient_map=mat,
        reg_row=vol * (u @ mat),
    )


def build_regularization(t: Triangulation) -> sp.csr_matrix:
    """Assemble L with one row per neighbor pair, in lexicographic pair order."""
    d = t.dimension
    n = t.n_vertices
    pairs = t.neighbor_pairs
    P = len(pairs)
    if P == 0:
        return sp.csr_matrix((0, n))
    A = np.array([p[0] for p in pairs], dtype=np.int64)
    B = np.array([p[1] for p in pairs], dtype=np.int64)
    sim_a, sim_b = t.simplices[A], t.simplices[B]

    mask_a = (sim_a[:, :, None] == sim_b[:, None, :]).any(axis=2)
    if not np.all(mask_a.sum(axis=1) == d):
        raise DegenerateInput("neighbor pair without a full shared facet")
    shared = sim_a[mask_a].reshape(P, d)             # ascending: rows are sorted
    apex_a = sim_a[~mask_a]
    mask_b = (sim_b[:, :, None] == sim_a[:, None, :]).any(axis=2)
    apex_b = sim_b[~mask_b]

    V = t.vertices
    M_a = V[apex_a][:, None, :] - V[shared]          # (P, d, d)
    M_b = V[apex_b][:, None, :] - V[shared]
    G_a = _batch_checked_inv(M_a, "gradient matrices")
    G_b = _batch_checked_inv(M_b, "gradient matrices")

    hom = np.concatenate(
        [np.concatenate([V[apex_a][:, None, :], V[shared]], axis=1),
         np.ones((P, d + 1, 1))], axis=2)            # (P, d+1, d+1)
    N = _batch_checked_inv(hom, "normal systems")
    z = N[:, :d, 0]
    nrm = np.linalg.norm(z, axis=1)
    if np.any(nrm == 0.0) or not np.all(np.isfinite(nrm)):
        raise IllConditioned("degenerate facet normal in batch assembly")
    u = z / nrm[:, None]

    pts = V[shared]                                   # (P, d, dim)
    diff = pts[:, :, None, :] - pts[:, None, :, :]
    sq = np.einsum("pijk,pijk->pij", diff, diff)
    Bm = np.ones((P, d + 1, d + 1))
    Bm[:, :d, :d] = sq
    Bm[:, d, d] = 0.0
    vol2 = _cayley_menger_gamma(d) * np.linalg.det(Bm)
    if np.any(vol2 < -VOL_SQ_TOL):
        raise NegativeDiscriminant("squared facet volume below tolerance in batch")
    vols = np.sqrt(np.clip(vol2, 0.0, None))

    ones = np.ones(d)
    G_ab = np.concatenate(
        [(G_a @ ones)[:, :, None], G_b - G_a, -(G_b @ ones)[:, :, None]], axis=2)
    vals = vols[:, None] * np.einsum("pi,pij->pj", u, G_ab)      # (P, d+2)
    cols = np.concatenate([apex_a[:, None], shared, apex_b[:, None]], axis=1)
    rows = np.repeat(np.arange(P, dtype=np.int64), d + 2)
    L = sp.coo_matrix((vals.ravel(), (rows, cols.ravel())), shape=(P, n))
    return L.tocsr()


def _batch_checked_inv(M: np.ndarray, what: str) -> np.ndarray:
    try:
        inv = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned(f"singular matrix among {what}") from exc
    # 1-norm condition estimate, cheap enough for every pair
    cond = (np.abs(M).sum(axis=1).max(axis=1) * np.abs(inv).sum(axis=1).max(axis=1))
    if not np.all(np.isfinite(cond)) or cond.max() > COND_LIMIT:
        raise IllConditioned(f"condition estimate {cond.max():.3g} among {what}")
    return inv


def build_forward(t: Triangulation, data_points: np.ndarray,
                  outside_tol: float = 1e-8) -> sp.csr_matrix:
    """Rows of barycentric weights: (H @ c)[m] evaluates the interpolant at x_m.

    Every data point must lie inside the hull; points outside by more than
    `outside_tol` (relative to the hull diameter) raise PointOutsideHull.
    """
    from .geometry.hull import project_to_hull

    X = np.asarray(data_points, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != t.dimension:
        raise DimensionMismatch(
            f"data points have shape {X.shape}, triangulation dimension {t.dimension}")
    span = t.vertices.max(axis=0) - t.vertices.min(axis=0)
    scale = float(np.linalg.norm(span)) or 1.0

    rows, cols, vals = [], [], []
    hint = None
    for m, x in enumerate(X):
        loc = t.locate(x, hint=hint)
        if loc.simplex_id is None:
            p = project_to_hull(t, x)
            dist = float(np.linalg.norm(p - x))
            if dist > outside_tol * scale:
                raise PointOutsideHull(
                    f"data point {m} lies {dist:.3g} outside the hull")
            loc = t.locate(p, tol=1e-6, hint=hint)
            if loc.simplex_id is None:
                raise PointOutsideHull(f"data point {m} could not be snapped to hull")
            w = np.clip(loc.weights, 0.0, None)
            w = w / w.sum()
        else:
            w = loc.weights
        hint = loc.simplex_id
        verts = t.simplices[loc.simplex_id]
        k = int(np.argmax(w))
        if w[k] >= 1.0 - 1e-9 and np.array_equal(x, t.vertices[verts[k]]):
            rows.append(m)
            cols.append(int(verts[k]))
            vals.append(1.0)
        else:
            rows.extend([m] * len(verts))
            cols.extend(int(v) for v in verts)
            vals.extend(float(v) for v in w)
    H = sp.coo_matrix((vals, (rows, cols)), shape=(X.shape[0], t.n_vertices))
    return H.tocsr()


def htv(L: sp.spmatrix, c: np.ndarray) -> float:
    """Second-order total variation of the interpolant: ||L @ c||_1."""
    c = np.asarray(c, dtype=np.float64)
    if L.shape[1] != c.shape[0]:
        raise DimensionMismatch(f"operator has {L.shape[1]} columns, c has {c.shape[0]}")
    if L.shape[0] == 0:
        return 0.0
    return float(np.abs(L @ c).sum())


def save_triplets(path, M: sp.spmatrix) -> None:
    """Write a sparse matrix as text triplets: header 'rows cols nnz', then rows."""
    coo = M.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")


def load_triplets(path) -> sp.csr_matrix:
    """Read the text-triplet format written by save_triplets."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        n_rows, n_cols, nnz = (int(x) for x in header)
        rows, cols, vals = [], [], []
        for line in fh:
            i, j, v = line.split()
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
    if len(vals) != nnz:
        raise DegenerateInput(f"triplet file has {len(vals)} entries, header says {nnz}")
    return sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
