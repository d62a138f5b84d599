"""Self-contained incremental Delaunay triangulation in R^d.

Bowyer-Watson insertion with the exact predicates of :mod:`.predicates`.
The boundary of the growing hull is closed off by ghost simplices over a
virtual vertex at infinity (id -1), so every facet always has exactly two
incident cells and points outside the current hull need no special casing.
Cospherical ties are resolved by the index-ordered symbolic perturbation,
which makes the output unique for a fixed input ordering regardless of
insertion order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateInput, DimensionTooHigh
from . import predicates as pred

INF = -1

DEFAULT_DIM_CAP = 9
# a simplex is rejected when its d-volume drops below this times diag^d
VOLUME_REL_TOL = 1e-12
LOCATE_TOL = 1e-9


@dataclass
class BarycentricLocation:
    """Result of point location: containing simplex id (or None) and weights."""

    simplex_id: int | None
    weights: np.ndarray


class Triangulation:
    """Immutable simplicial complex with Delaunay structure.

    Attributes
    ----------
    vertices : (N, d) float array of grid-point coordinates.
    simplices : (S, d+1) int array; each row ascending vertex ids.
    neighbors : (S, d+1) int array; ``neighbors[s, k]`` is the simplex across
        the facet opposite vertex ``simplices[s, k]``, or -1 on the hull.
    neighbor_pairs : sorted list of (a, b) simplex-id pairs sharing a facet.
    dimension : ambient dimension d.
    """

    def __init__(self, vertices: np.ndarray, simplices: np.ndarray,
                 check_volumes: bool = True):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        simplices = np.ascontiguousarray(simplices, dtype=np.int64)
        if vertices.ndim != 2:
            raise DegenerateInput("vertex array must be 2-D")
        self.vertices = vertices
        self.dimension = vertices.shape[1]
        rows = np.sort(simplices, axis=1)
        order = np.lexsort(rows.T[::-1])
        self.simplices = rows[order]
        self.n_vertices = vertices.shape[0]
        self.n_simplices = self.simplices.shape[0]
        self._build_adjacency()
        self._build_barycentric(check_volumes)

    # -- construction helpers -------------------------------------------------

    def _build_adjacency(self) -> None:
        d = self.dimension
        facets: dict[tuple, list[tuple[int, int]]] = {}
        for s in range(self.n_simplices):
            row = self.simplices[s]
            for k in range(d + 1):
                key = tuple(np.delete(row, k))
                facets.setdefault(key, []).append((s, k))
        nbr = np.full((self.n_simplices, d + 1), -1, dtype=np.int64)
        pairs = set()
        for key, inc in facets.items():
            if len(inc) > 2:
                raise DegenerateInput(f"facet {key} shared by {len(inc)} simplices")
            if len(inc) == 2:
                (s, k), (t, m) = inc
                nbr[s, k] = t
                nbr[t, m] = s
                pairs.add((min(s, t), max(s, t)))
        self.neighbors = nbr
        self.neighbor_pairs = sorted(pairs)

    def _build_barycentric(self, check_volumes: bool) -> None:
        d = self.dimension
        pts = self.vertices[self.simplices]          # (S, d+1, d)
        edges = pts[:, :-1, :] - pts[:, -1:, :]
        dets = np.linalg.det(edges)
        vols = np.abs(dets) / math.factorial(d)
        self.volumes = vols
        if check_volumes:
            span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
            diag = float(np.linalg.norm(span))
            if np.any(vols < VOLUME_REL_TOL * diag ** d):
                raise DegenerateInput("near-degenerate simplex below volume tolerance")
        # A @ w = [x; 1] with columns [tau_k; 1]; weights are Ainv @ [x; 1]
        A = np.concatenate(
            [pts.transpose(0, 2, 1), np.ones((self.n_simplices, 1, d + 1))], axis=1)
        try:
            self._bary_inv = np.linalg.inv(A)
        except np.linalg.LinAlgError as exc:
            raise DegenerateInput("degenerate simplex in triangulation") from exc

    # -- queries ---------------------------------------------------------------

    def barycentric(self, s: int, x: np.ndarray) -> np.ndarray:
        """Barycentric weights of `x` with respect to simplex `s`."""
        xh = np.append(np.asarray(x, dtype=np.float64), 1.0)
        return self._bary_inv[s] @ xh

    def locate(self, x: np.ndarray, tol: float = LOCATE_TOL,
               hint: int | None = None) -> BarycentricLocation:
        """Find the simplex containing `x`, or simplex_id=None outside the hull.

        Weights >= -tol count as inside; a point on a shared face is assigned
        to the containing simplex with the smallest id.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise DegenerateInput(
                f"point has shape {x.shape}, expected ({self.dimension},)")
        s = hint if hint is not None and 0 <= hint < self.n_simplices else 0
        xh = np.append(x, 1.0)
        visited = set()
        while True:
            if s in visited:
                return self._locate_scan(xh, tol)
            visited.add(s)
            w = self._bary_inv[s] @ xh
            m = int(np.argmin(w))
            if w[m] >= -tol:
                return self._resolve_ties(s, w, xh, tol)
            nxt = self.neighbors[s, m]
            if nxt < 0:
                return BarycentricLocation(None, w)
            s = int(nxt)

    def _locate_scan(self, xh: np.ndarray, tol: float) -> BarycentricLocation:
        # cycle fallback: test every simplex at once
        W = self._bary_inv @ xh
        inside = np.where(W.min(axis=1) >= -tol)[0]
        if inside.size == 0:
            return BarycentricLocation(None, W[0])
        s = int(inside[0])
        return BarycentricLocation(s, W[s])

    def _resolve_ties(self, s: int, w: np.ndarray, xh: np.ndarray,
                      tol: float) -> BarycentricLocation:
        if np.all(np.abs(w) > tol):
            return BarycentricLocation(s, w)
        best, best_w = s, w
        seen = {s}
        stack = [(s, w)]
        while stack:
            cur, cw = stack.pop()
            for k in np.where(np.abs(cw) <= tol)[0]:
                t = self.neighbors[cur, k]
                if t < 0 or t in seen:
                    continue
                seen.add(int(t))
                tw = self._bary_inv[t] @ xh
                if tw.min() >= -tol:
                    stack.append((int(t), tw))
                    if t < best:
                        best, best_w = int(t), tw
        return BarycentricLocation(best, best_w)

    def simplex_gradient_matrix(self, s: int, apex: int,
                                cond_limit: float = 1e12) -> np.ndarray:
        """Inverse of the matrix with rows (tau_apex - tau_j)^T.

        The other d vertices are taken in ascending id order. Raises
        IllConditioned when the difference matrix is numerically singular.
        """
        from ..errors import IllConditioned

        row = self.simplices[s]
        if apex not in row:
            raise DegenerateInput(f"vertex {apex} not in simplex {s}")
        others = np.sort(row[row != apex])
        M = self.vertices[apex][None, :] - self.vertices[others]
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > cond_limit:
            raise IllConditioned(f"gradient matrix of simplex {s} has cond~{cond:.3g}")
        return np.linalg.inv(M)

    def hull_facets(self) -> list[np.ndarray]:
        """Vertex-id tuples of the facets on the convex-hull boundary."""
        out = []
        for s in range(self.n_simplices):
            for k in range(self.dimension + 1):
                if self.neighbors[s, k] < 0:
                    out.append(np.delete(self.simplices[s], k))
        return out


# --- Bowyer-Watson construction ------------------------------------------------


class _Builder:
    """Mutable state of the incremental insertion."""

    def __init__(self, pts: np.ndarray):
        self.pts = pts
        self.d = pts.shape[1]
        self.verts: list[np.ndarray] = []   # (d+1) ids, INF last for ghosts
        self.nbrs: list[np.ndarray] = []
        self.alive: list[bool] = []
        self.hint = 0
        self.inner_ref: np.ndarray | None = None

    # vertex coordinate lookup allowing no INF entries
    def _coords(self, ids) -> np.ndarray:
        return self.pts[np.asarray(ids, dtype=np.int64)]

    def _is_ghost(self, s: int) -> bool:
        return self.verts[s][-1] == INF

    def _new_simplex(self, vs: np.ndarray) -> int:
        self.verts.append(vs)
        self.nbrs.append(np.full(self.d + 1, -2, dtype=np.int64))
        self.alive.append(True)
        return len(self.verts) - 1

    # -- predicates on cells ---------------------------------------------------

    def _orient_with(self, vs: np.ndarray, pos: int, p: np.ndarray) -> int:
        ids = vs.copy()
        pts = self._coords(ids).astype(np.float64)
        pts[pos] = p
        return pred.orient_sign(pts)

    def _is_bad(self, s: int, p: np.ndarray, p_id: int) -> bool:
        vs = self.verts[s]
        if vs[-1] == INF:
            facet = vs[:-1]
            o = pred.orient_sign(np.vstack([self._coords(facet), p[None, :]]))
            if o != 0:
                return o > 0
            # p on the hull facet's hyperplane: decide by the circumball of the
            # facet within that hyperplane, realized through any helper apex
            inner = int(self.nbrs[s][self.d])
            apex = next(v for v in self.verts[inner] if v not in set(facet.tolist()))
            helper_ids = np.append(facet, apex)
            helper_pts = self._coords(helper_ids)
            ins = pred.insphere_sign(helper_pts, helper_ids, p, p_id)
            orient = pred.orient_sign(helper_pts)
            return ins * orient > 0
        return pred.insphere_sign(self._coords(vs), vs, p, p_id) > 0

    # -- bootstrap --------------------------------------------------------------

    def bootstrap(self, init: list[int]) -> None:
        d = self.d
        vs = np.array(init, dtype=np.int64)
        if pred.orient_sign(self._coords(vs)) < 0:
            vs[[0, 1]] = vs[[1, 0]]
        first = self._new_simplex(vs)
        self.inner_ref = self._coords(vs).mean(axis=0)
        ghosts = []
        for k in range(d + 1):
            facet = np.delete(vs, k)
            gv = np.append(self._orient_ghost_facet(facet), INF)
            ghosts.append(self._new_simplex(gv))
        self._wire([first] + ghosts, {})
        self.hint = first

    def _orient_ghost_facet(self, facet: np.ndarray) -> np.ndarray:
        # order the facet so that the hull interior is on its negative side
        facet = facet.copy()
        pts = np.vstack([self._coords(facet), self.inner_ref[None, :]])
        o = pred.orient_sign(pts)
        if o == 0:
            raise DegenerateInput("interior reference point on a hull facet plane")
        if o > 0 and len(facet) > 1:
            facet[[0, 1]] = facet[[1, 0]]
        return facet

    # -- insertion ---------------------------------------------------------------

    def walk(self, p: np.ndarray) -> int:
        s = self.hint
        if not self.alive[s] or self._is_ghost(s):
            s = next(i for i in range(len(self.verts))
                     if self.alive[i] and not self._is_ghost(i))
        visited = set()
        while True:
            if s in visited:
                return self._walk_scan(p)
            visited.add(s)
            vs = self.verts[s]
            moved = False
            for f in range(self.d + 1):
                if self._orient_with(vs, f, p) < 0:
                    t = int(self.nbrs[s][f])
                    if self._is_ghost(t):
                        return t
                    s = t
                    moved = True
                    break
            if not moved:
                return s

    def _walk_scan(self, p: np.ndarray) -> int:
        for s in range(len(self.verts)):
            if not self.alive[s] or self._is_ghost(s):
                continue
            vs = self.verts[s]
            if all(self._orient_with(vs, f, p) >= 0 for f in range(self.d + 1)):
                return s
        for s in range(len(self.verts)):
            if self.alive[s] and self._is_ghost(s):
                facet = self.verts[s][:-1]
                o = pred.orient_sign(np.vstack([self._coords(facet), p[None, :]]))
                if o >= 0:
                    return s
        raise DegenerateInput("point location failed")

    def insert(self, p_id: int) -> None:
        p = self.pts[p_id]
        seed = self._find_bad_seed(self.walk(p), p, p_id)
        bad = {seed}
        stack = [seed]
        while stack:
            s = stack.pop()
            for t in self.nbrs[s]:
                t = int(t)
                if t not in bad and self._is_bad(t, p, p_id):
                    bad.add(t)
                    stack.append(t)
        # cavity boundary: facets between a bad cell and a surviving one
        external: dict[tuple, tuple[int, int]] = {}
        created: list[int] = []
        for s in bad:
            vs = self.verts[s]
            for f in range(self.d + 1):
                t = int(self.nbrs[s][f])
                if t in bad:
                    continue
                facet = np.delete(vs, f)
                key = tuple(sorted(facet.tolist()))
                slot = next(k for k in range(self.d + 1)
                            if self.verts[t][k] not in set(facet.tolist()))
                external[key] = (t, slot)
                nv = vs.copy()
                nv[f] = p_id
                if nv[-1] == INF:
                    reals = self._orient_ghost_facet(nv[:-1])
                    nv = np.append(reals, INF)
                else:
                    o = pred.orient_sign(self._coords(nv))
                    if o == 0:
                        raise DegenerateInput("flat simplex produced by insertion")
                    if o < 0:
                        nv[[0, 1]] = nv[[1, 0]]
                created.append(self._new_simplex(nv))
        for s in bad:
            self.alive[s] = False
        self._wire(created, external)
        for s in created:
            if not self._is_ghost(s):
                self.hint = s
                break

    def _find_bad_seed(self, s: int, p: np.ndarray, p_id: int) -> int:
        if self._is_bad(s, p, p_id):
            return s
        # rare tie case: breadth-first over nearby cells, then full scan
        seen = {s}
        queue = [s]
        budget = 64
        while queue and budget > 0:
            cur = queue.pop(0)
            for t in self.nbrs[cur]:
                t = int(t)
                if t < 0 or t in seen or not self.alive[t]:
                    continue
                seen.add(t)
                budget -= 1
                if self._is_bad(t, p, p_id):
                    return t
                queue.append(t)
        for t in range(len(self.verts)):
            if self.alive[t] and t not in seen and self._is_bad(t, p, p_id):
                return t
        raise DegenerateInput(f"insertion of point {p_id} found no conflicting cell"
                              " (duplicate point?)")

    def _wire(self, created: list[int], external: dict[tuple, tuple[int, int]]) -> None:
        half: dict[tuple, tuple[int, int]] = {}
        for s in created:
            vs = self.verts[s]
            for k in range(self.d + 1):
                key = tuple(sorted(np.delete(vs, k).tolist()))
                if key in external:
                    t, slot = external.pop(key)
                    self.nbrs[s][k] = t
                    self.nbrs[t][slot] = s
                elif key in half:
                    t, m = half.pop(key)
                    self.nbrs[s][k] = t
                    self.nbrs[t][m] = s
                else:
                    half[key] = (s, k)
        if half or external:
            raise DegenerateInput("inconsistent cavity boundary during insertion")

    def real_simplices(self) -> np.ndarray:
        rows = [v for v, a in zip(self.verts, self.alive) if a and v[-1] != INF]
        return np.array(rows, dtype=np.int64)


def _initial_independent(pts: np.ndarray) -> list[int]:
    d = pts.shape[1]
    chosen = [0]
    rank = 0
    for i in range(1, pts.shape[0]):
        cand = chosen + [i]
        r = pred.affine_rank(pts[cand])
        if r > rank:
            chosen = cand
            rank = r
        if rank == d:
            return chosen
    raise DegenerateInput("points are affinely dependent (no full-dimensional simplex)")


def delaunay(points: np.ndarray, dim_cap: int = DEFAULT_DIM_CAP,
             max_retries: int = 3) -> Triangulation:
    """Delaunay triangulation of a point set in R^d.

    Deterministic for a fixed input ordering: cospherical configurations are
    resolved by a symbolic perturbation indexed by input position. A point set
    whose triangulation contains a simplex below the volume tolerance is
    retried with a deterministic index-seeded jitter (and the jittered
    coordinates become the triangulation's vertices).
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise DegenerateInput("points must be a 2-D array")
    n, d = pts.shape
    if d > dim_cap:
        raise DimensionTooHigh(f"dimension {d} exceeds cap {dim_cap}")
    if d < 1:
        raise DegenerateInput("dimension must be at least 1")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInput("non-finite coordinates")
    if n < d + 1:
        raise DegenerateInput(f"need at least {d + 1} points in dimension {d}")
    if np.unique(pts, axis=0).shape[0] != n:
        raise DegenerateInput("duplicate points (deduplicate before triangulating)")

    if d == 1:
        order = np.argsort(pts[:, 0], kind="stable")
        segs = np.column_stack([order[:-1], order[1:]])
        return Triangulation(pts, segs)

    span = pts.max(axis=0) - pts.min(axis=0)
    diag = float(np.linalg.norm(span)) or 1.0
    work = pts
    last_err: Exception | None = None
    for attempt in range(max_retries + 1):
        try:
            builder = _Builder(work)
            init = _initial_independent(work)
            builder.bootstrap(init)
            used = set(init)
            for i in range(n):
                if i not in used:
                    builder.insert(i)
            return Triangulation(work, builder.real_simplices())
        except DegenerateInput as err:
            last_err = err
            rng = np.random.default_rng(987654321 + attempt)
            scale = 1e-9 * diag * 10.0 ** attempt
            work = pts + rng.uniform(-scale, scale, size=pts.shape)
    raise DegenerateInput(f"triangulation failed after jitter retries: {last_err}")
