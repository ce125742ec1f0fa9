"""Halfspaces, convex polytopes and the small optimization problems on them.

Everything here is sized for d in {2, 3} and a few dozen faces: the solvers
are dense and exact (simplex / active set / Wolfe), not general purpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

FEAS_TOL = 1e-9


class DegenerateNormalError(ValueError):
    pass


class InfeasiblePolytopeError(ValueError):
    pass


class DegeneratePolytopeError(ValueError):
    pass


class PointInsidePolytopeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """Closed halfspace ``{p : a @ p <= b}``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", float(self.b))

    @property
    def normalized(self) -> bool:
        return abs(np.linalg.norm(self.a) - 1.0) <= 1e-12

    def signed_distance(self, p) -> float:
        return float(self.a @ p - self.b) / float(np.linalg.norm(self.a))

    def flipped(self) -> "Hyperplane":
        return Hyperplane(-self.a, -self.b)


def normalize(h: Hyperplane) -> Hyperplane:
    n = float(np.linalg.norm(h.a))
    if n <= 1e-12:
        raise DegenerateNormalError(f"hyperplane normal too small: {n:.3e}")
    return Hyperplane(h.a / n, h.b / n)


@dataclass(frozen=True, eq=False)
class HPolytope:
    """Intersection of halfspaces ``A @ p <= b``; rows are unit normals."""

    A: np.ndarray
    b: np.ndarray
    owner: object = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError("face count mismatch between A and b")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_faces(cls, faces, owner=None, dim: Optional[int] = None) -> "HPolytope":
        faces = [normalize(h) for h in faces]
        if not faces:
            if dim is None:
                raise ValueError("dimension required for a face-less polytope")
            return cls(np.zeros((0, dim)), np.zeros(0), owner)
        return cls(np.array([h.a for h in faces]), np.array([h.b for h in faces]), owner)

    @classmethod
    def box(cls, lo, hi, owner="workspace") -> "HPolytope":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        d = lo.shape[0]
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]), owner)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def faces(self) -> list:
        return [Hyperplane(a, b) for a, b in zip(self.A, self.b)]

    def shrink(self, margin) -> "HPolytope":
        return HPolytope(self.A, self.b - margin, self.owner)

    def intersect(self, other: "HPolytope") -> "HPolytope":
        return HPolytope(np.vstack([self.A, other.A]), np.concatenate([self.b, other.b]), self.owner)


@dataclass(frozen=True, eq=False)
class VPolytope:
    """Convex polytope given by its vertices (hull order in 2D)."""

    vertices: np.ndarray
    normals: Optional[np.ndarray] = field(default=None)
    offsets: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.atleast_2d(np.asarray(self.vertices, dtype=float)))

    @classmethod
    def from_points(cls, points) -> "VPolytope":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = pts.shape[1]
        if pts.shape[0] < d + 1:
            raise DegeneratePolytopeError("not enough points for a full-dimensional body")
        if d == 2:
            hull = _hull_2d(pts)
            if hull.shape[0] < 3:
                raise DegeneratePolytopeError("points are collinear")
            A, b = _edges_2d(hull)
            return cls(hull, A, b)
        from scipy.spatial import ConvexHull, QhullError

        try:
            ch = ConvexHull(pts)
        except QhullError as exc:
            raise DegeneratePolytopeError(str(exc)) from exc
        A, b = _unique_facets(ch.equations)
        return cls(pts[ch.vertices], A, b)

    @classmethod
    def box(cls, lo, hi) -> "VPolytope":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        d = lo.shape[0]
        corners = np.array(np.meshgrid(*[[lo[k], hi[k]] for k in range(d)], indexing="ij"))
        return cls.from_points(corners.reshape(d, -1).T)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def to_hpolytope(self, owner=None) -> HPolytope:
        if self.normals is None:
            return VPolytope.from_points(self.vertices).to_hpolytope(owner)
        return HPolytope(self.normals, self.offsets, owner)

    def transformed(self, M, t=None) -> "VPolytope":
        """Image under ``x -> M @ x + t`` (M invertible)."""
        M = np.asarray(M, dtype=float)
        pts = self.vertices @ M.T
        if t is not None:
            pts = pts + np.asarray(t, dtype=float)
        return VPolytope.from_points(pts)

    def translated(self, t) -> "VPolytope":
        t = np.asarray(t, dtype=float)
        offs = None if self.offsets is None else self.offsets + self.normals @ t
        return VPolytope(self.vertices + t, self.normals, offs)

    def area(self) -> float:
        v = self.vertices
        if self.dim != 2:
            from scipy.spatial import ConvexHull

            return float(ConvexHull(v).volume)
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(frozen=True, eq=False)
class Segment:
    p0: np.ndarray
    p1: np.ndarray

    def closest_point(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        d = self.p1 - self.p0
        dd = float(d @ d)
        if dd <= 1e-24:
            return self.p0.copy()
        t = min(1.0, max(0.0, float((q - self.p0) @ d) / dd))
        return self.p0 + t * d


def _hull_2d(pts: np.ndarray) -> np.ndarray:
    # Andrew's monotone chain, CCW, collinear points dropped
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    P = [tuple(p) for p in pts[order]]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in P:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 1e-14:
            lower.pop()
        lower.append(p)
    for p in reversed(P):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 1e-14:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=float)


def _edges_2d(hull: np.ndarray):
    e = np.roll(hull, -1, axis=0) - hull
    n = np.column_stack([e[:, 1], -e[:, 0]])
    n /= np.linalg.norm(n, axis=1)[:, None]
    return n, np.einsum("ij,ij->i", n, hull)


def _unique_facets(equations: np.ndarray):
    A = equations[:, :-1]
    b = -equations[:, -1]
    keep = []
    for k in range(A.shape[0]):
        if not any(np.allclose(A[k], A[j], atol=1e-9) and abs(b[k] - b[j]) < 1e-9 for j in keep):
            keep.append(k)
    return A[keep].copy(), b[keep].copy()


def contains(P: HPolytope, p, tol: float = FEAS_TOL) -> bool:
    if P.A.shape[0] == 0:
        return True
    return bool(np.all(P.A @ np.asarray(p, dtype=float) <= P.b + tol))


class Chebyshev(NamedTuple):
    center: Optional[np.ndarray]
    radius: float


def _simplex(c, M, rhs, basis, n_real, phase2, max_iter=500, tol=1e-11):
    """Revised simplex with Bland's rule on ``min c@y, M@y = rhs, y >= 0``.

    Columns ``>= n_real`` are artificials; in phase 2 they may not enter and
    any that are still basic (at zero level) must leave on a nonzero pivot.
    Returns (basis, x_B, duals) or raises RuntimeError on unboundedness.
    """
    basis = list(basis)
    for _ in range(max_iter):
        B = M[:, basis]
        xB = np.linalg.solve(B, rhs)
        pi = np.linalg.solve(B.T, c[basis])
        red = c - M.T @ pi
        entering = -1
        limit = n_real if phase2 else M.shape[1]
        in_basis = set(basis)
        for j in range(limit):
            if j not in in_basis and red[j] < -tol:
                entering = j
                break
        if entering < 0:
            return basis, xB, pi
        col = np.linalg.solve(B, M[:, entering])
        best_row, best_ratio = -1, np.inf
        for r, var in enumerate(basis):
            if phase2 and var >= n_real and abs(col[r]) > tol:
                ratio = 0.0
            elif col[r] > tol:
                ratio = max(xB[r], 0.0) / col[r]
            else:
                continue
            if ratio < best_ratio - 1e-14 or (abs(ratio - best_ratio) <= 1e-14 and var < basis[best_row]):
                best_row, best_ratio = r, ratio
        if best_row < 0:
            raise RuntimeError("unbounded linear program")
        basis[best_row] = entering
    raise RuntimeError("simplex iteration limit reached")


def chebyshev_center(P: HPolytope) -> Chebyshev:
    """Largest inscribed ball; ``radius < 0`` certifies an empty interior.

    Solved through the dual LP ``min b@y  s.t.  A.T@y = 0, sum(y) = 1, y >= 0``
    whose optimal multipliers are the center and radius. An infeasible dual
    means an unbounded polytope, reported as ``Chebyshev(None, inf)``.
    """
    A, b = P.A, P.b
    m, d = A.shape
    if m == 0:
        return Chebyshev(None, np.inf)
    M = np.vstack([A.T, np.ones((1, m))])
    rows = d + 1
    M_full = np.hstack([M, np.eye(rows)])
    rhs = np.zeros(rows)
    rhs[-1] = 1.0
    basis = list(range(m, m + rows))
    c1 = np.concatenate([np.zeros(m), np.ones(rows)])
    basis, xB, _ = _simplex(c1, M_full, rhs, basis, m, phase2=False)
    infeas = sum(x for v, x in zip(basis, xB) if v >= m)
    if infeas > 1e-9:
        return Chebyshev(None, np.inf)
    c2 = np.concatenate([b, np.zeros(rows)])
    basis, xB, pi = _simplex(c2, M_full, rhs, basis, m, phase2=True)
    return Chebyshev(pi[:d].copy(), float(pi[d]))


def project_point(P: HPolytope, g, start=None, tol: float = FEAS_TOL, max_iter: int = 200) -> np.ndarray:
    """Euclidean projection of ``g`` onto ``P`` by a primal active-set method.

    ``start`` must be feasible; by default the Chebyshev center is used.
    """
    A, b = P.A, P.b
    g = np.asarray(g, dtype=float)
    if A.shape[0] == 0 or np.all(A @ g <= b + tol):
        return g.copy()
    if start is None:
        center, radius = chebyshev_center(P)
        if center is None:
            center = _any_feasible(P)
        elif radius < -tol:
            raise InfeasiblePolytopeError(f"polytope is empty (chebyshev radius {radius:.3e})")
        start = center
    x = np.array(start, dtype=float)
    if not np.all(A @ x <= b + 1e-7):
        raise InfeasiblePolytopeError("start point is not feasible")
    work: list[int] = []
    for _ in range(max_iter):
        r = g - x
        scale = max(1.0, float(np.linalg.norm(r)))
        if work:
            Aw = A[work]
            G = Aw @ Aw.T
            lam = np.linalg.solve(G, Aw @ r)
            # a full-rank working set pins x to a vertex: the step is zero exactly
            step = np.zeros_like(x) if len(work) >= A.shape[1] else r - Aw.T @ lam
        else:
            lam = np.zeros(0)
            step = r
        if np.linalg.norm(step) <= 1e-12 * scale:
            neg = [k for k, l in enumerate(lam) if l < -1e-10 * scale]
            if not neg:
                return x
            # Bland: drop the lowest-index constraint with a negative multiplier
            drop = min(neg, key=lambda k: work[k])
            work.pop(drop)
            continue
        Ap = A @ step
        slack = b - A @ x
        alpha, block = 1.0, -1
        for i in range(A.shape[0]):
            if i in work or Ap[i] <= 1e-14:
                continue
            ai = max(slack[i], 0.0) / Ap[i]
            if ai < alpha - 1e-15:
                alpha, block = ai, i
        x = x + alpha * step
        if block >= 0:
            work.append(block)
        else:
            # full step taken: x is the equality-constrained minimizer
            continue
    raise RuntimeError("active-set projection did not converge")


def _any_feasible(P: HPolytope) -> np.ndarray:
    # unbounded polytope: bound it with a huge box and re-run the LP
    d = P.dim
    big = HPolytope.box(-1e6 * np.ones(d), 1e6 * np.ones(d))
    center, radius = chebyshev_center(P.intersect(big))
    if center is None or radius < -FEAS_TOL:
        raise InfeasiblePolytopeError("polytope is empty")
    return center


def kkt_residual(P: HPolytope, g, x, tol: float = 1e-7) -> float:
    """Residual of ``x - g + A_act.T @ lam = 0`` with nonnegative lam (NNLS)."""
    from scipy.optimize import nnls

    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    act = np.where(P.A @ x >= P.b - tol)[0]
    if act.size == 0:
        return float(np.linalg.norm(x - g))
    _, res = nnls(P.A[act].T, g - x)
    return float(res)


def clip_line(P: HPolytope, origin, direction) -> Optional[Segment]:
    """Intersection of the ray ``origin + t*direction, t >= 0`` with ``P``.

    The far end is capped at t = 1e6 for unbounded polytopes.
    """
    o = np.asarray(origin, dtype=float)
    v = np.asarray(direction, dtype=float)
    if np.linalg.norm(v) <= 1e-12:
        raise ValueError("direction must be nonzero")
    t_lo, t_hi = 0.0, 1e6
    av = P.A @ v
    slack = P.b - P.A @ o
    for s, q in zip(slack, av):
        if abs(q) <= 1e-15:
            if s < -FEAS_TOL:
                return None
            continue
        t = s / q
        if q > 0:
            t_hi = min(t_hi, t)
        else:
            t_lo = max(t_lo, t)
    if t_lo > t_hi + 1e-12:
        return None
    t_hi = max(t_hi, t_lo)
    return Segment(o + t_lo * v, o + t_hi * v)


def _offset_vertices_3d(A: np.ndarray, b: np.ndarray, interior: np.ndarray) -> np.ndarray:
    from scipy.spatial import HalfspaceIntersection

    hs = np.hstack([A, -b[:, None]])
    return HalfspaceIntersection(hs, interior).intersections


def dilate(V: VPolytope, r: float) -> VPolytope:
    """Outward offset of every face by ``r`` (mitered corners).

    The result contains the exact Minkowski sum ``V + ball(r)``.
    """
    if r < 0:
        raise ValueError("dilation radius must be nonnegative")
    if V.normals is None:
        V = VPolytope.from_points(V.vertices)
    if r == 0:
        return V
    A, b = V.normals, V.offsets + r
    if V.dim == 2:
        n = A
        n_prev = np.roll(n, 1, axis=0)
        b_prev = np.roll(b, 1)
        verts = []
        for k in range(n.shape[0]):
            M = np.array([n_prev[k], n[k]])
            verts.append(np.linalg.solve(M, [b_prev[k], b[k]]))
        verts = np.array(verts)
        return VPolytope(verts, A.copy(), b.copy())
    verts = _offset_vertices_3d(A, b, V.vertices.mean(axis=0))
    out = VPolytope.from_points(verts)
    return VPolytope(out.vertices, A.copy(), b.copy())


def closest_point_in_hull(p, points, tol: float = 1e-12, max_iter: int = 500) -> np.ndarray:
    """Closest point to ``p`` in conv(points) (Wolfe's min-norm-point method)."""
    p = np.asarray(p, dtype=float)
    Q = np.atleast_2d(np.asarray(points, dtype=float)) - p
    scale = max(1.0, float(np.max(np.einsum("ij,ij->i", Q, Q))))
    k0 = int(np.argmin(np.einsum("ij,ij->i", Q, Q)))
    S = [k0]
    lam = np.array([1.0])
    x = Q[k0].copy()
    for _ in range(max_iter):
        dots = Q @ x
        j = int(np.argmin(dots))
        if x @ x - dots[j] <= tol * scale or j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            QS = Q[S]
            k = len(S)
            K = np.zeros((k + 1, k + 1))
            K[:k, :k] = QS @ QS.T
            K[:k, k] = 1.0
            K[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            mu = np.linalg.lstsq(K, rhs, rcond=None)[0][:k]
            if np.all(mu > 1e-14):
                lam = mu
                x = mu @ QS
                break
            mask = mu <= 1e-14
            theta = min(1.0, float(np.min(lam[mask] / (lam[mask] - mu[mask]))))
            lam = theta * mu + (1.0 - theta) * lam
            keep = lam > 1e-14
            S = [s for s, kk in zip(S, keep) if kk]
            lam = lam[keep]
            lam = lam / lam.sum()
            x = lam @ Q[S]
    return x + p


def distance_to_polytope(p, V: VPolytope) -> float:
    if V.normals is not None and np.all(V.normals @ p <= V.offsets):
        return 0.0
    return float(np.linalg.norm(closest_point_in_hull(p, V.vertices) - p))


def max_margin_separator(p, V: VPolytope) -> Hyperplane:
    """Unit-normal plane with ``p`` strictly inside and ``V`` on the far side.

    The normal points from ``p`` to its closest point on ``V`` and the plane
    is moved to touch ``V``; this is the max-margin (SVM) separator of a point
    and a polytope, shifted onto the polytope.
    """
    p = np.asarray(p, dtype=float)
    c = closest_point_in_hull(p, V.vertices)
    gap = c - p
    dist = float(np.linalg.norm(gap))
    if dist <= 1e-9:
        raise PointInsidePolytopeError(f"point lies inside the polytope (distance {dist:.2e})")
    a = gap / dist
    return Hyperplane(a, float(np.min(V.vertices @ a)))
