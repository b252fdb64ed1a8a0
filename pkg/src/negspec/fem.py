"""Finite-element negative-inertia oracle.

P1 discretizations of the quadratic form

    integral |grad w|^2 dx  -  gamma * integral V |w|^2 d mu

on a disk (2D) and of its radial reduction on a log-radius window (1D).
Zero Dirichlet boundary conditions restrict the trial space, so every
negative count reported here is a lower bound for the true count of the
whole-plane form; comparisons against upper bounds stay one-sided.

The 2D mesh is a structured polar triangulation whose rings are spaced h
near the support radii of the measure and grow geometrically away from
them. Weakly coupled potentials in the plane bind at exponentially large
radii, and log-spaced rings represent the logarithmic tail of the ground
state exactly, which keeps the node count in the low thousands even for
domain radii like 1e5.

Potential matrices are assembled by evaluating the P1 hat functions at
the atoms of the measure; for atomic measures this quadrature is exact.
Counts come from Sylvester inertia via a dense symmetric-indefinite
(Bunch-Kaufman) factorization, with a dense eigendecomposition fallback
below dimension 5000.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .decomposition import RadialMeasure
from .measures import AtomicMeasure, PotentialField

__all__ = [
    "Mesh2D",
    "Grid1D",
    "FormMatrices",
    "InertiaResult",
    "polar_mesh",
    "refine_mesh",
    "stiffness_matrix",
    "mass_matrix",
    "potential_matrix",
    "locate_points",
    "assemble_2d",
    "assemble_on_mesh",
    "assemble_radial_1d",
    "delta_well_1d",
    "negative_inertia",
    "count_matrix_negatives",
    "lowest_ritz",
    "count_full",
    "count_radial",
    "write_matrix_coo",
]

DENSE_LIMIT = 5000
TWO_PI = 2.0 * math.pi


# ----------------------------------------------------------------------
# meshes


@dataclass
class Mesh2D:
    points: np.ndarray      # (nv, 2)
    triangles: np.ndarray   # (nt, 3) int
    boundary: np.ndarray    # (nv,) bool

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)


@dataclass
class Grid1D:
    nodes: np.ndarray  # sorted, uniform

    @property
    def n_vertices(self) -> int:
        return len(self.nodes)

    @property
    def h(self) -> float:
        return float(self.nodes[1] - self.nodes[0])


def _boundary_from_edges(triangles: np.ndarray, nv: int) -> np.ndarray:
    """Vertices on edges that belong to exactly one triangle."""
    edges = {}
    for tri in triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0) + 1
    mask = np.zeros(nv, dtype=bool)
    for (a, b), cnt in edges.items():
        if cnt == 1:
            mask[a] = mask[b] = True
    return mask


def _feature_rings(feature_radii: Sequence[float], h: float, L: float,
                   halo: int = 10) -> List[float]:
    """Rings at spacing h covering [r - halo*h, r + halo*h] per feature."""
    if len(feature_radii) == 0:
        return []
    rs = np.sort(np.asarray(feature_radii, dtype=float))
    intervals: List[List[float]] = []
    for r in rs:
        lo, hi = r - halo * h, r + halo * h
        if intervals and lo <= intervals[-1][1] + h:
            intervals[-1][1] = max(intervals[-1][1], hi)
        else:
            intervals.append([lo, hi])
    rings: List[float] = []
    for lo, hi in intervals:
        lo = max(lo, h)
        hi = min(hi, L)
        if hi < lo:
            continue
        k = int(math.floor((hi - lo) / h + 1e-9)) + 1
        rings.extend(lo + i * h for i in range(k))
    return rings


def polar_mesh(L: float, h: float, feature_radii: Sequence[float] = (),
               angular: int = 20, max_nodes: int = 1280) -> Mesh2D:
    """Structured polar triangulation of the disk of radius L.

    Rings at spacing h near the feature radii, geometric elsewhere with a
    ratio balancing radial and azimuthal element sizes. The backbone is
    thinned (ratio increased) if the node budget would be exceeded;
    feature rings are never dropped.
    """
    if h <= 0 or L <= 10 * h:
        raise ValueError("need 0 < 10 h < L")
    feat = sorted(set(_feature_rings(feature_radii, h, 0.98 * L)))
    q0 = 1.0 + TWO_PI / angular
    for attempt in range(8):
        q = 1.0 + (q0 - 1.0) * 1.5**attempt
        rings = list(feat)
        anchors = sorted(set([h] + feat + [L]))
        for a, b in zip(anchors[:-1], anchors[1:]):
            if b / a <= q * (1 + 1e-9):
                continue
            k = int(math.ceil(math.log(b / a) / math.log(q)))
            rings.extend(a * (b / a) ** (i / k) for i in range(1, k))
        rings = sorted(set(rings + [h, L]))
        # drop near-duplicates (closer than 0.3 of the local target spacing)
        cleaned = [rings[0]]
        for r in rings[1:]:
            local = min(h, cleaned[-1] * (q - 1.0))
            if r - cleaned[-1] > 0.3 * local:
                cleaned.append(r)
        if cleaned[-1] != L:
            cleaned[-1] = L
        if 1 + len(cleaned) * angular <= max_nodes:
            break
    else:
        raise ValueError("cannot satisfy the node budget; increase max_nodes")
    rings_arr = np.array(cleaned)
    nr, M = len(rings_arr), angular
    theta = TWO_PI * np.arange(M) / M
    pts = [np.zeros((1, 2))]
    for r in rings_arr:
        pts.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    points = np.vstack(pts)
    tris: List[Tuple[int, int, int]] = []
    for j in range(M):
        tris.append((0, 1 + j, 1 + (j + 1) % M))
    for i in range(nr - 1):
        a0, b0 = 1 + i * M, 1 + (i + 1) * M
        for j in range(M):
            j1 = (j + 1) % M
            tris.append((a0 + j, b0 + j, b0 + j1))
            tris.append((a0 + j, b0 + j1, a0 + j1))
    triangles = np.array(tris, dtype=np.int64)
    boundary = np.zeros(len(points), dtype=bool)
    boundary[1 + (nr - 1) * M:] = True
    return Mesh2D(points, triangles, boundary)


def refine_mesh(mesh: Mesh2D) -> Mesh2D:
    """Regular 4-split by edge midpoints; the coarse P1 space is nested in
    the fine one, so negative counts cannot decrease."""
    pts = [mesh.points]
    midpoint: dict = {}
    nv = mesh.n_vertices
    new_pts: List[np.ndarray] = []

    def mid(a: int, b: int) -> int:
        nonlocal nv
        key = (min(a, b), max(a, b))
        idx = midpoint.get(key)
        if idx is None:
            new_pts.append(0.5 * (mesh.points[a] + mesh.points[b]))
            idx = nv
            midpoint[key] = idx
            nv += 1
        return idx

    tris: List[Tuple[int, int, int]] = []
    for t0, t1, t2 in mesh.triangles:
        m01, m12, m20 = mid(t0, t1), mid(t1, t2), mid(t2, t0)
        tris.extend([(t0, m01, m20), (t1, m12, m01),
                     (t2, m20, m12), (m01, m12, m20)])
    points = np.vstack([mesh.points] + new_pts) if new_pts else mesh.points
    triangles = np.array(tris, dtype=np.int64)
    boundary = _boundary_from_edges(triangles, len(points))
    return Mesh2D(points, triangles, boundary)


# ----------------------------------------------------------------------
# assembly


def _tri_geometry(mesh: Mesh2D):
    p = mesh.points
    t = mesh.triangles
    v0, v1, v2 = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    d1, d2 = v1 - v0, v2 - v0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * np.abs(det)
    return v0, d1, d2, det, area


def stiffness_matrix(mesh: Mesh2D) -> sp.csr_matrix:
    """Full P1 stiffness (no boundary conditions)."""
    t = mesh.triangles
    _, d1, d2, det, area = _tri_geometry(mesh)
    # gradients of barycentric coordinates
    gb = np.empty((len(t), 3, 2))
    gb[:, 1, 0] = d2[:, 1] / det
    gb[:, 1, 1] = -d2[:, 0] / det
    gb[:, 2, 0] = -d1[:, 1] / det
    gb[:, 2, 1] = d1[:, 0] / det
    gb[:, 0, :] = -gb[:, 1, :] - gb[:, 2, :]
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            rows.append(t[:, i])
            cols.append(t[:, j])
            vals.append(area * np.einsum("k,k->k", gb[:, i, 0], gb[:, j, 0])
                        + area * gb[:, i, 1] * gb[:, j, 1])
    K = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mesh.n_vertices,) * 2)
    return K.tocsr()


def mass_matrix(mesh: Mesh2D) -> sp.csr_matrix:
    t = mesh.triangles
    *_, area = _tri_geometry(mesh)
    local = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 12.0
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            rows.append(t[:, i])
            cols.append(t[:, j])
            vals.append(area * local[i, j])
    M = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mesh.n_vertices,) * 2)
    return M.tocsr()


def locate_points(mesh: Mesh2D, pts: np.ndarray,
                  tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """Triangle index and barycentric coordinates per query point (-1 if
    outside the mesh). Nearest-centroid candidates first, widening as
    needed; the mesh sizes here make this cheap and exact."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    v0, d1, d2, det, _ = _tri_geometry(mesh)
    centroids = v0 + (d1 + d2) / 3.0
    tree = cKDTree(centroids)
    nt = len(mesh.triangles)
    tri_idx = np.full(len(pts), -1, dtype=np.int64)
    bary = np.zeros((len(pts), 3))
    for i, x in enumerate(pts):
        k = 8
        seen = 0
        while seen < nt:
            k = min(k, nt)
            _, cand = tree.query(x, k=k)
            cand = np.atleast_1d(cand)
            for c in cand[seen:]:
                rel = x - v0[c]
                b1 = (rel[0] * d2[c, 1] - rel[1] * d2[c, 0]) / det[c]
                b2 = (rel[1] * d1[c, 0] - rel[0] * d1[c, 1]) / det[c]
                b0 = 1.0 - b1 - b2
                if b0 >= -tol and b1 >= -tol and b2 >= -tol:
                    tri_idx[i] = c
                    bary[i] = (b0, b1, b2)
                    break
            if tri_idx[i] >= 0 or k >= nt:
                break
            seen = k
            k *= 4
    return tri_idx, bary


def potential_matrix(mesh: Mesh2D, V: PotentialField,
                     measure: AtomicMeasure) -> sp.csr_matrix:
    """P_ij = sum_k V_k w_k phi_i(x_k) phi_j(x_k), exact for atomic mu."""
    tri_idx, bary = locate_points(mesh, measure.points)
    missing = np.flatnonzero(tri_idx < 0)
    if len(missing):
        sample = ", ".join(str(tuple(measure.points[i])) for i in missing[:5])
        raise ValueError(
            f"{len(missing)} atoms outside the meshed domain, first: {sample}")
    rows, cols, vals = [], [], []
    vert = mesh.triangles[tri_idx]
    coef = V.values * measure.weights
    for i in range(3):
        for j in range(3):
            rows.append(vert[:, i])
            cols.append(vert[:, j])
            vals.append(coef * bary[:, i] * bary[:, j])
    P = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mesh.n_vertices,) * 2)
    return P.tocsr()


@dataclass
class FormMatrices:
    """Dirichlet-reduced matrices of the discrete form K - gamma P.

    K and P are symmetric PSD on the interior degrees of freedom; M is the
    matching mass matrix (used only for Ritz values). ``mesh`` retains the
    full geometry for refinement.
    """

    K: sp.csr_matrix
    P: sp.csr_matrix
    M: sp.csr_matrix
    mesh: object
    h: float
    L: float

    @property
    def dim(self) -> int:
        return self.K.shape[0]


def assemble_on_mesh(mesh: Mesh2D, V: PotentialField,
                     measure: AtomicMeasure, h: float, L: float) -> FormMatrices:
    interior = mesh.interior_indices()
    K = stiffness_matrix(mesh)[np.ix_(interior, interior)]
    P = potential_matrix(mesh, V, measure)[np.ix_(interior, interior)]
    M = mass_matrix(mesh)[np.ix_(interior, interior)]
    return FormMatrices(sp.csr_matrix(K), sp.csr_matrix(P), sp.csr_matrix(M),
                        mesh, h, L)


def _support_feature_radii(measure: AtomicMeasure, h: float) -> np.ndarray:
    r = measure.radii()
    return np.unique(np.round(r / h).astype(np.int64)) * h


def assemble_2d(V: PotentialField, measure: AtomicMeasure, L: float, h: float,
                *, angular: int = 20, max_nodes: int = 1280) -> FormMatrices:
    """Disk mesh of radius L with h-spaced rings near the support radii.

    L must cover the support with margin; an atom outside the meshed
    polygon triggers an error naming it.
    """
    rmax = float(measure.radii().max(initial=0.0))
    if rmax > 0.95 * L:
        raise ValueError(f"domain radius {L} too small for support radius {rmax}")
    mesh = polar_mesh(L, h, _support_feature_radii(measure, h),
                      angular=angular, max_nodes=max_nodes)
    return assemble_on_mesh(mesh, V, measure, h, L)


def _grid1d_matrices(grid: Grid1D):
    n = grid.n_vertices
    h = grid.h
    main = np.full(n, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    K = sp.diags([np.full(n - 1, -1.0 / h), main, np.full(n - 1, -1.0 / h)],
                 (-1, 0, 1)) * TWO_PI
    mm = np.full(n, 4.0 * h / 6.0)
    mm[0] = mm[-1] = 2.0 * h / 6.0
    M = sp.diags([np.full(n - 1, h / 6.0), mm, np.full(n - 1, h / 6.0)],
                 (-1, 0, 1)) * TWO_PI
    return sp.csr_matrix(K), sp.csr_matrix(M)


def assemble_radial_1d(nu: RadialMeasure, t_window: Sequence[float],
                       h: float) -> FormMatrices:
    """1D form 2 pi * integral |v'|^2 dt  minus  sum_j m_j |v(ln r_j)|^2.

    The 2 pi of the radial reduction stays in the stiffness (and mass)
    matrix so radial masses enter unmodified; as an operator this is
    -v'' - (m_j / 2 pi) * delta at t = ln r_j.
    """
    t_lo, t_hi = map(float, t_window)
    if not t_hi > t_lo:
        raise ValueError("empty window")
    n = int(round((t_hi - t_lo) / h)) + 1
    nodes = t_lo + np.arange(n) * ((t_hi - t_lo) / (n - 1))
    grid = Grid1D(nodes)
    if nu.n_atoms:
        ts = np.log(nu.radii)
        if ts.min() <= t_lo or ts.max() >= t_hi:
            raise ValueError("radial atoms outside the window interior")
    K, M = _grid1d_matrices(grid)
    rows, cols, vals = [], [], []
    if nu.n_atoms:
        hs = grid.h
        for t, m in zip(np.log(nu.radii), nu.masses):
            i = min(int((t - t_lo) / hs), n - 2)
            s = (t - nodes[i]) / hs
            phi = ((i, 1.0 - s), (i + 1, s))
            for a, fa in phi:
                for b, fb in phi:
                    rows.append(a)
                    cols.append(b)
                    vals.append(m * fa * fb)
    P = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    interior = np.arange(1, n - 1)
    red = np.ix_(interior, interior)
    return FormMatrices(sp.csr_matrix(K[red]), sp.csr_matrix(P[red]),
                        sp.csr_matrix(M[red]), grid, grid.h,
                        float(max(abs(t_lo), abs(t_hi))))


def delta_well_1d(strength: float, t_window: Sequence[float],
                  h: float) -> FormMatrices:
    """Discrete -v'' - strength * delta(t) well (strength after dividing
    out the angular 2 pi factor)."""
    nu = RadialMeasure(np.array([1.0]), np.array([TWO_PI * strength]))
    return assemble_radial_1d(nu, t_window, h)


# ----------------------------------------------------------------------
# inertia


@dataclass(frozen=True)
class InertiaResult:
    negative_count: int
    h: float
    L: float
    history: Tuple[Tuple[float, int], ...]
    converged: Optional[bool]
    method: str


def count_matrix_negatives(A: np.ndarray, tol: float) -> int:
    """Negative-eigenvalue count via Bunch-Kaufman LDL^T (Sylvester
    inertia); pivots within tol of zero count as zero."""
    lu, d, perm = sla.ldl(A, lower=True)
    n = d.shape[0]
    count = 0
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            a, b, c = d[i, i], d[i + 1, i], d[i + 1, i + 1]
            half_tr = 0.5 * (a + c)
            disc = math.sqrt((0.5 * (a - c)) ** 2 + b * b)
            for lam in (half_tr - disc, half_tr + disc):
                if lam < -tol:
                    count += 1
            i += 2
        else:
            if d[i, i] < -tol:
                count += 1
            i += 1
    return count


def negative_inertia(fm: FormMatrices, coupling: float) -> InertiaResult:
    """Sylvester inertia of K - coupling * P, deterministic.

    Dense Bunch-Kaufman is the primary path; an eigendecomposition backs
    it up on factorization breakdown. Dimensions above 5000 are refused.
    """
    if coupling < 0:
        raise ValueError("coupling must be nonnegative")
    n = fm.dim
    if n > DENSE_LIMIT:
        raise ValueError(
            f"dimension {n} exceeds the dense factorization limit {DENSE_LIMIT}")
    A = (fm.K - coupling * fm.P).toarray()
    tol = 1e-12 * sla.norm(fm.K.toarray(), np.inf) if n else 0.0
    try:
        count = count_matrix_negatives(A, tol)
        method = "ldl"
    except Exception:
        evals = sla.eigh(A, eigvals_only=True)
        count = int(np.sum(evals < -tol))
        method = "eigh-fallback"
    return InertiaResult(count, fm.h, fm.L, ((fm.h, count),), None, method)


def lowest_ritz(fm: FormMatrices, coupling: float) -> float:
    """Smallest generalized Ritz value of (K - coupling P) v = lam M v."""
    A = (fm.K - coupling * fm.P).toarray()
    M = fm.M.toarray()
    vals = sla.eigh(A, M, subset_by_index=[0, 0], eigvals_only=True)
    return float(vals[0])


def count_full(V: PotentialField, measure: AtomicMeasure, coupling: float,
               L: float, h: float, *, angular: int = 20,
               max_nodes: int = 1280) -> InertiaResult:
    """2D count at mesh size h plus one nested refinement step.

    The refined count is reported (it is the larger valid lower bound);
    disagreement between the two levels flags the result unconverged.
    """
    fm1 = assemble_2d(V, measure, L, h, angular=angular, max_nodes=max_nodes)
    r1 = negative_inertia(fm1, coupling)
    fine = refine_mesh(fm1.mesh)
    fm2 = assemble_on_mesh(fine, V, measure, h / 2, L)
    r2 = negative_inertia(fm2, coupling)
    if r2.negative_count < r1.negative_count:
        raise AssertionError(
            "negative count decreased under nested refinement; "
            f"{r1.negative_count} -> {r2.negative_count}")
    return InertiaResult(r2.negative_count, h, L,
                         ((h, r1.negative_count), (h / 2, r2.negative_count)),
                         r1.negative_count == r2.negative_count, r2.method)


def count_radial(nu: RadialMeasure, t_window: Sequence[float], h: float,
                 coupling: float) -> InertiaResult:
    """1D count at grid size h plus one nested h/2 refinement."""
    fm1 = assemble_radial_1d(nu, t_window, h)
    r1 = negative_inertia(fm1, coupling)
    fm2 = assemble_radial_1d(nu, t_window, h / 2)
    r2 = negative_inertia(fm2, coupling)
    return InertiaResult(r2.negative_count, h, fm1.L,
                         ((h, r1.negative_count), (h / 2, r2.negative_count)),
                         r1.negative_count == r2.negative_count, r2.method)


def write_matrix_coo(mat: sp.spmatrix, path) -> None:
    """Coordinate text format: 'n n nnz' header then 'i j value' rows."""
    coo = sp.coo_matrix(mat)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i} {j} {float(v)!r}\n")
