"""Atomic approximations of Ahlfors-regular measures in the plane.

Generators produce weighted point clouds standing in for the Lebesgue
measure on a box (dimension 2), arclength on polylines (dimension 1), and
self-similar measures of iterated function systems (fractional dimension).
Alongside the generators live the empirical Ahlfors-constant sweep, the
charged-direction test used to orient squares, and the mass-concentration
ratio kappa0 of a region.

Ball queries use closed balls throughout, because the measures here may
charge boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import ConvexHull, QhullError, cKDTree

__all__ = [
    "AtomicMeasure",
    "PotentialField",
    "DirectionChoice",
    "AhlforsEstimate",
    "SquareRegion",
    "AnnulusRegion",
    "Similarity",
    "generate_lebesgue",
    "generate_polyline",
    "generate_ifs",
    "regular_polygon",
    "verify_ahlfors",
    "pick_direction",
    "direction_is_charged",
    "kappa0",
    "save_measure",
    "load_measure",
]

_BALL_SLACK = 1e-12  # relative slack so atoms sitting on a sphere count as inside


def _support_diameter(points: np.ndarray) -> float:
    """Max pairwise distance; convex hull first, degenerate clouds by PCA."""
    n = len(points)
    if n < 2:
        return 0.0
    if n <= 400:
        d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))
    try:
        hull = ConvexHull(points)
        vp = points[hull.vertices]
        d2 = np.sum((vp[:, None, :] - vp[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))
    except QhullError:
        # collinear cloud: extremes along the principal axis are the answer
        c = points - points.mean(axis=0)
        _, _, vt = np.linalg.svd(c, full_matrices=False)
        proj = c @ vt[0]
        return float(proj.max() - proj.min())


@dataclass
class AtomicMeasure:
    """Weighted atoms in R^2 with Ahlfors metadata.

    ``truncated`` flags families whose true support is unbounded and was
    clipped to a window; downstream geometry treats the diameter as a
    lower bound in that case.
    """

    points: np.ndarray
    weights: np.ndarray
    alpha: float
    c0_est: float = math.nan
    c1_est: float = math.nan
    diam_support: float = math.nan
    generator_tag: str = "custom"
    truncated: bool = False
    _tree: Optional[cKDTree] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.points) != len(self.weights):
            raise ValueError("points/weights length mismatch")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and positive")
        if math.isnan(self.diam_support):
            self.diam_support = _support_diameter(self.points)

    @property
    def n_atoms(self) -> int:
        return len(self.weights)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def radii(self) -> np.ndarray:
        return np.hypot(self.points[:, 0], self.points[:, 1])

    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    def ball_mass(self, center, r: float) -> float:
        idx = self.tree().query_ball_point(np.asarray(center, dtype=float),
                                           r * (1.0 + _BALL_SLACK))
        return float(self.weights[idx].sum()) if idx else 0.0

    def rotated(self, angle: float) -> "AtomicMeasure":
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return replace(self, points=self.points @ rot.T, _tree=None)

    def scaled(self, factor: float) -> "AtomicMeasure":
        return replace(self, points=self.points * factor,
                       diam_support=self.diam_support * factor, _tree=None)


@dataclass
class PotentialField:
    """Nonnegative potential values aligned with a measure's atoms."""

    values: np.ndarray
    fn: Optional[Callable] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("potential values must be finite and nonnegative")

    @staticmethod
    def constant(measure: AtomicMeasure, value: float) -> "PotentialField":
        return PotentialField(np.full(measure.n_atoms, float(value)))

    @staticmethod
    def from_callable(measure: AtomicMeasure, fn: Callable) -> "PotentialField":
        vals = np.array([fn(p) for p in measure.points], dtype=float)
        return PotentialField(vals, fn=fn)

    def scaled(self, gamma: float) -> "PotentialField":
        return PotentialField(self.values * gamma, fn=None)


@dataclass(frozen=True)
class DirectionChoice:
    theta0: float
    line_mass_tolerance: float


@dataclass(frozen=True)
class AhlforsEstimate:
    c0_est: float
    c1_est: float
    argmin: Tuple[np.ndarray, float]
    argmax: Tuple[np.ndarray, float]


# ----------------------------------------------------------------------
# generators


def generate_lebesgue(box: Sequence[float], resolution: int) -> AtomicMeasure:
    """Midpoint-rule discretization of area measure on a rectangle.

    ``box`` is (x0, y0, x1, y1); ``resolution`` cells per side.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    x0, y0, x1, y1 = map(float, box)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate box")
    xs = x0 + (np.arange(resolution) + 0.5) * (x1 - x0) / resolution
    ys = y0 + (np.arange(resolution) + 0.5) * (y1 - y0) / resolution
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    cell = (x1 - x0) * (y1 - y0) / resolution**2
    m = AtomicMeasure(pts, np.full(len(pts), cell), alpha=2.0,
                      generator_tag="lebesgue")
    _attach_ahlfors_estimate(m)
    return m


def generate_polyline(vertices: Sequence[Sequence[float]],
                      resolution: float) -> AtomicMeasure:
    """Arclength measure along a polyline, ``resolution`` atoms per unit length."""
    verts = np.asarray(vertices, dtype=float)
    if len(verts) < 2:
        raise ValueError("polyline needs at least two vertices")
    seg = np.diff(verts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    length = float(seg_len.sum())
    if length <= 0:
        raise ValueError("polyline has zero length")
    pts, wts = [], []
    for a, d, ell in zip(verts[:-1], seg, seg_len):
        if ell == 0:
            continue
        k = max(1, int(math.ceil(ell * resolution)))
        s = (np.arange(k) + 0.5) / k
        pts.append(a + s[:, None] * d)
        wts.append(np.full(k, ell / k))
    m = AtomicMeasure(np.vstack(pts), np.concatenate(wts), alpha=1.0,
                      generator_tag="polyline")
    _attach_ahlfors_estimate(m)
    return m


def regular_polygon(radius: float, n: int, center=(0.0, 0.0)) -> np.ndarray:
    """Closed vertex list of a regular n-gon, ready for generate_polyline."""
    th = 2 * np.pi * np.arange(n + 1) / n
    return np.column_stack([center[0] + radius * np.cos(th),
                            center[1] + radius * np.sin(th)])


@dataclass(frozen=True)
class Similarity:
    """x -> ratio * R(angle) * (flip) * x + offset with ratio in (0, 1)."""

    ratio: float
    offset: Tuple[float, float] = (0.0, 0.0)
    angle: float = 0.0
    reflect: bool = False

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        rot = np.array([[c, -s], [s, c]])
        if self.reflect:
            rot = rot @ np.array([[1.0, 0.0], [0.0, -1.0]])
        return self.ratio * rot

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.matrix().T + np.asarray(self.offset, dtype=float)


def generate_ifs(maps: Sequence[Similarity], depth: int) -> AtomicMeasure:
    """Uniform self-similar measure of an IFS at a finite depth.

    Produces m^depth atoms of equal weight. The open-set condition is
    assumed, not verified. The dimension solves the Moran equation
    sum ratio_i^alpha = 1 (equal ratios r give ln m / ln(1/r)).
    """
    if not maps:
        raise ValueError("need at least one map")
    ratios = np.array([m.ratio for m in maps])
    if np.any(ratios <= 0) or np.any(ratios >= 1):
        raise ValueError("all similarity ratios must lie in (0, 1)")
    if depth < 1:
        raise ValueError("depth must be >= 1")

    def moran(a: float) -> float:
        return float(np.sum(ratios**a)) - 1.0

    alpha = brentq(moran, 1e-9, 10.0, xtol=1e-14)
    # seed at the centroid of the fixed points; depth iterations contract
    # any seed error by prod(ratios) per level
    fixed = []
    for mp in maps:
        A = np.eye(2) - mp.matrix()
        fixed.append(np.linalg.solve(A, np.asarray(mp.offset, dtype=float)))
    pts = np.mean(fixed, axis=0)[None, :]
    for _ in range(depth):
        pts = np.vstack([mp.apply(pts) for mp in maps])
    w = np.full(len(pts), 1.0 / len(pts))
    m = AtomicMeasure(pts, w, alpha=float(alpha), generator_tag="ifs")
    _attach_ahlfors_estimate(m)
    return m


# ----------------------------------------------------------------------
# Ahlfors verification


def verify_ahlfors(measure: AtomicMeasure, n_centers: int,
                   radii: Sequence[float], *, centers: Optional[np.ndarray] = None,
                   seed: int = 0) -> AhlforsEstimate:
    """Empirical Ahlfors constants: extremes of mass(B(x, r)) / r^alpha.

    Centers are sampled from the atoms (deterministically, by seed) unless
    given explicitly; the arg-extremes are kept for diagnostics. Boundary
    and endpoint centers are included deliberately, so the low extreme can
    reflect e.g. quarter-disk effects.
    """
    if measure.n_atoms == 0:
        raise ValueError("measure has no atoms")
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(radii > measure.diam_support * (1 + 1e-9)):
        raise ValueError("radii must lie in (0, diam_support]")
    if centers is None:
        rng = np.random.default_rng(seed)
        idx = rng.choice(measure.n_atoms, size=min(n_centers, measure.n_atoms),
                         replace=False)
        centers = measure.points[idx]
    else:
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    best_lo, best_hi = math.inf, -math.inf
    arg_lo = arg_hi = (centers[0], float(radii[0]))
    for x in centers:
        for r in radii:
            ratio = measure.ball_mass(x, float(r)) / float(r) ** measure.alpha
            if ratio < best_lo:
                best_lo, arg_lo = ratio, (x.copy(), float(r))
            if ratio > best_hi:
                best_hi, arg_hi = ratio, (x.copy(), float(r))
    return AhlforsEstimate(best_lo, best_hi, arg_lo, arg_hi)


def _attach_ahlfors_estimate(measure: AtomicMeasure) -> None:
    """Populate c0/c1 estimates with a small deterministic sweep."""
    if measure.n_atoms < 2 or measure.diam_support == 0:
        measure.c0_est = measure.c1_est = math.nan
        return
    d = measure.diam_support
    radii = np.geomspace(d / 40.0, d / 2.0, 5)
    est = verify_ahlfors(measure, n_centers=24, radii=radii, seed=1)
    measure.c0_est, measure.c1_est = est.c0_est, est.c1_est


# ----------------------------------------------------------------------
# directions


def _max_line_mass(measure: AtomicMeasure, theta: float,
                   bin_width: float = 1e-12) -> float:
    """Largest mass carried by a single line in direction theta.

    Atoms are binned by signed distance to the family of parallel lines;
    a bin narrower than bin_width stands in for one line.
    """
    normal = np.array([-math.sin(theta), math.cos(theta)])
    proj = measure.points @ normal
    scale = max(1.0, np.abs(proj).max(initial=0.0))
    keys = np.round(proj / (bin_width * scale)).astype(np.int64)
    order = np.argsort(keys, kind="stable")
    keys_sorted = keys[order]
    w_sorted = measure.weights[order]
    boundaries = np.flatnonzero(np.diff(keys_sorted)) + 1
    sums = np.add.reduceat(w_sorted, np.concatenate([[0], boundaries]))
    return float(sums.max())


def direction_is_charged(measure: AtomicMeasure, theta: float,
                         tolerance: float) -> bool:
    """True if some line in direction theta or theta + pi/2 carries more
    mass than the tolerance."""
    return (_max_line_mass(measure, theta) > tolerance
            or _max_line_mass(measure, theta + math.pi / 2) > tolerance)


def pick_direction(measure: AtomicMeasure, candidates: int, tolerance: float,
                   *, seed: int = 0) -> DirectionChoice:
    """First sampled theta in [0, pi/2) whose two orthogonal directions are
    uncharged. Almost every direction works for measures that do not charge
    lines, so a handful of candidates suffices."""
    if candidates < 1:
        raise ValueError("need at least one candidate")
    rng = np.random.default_rng(seed)
    for _ in range(candidates):
        theta = float(rng.uniform(0.0, math.pi / 2))
        if not direction_is_charged(measure, theta, tolerance):
            return DirectionChoice(theta, tolerance)
    raise RuntimeError(
        "all candidate directions rejected; the measure concentrates on "
        "lines in many directions - retry with a larger tolerance")


# ----------------------------------------------------------------------
# regions and kappa0


@dataclass(frozen=True)
class SquareRegion:
    """Closed square: center, side, sides oriented along theta/theta+pi/2."""

    center: Tuple[float, float]
    side: float
    theta: float = 0.0

    def contains(self, pts: np.ndarray) -> np.ndarray:
        rel = np.asarray(pts, dtype=float) - np.asarray(self.center)
        c, s = math.cos(self.theta), math.sin(self.theta)
        u = rel @ np.array([c, s])
        v = rel @ np.array([-s, c])
        half = self.side / 2 * (1 + _BALL_SLACK) + 1e-300
        return (np.abs(u) <= half) & (np.abs(v) <= half)

    def enclosing_square(self, theta0: float) -> Tuple[np.ndarray, float]:
        corners = _square_corners(self.center, self.side, self.theta)
        return _bounding_square(corners, theta0)


@dataclass(frozen=True)
class AnnulusRegion:
    """Closed annulus r_inner <= |x - center| <= r_outer."""

    center: Tuple[float, float]
    r_inner: float
    r_outer: float

    def contains(self, pts: np.ndarray) -> np.ndarray:
        rel = np.asarray(pts, dtype=float) - np.asarray(self.center)
        r = np.hypot(rel[:, 0], rel[:, 1])
        return (r >= self.r_inner * (1 - _BALL_SLACK)) & (
            r <= self.r_outer * (1 + _BALL_SLACK))

    def enclosing_square(self, theta0: float) -> Tuple[np.ndarray, float]:
        return np.asarray(self.center, dtype=float), 2.0 * self.r_outer


def _square_corners(center, side, theta) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    u = np.array([c, s]) * side / 2
    v = np.array([-s, c]) * side / 2
    ctr = np.asarray(center, dtype=float)
    return np.array([ctr + u + v, ctr + u - v, ctr - u + v, ctr - u - v])


def _bounding_square(pts: np.ndarray, theta0: float) -> Tuple[np.ndarray, float]:
    """Smallest square with sides along theta0 containing the points."""
    c, s = math.cos(theta0), math.sin(theta0)
    basis = np.array([[c, s], [-s, c]])
    proj = pts @ basis.T
    lo, hi = proj.min(axis=0), proj.max(axis=0)
    side = float(max(hi - lo))
    center_rot = (lo + hi) / 2
    center = center_rot @ basis
    return center, side


def kappa0(measure: AtomicMeasure, region, theta0: float) -> float:
    """Mass ratio mu(G*) / mu(region) where G* is the tripled enclosing square.

    G0 is the smallest closed square containing the region with sides in
    the directions theta0 and theta0 + pi/2; G* is concentric with G0 and
    three times the side. The ratio is at least 1.
    """
    inside = region.contains(measure.points)
    mass_region = float(measure.weights[inside].sum())
    if mass_region <= 0:
        raise ValueError("region carries no measure mass")
    center, side = region.enclosing_square(theta0)
    star = SquareRegion(tuple(center), 3.0 * side, theta0)
    mass_star = float(measure.weights[star.contains(measure.points)].sum())
    return mass_star / mass_region


# ----------------------------------------------------------------------
# serialization


def save_measure(measure: AtomicMeasure, path) -> None:
    """Columnar text format: header comments, then one 'x y weight' per line."""
    with open(path, "w") as fh:
        fh.write(f"# alpha={measure.alpha!r}\n")
        fh.write(f"# generator={measure.generator_tag}\n")
        fh.write(f"# c0_est={measure.c0_est!r} c1_est={measure.c1_est!r}\n")
        fh.write(f"# diam={measure.diam_support!r} truncated={int(measure.truncated)}\n")
        for (x, y), w in zip(measure.points, measure.weights):
            fh.write(f"{float(x)!r} {float(y)!r} {float(w)!r}\n")


def load_measure(path) -> AtomicMeasure:
    meta = {}
    pts, wts = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            x, y, w = map(float, line.split())
            pts.append((x, y))
            wts.append(w)
    return AtomicMeasure(
        np.array(pts), np.array(wts),
        alpha=float(meta.get("alpha", "nan")),
        c0_est=float(meta.get("c0_est", "nan")),
        c1_est=float(meta.get("c1_est", "nan")),
        diam_support=float(meta.get("diam", "nan")),
        generator_tag=meta.get("generator", "loaded"),
        truncated=bool(int(meta.get("truncated", "0"))),
    )
