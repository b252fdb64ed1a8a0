"""Geometric decompositions feeding the eigenvalue-count bounds.

Three coupled structures:

* dyadic-exponential radius intervals, indexed by n in Z, expressed in
  t = ln r coordinates as I_0 = [-1, 1], I_n = [2^(n-1), 2^n] for n > 0
  and I_n = [-2^|n|, -2^(|n|-1)] for n < 0;
* homothetic annuli Q_n with radius ratio rho = (2 c1/c0)^(1/alpha),
  normalized so the outermost annulus ends at the support diameter;
* the radialized potential measure nu, aggregating V * weight over
  spherical shells.

From these come the sequences G_n (log-weighted potential integrals),
calG_n (their radial counterparts, G_n = 2 pi calG_n), and D_n (average
L log L norms over annuli). Atoms sitting exactly on an interval or
annulus boundary contribute to both adjacent cells; the overlap keeps
every derived bound conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .measures import AtomicMeasure, PotentialField, SquareRegion
from .orlicz import NFunctionPair, WeightedSampleSpace, llogl_pair, orlicz_norm_dual

__all__ = [
    "AnnularScheme",
    "RadialMeasure",
    "SquareCover",
    "interval_bounds",
    "intervals_containing",
    "build_annuli",
    "radialize",
    "compute_Gn",
    "g_sequence",
    "compute_calGn",
    "calg_sequence",
    "compute_Dn",
    "d_sequence",
    "equal_norm_cover",
    "scheme_rows",
]

_EDGE_SLACK = 1e-12


def interval_bounds(n: int) -> Tuple[float, float]:
    """Endpoints of I_n in t = ln r coordinates."""
    if n == 0:
        return (-1.0, 1.0)
    if n > 0:
        return (2.0 ** (n - 1), 2.0**n)
    return (-(2.0 ** abs(n)), -(2.0 ** (abs(n) - 1)))


def intervals_containing(t: float) -> List[int]:
    """Indices n with t in I_n (one index, or two on a shared endpoint)."""
    out = []
    if not math.isfinite(t):
        return out
    a = abs(t)
    if a <= 1.0:
        out.append(0)
    if a >= 1.0:
        # a lies in [2^(k-1), 2^k] for k = ceil(log2 a); shared endpoints
        # belong to both neighbours
        k = max(1, math.ceil(math.log2(a) - 1e-15)) if a > 1.0 else 1
        lo, hi = 2.0 ** (k - 1), 2.0**k
        if a < lo:  # guard against log2 rounding
            k -= 1
            lo, hi = 2.0 ** (k - 1), 2.0**k
        if k >= 1 and lo <= a <= hi:
            out.append(k if t > 0 else -k)
        if a == hi:
            out.append(k + 1 if t > 0 else -(k + 1))
        elif a == lo and k >= 2:
            out.append(k - 1 if t > 0 else -(k - 1))
    return sorted(set(out))


@dataclass(frozen=True)
class AnnularScheme:
    """Annuli Q_n: eta * rho^(n-1) <= |x| <= eta * rho^n.

    ``m`` is the outermost index for bounded supports (None when the
    support was truncated from an unbounded family, in which case eta = 1).
    """

    eta: float
    ratio: float
    m: Optional[int]
    n_range: Tuple[int, ...]
    c0: float
    c1: float
    alpha: float

    def annulus_bounds(self, n: int) -> Tuple[float, float]:
        return (self.eta * self.ratio ** (n - 1), self.eta * self.ratio**n)

    def annulus_mask(self, measure: AtomicMeasure, n: int) -> np.ndarray:
        lo, hi = self.annulus_bounds(n)
        r = measure.radii()
        return (r >= lo * (1 - _EDGE_SLACK)) & (r <= hi * (1 + _EDGE_SLACK))


def build_annuli(measure: AtomicMeasure, *, c0: Optional[float] = None,
                 c1: Optional[float] = None, alpha: Optional[float] = None,
                 origin_tol: float = 0.02) -> AnnularScheme:
    """Annular scheme for a measure whose support contains the origin.

    The ratio uses the empirical Ahlfors constants unless overridden. For
    a bounded support of diameter d > 1, m is the unique integer with
    rho^(m-1) < d <= rho^m and eta = d / rho^m lies in (1/rho, 1]. A
    truncated (unbounded) family gets eta = 1 and no index cap.

    ``origin_tol`` is relative to the diameter: an atomic stand-in for a
    continuum measure containing the origin has its nearest atom about one
    discretization cell away, so the check is a sanity gate, not exact.
    """
    alpha = float(alpha if alpha is not None else measure.alpha)
    c0v = float(c0 if c0 is not None else measure.c0_est)
    c1v = float(c1 if c1 is not None else measure.c1_est)
    if not (c0v > 0 and c1v >= c0v):
        raise ValueError("need 0 < c0 <= c1 (estimate or override)")
    rho = (2.0 * c1v / c0v) ** (1.0 / alpha)
    radii = measure.radii()
    if radii.min(initial=math.inf) > origin_tol * max(1.0, measure.diam_support):
        raise ValueError("support must contain the origin; translate the measure")
    # the outermost atom can sit one discretization cell beyond the pairwise
    # diameter (no atom lies exactly at the origin); the annuli must still
    # cover it, so the effective diameter is the larger of the two
    diam = max(measure.diam_support, float(radii.max(initial=0.0)))
    if measure.truncated:
        eta, m = 1.0, None
    else:
        if diam <= 1.0:
            raise ValueError(
                "support diameter must exceed 1; rescale the measure first")
        guess = math.log(diam) / math.log(rho)
        m = None
        for cand in (math.floor(guess), math.ceil(guess), round(guess)):
            eta_cand = diam / rho**cand
            if 1.0 / rho * (1 - 1e-12) < eta_cand <= 1.0 + 1e-12:
                m = int(cand)
                break
        if m is None:
            raise ArithmeticError("could not bracket the annulus index cap")
        eta = min(1.0, diam / rho**m)
    # indices of annuli that actually carry atoms
    pos = radii[radii > 0]
    ns: set = set()
    for r in np.unique(pos):
        x = math.log(r / eta) / math.log(rho)
        n = math.ceil(x - 1e-12)
        ns.add(n)
        if abs(x - round(x)) < 1e-12:  # on a shared boundary radius
            ns.add(round(x) + 1)
    if m is not None:
        ns = {n for n in ns if n <= m}
    return AnnularScheme(eta=float(eta), ratio=float(rho), m=m,
                         n_range=tuple(sorted(ns)), c0=c0v, c1=c1v, alpha=alpha)


@dataclass(frozen=True)
class RadialMeasure:
    """Aggregate of V * weight over shells |x| = r, sorted by radius."""

    radii: np.ndarray
    masses: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum()) if len(self.masses) else 0.0

    @property
    def n_atoms(self) -> int:
        return len(self.radii)


def radialize(V: PotentialField, measure: AtomicMeasure,
              merge_rtol: float = 1e-12) -> RadialMeasure:
    """Collapse V d(mu) onto radii, merging shells within relative 1e-12.

    Atoms at the origin are dropped (they lie in no radius interval);
    zero-potential atoms contribute nothing and are elided.
    """
    r = measure.radii()
    mass = V.values * measure.weights
    keep = (r > 0) & (mass > 0)
    r, mass = r[keep], mass[keep]
    if len(r) == 0:
        return RadialMeasure(np.empty(0), np.empty(0))
    order = np.argsort(r, kind="stable")
    r, mass = r[order], mass[order]
    out_r: List[float] = [r[0]]
    out_m: List[float] = [mass[0]]
    for ri, mi in zip(r[1:], mass[1:]):
        if ri - out_r[-1] <= merge_rtol * ri:
            out_m[-1] += mi
        else:
            out_r.append(ri)
            out_m.append(mi)
    return RadialMeasure(np.array(out_r), np.array(out_m))


def _log_weight(n: int, t: np.ndarray) -> np.ndarray:
    return np.ones_like(t) if n == 0 else np.abs(t)


def compute_Gn(V: PotentialField, measure: AtomicMeasure, n: int) -> float:
    """Log-weighted potential mass over the n-th radius interval.

    The |ln r| weight is dropped for n = 0. Membership is decided in
    t = ln r so it agrees exactly with the radial sequence.
    """
    r = measure.radii()
    keep = r > 0
    t = np.log(r[keep])
    lo, hi = interval_bounds(n)
    mask = (t >= lo) & (t <= hi)
    if not np.any(mask):
        return 0.0
    contrib = _log_weight(n, t[mask]) * (V.values[keep])[mask] * (
        measure.weights[keep])[mask]
    return float(contrib.sum())


def g_sequence(V: PotentialField, measure: AtomicMeasure) -> Dict[int, float]:
    """All nonzero G_n, keyed by interval index."""
    r = measure.radii()
    keep = (r > 0) & (V.values > 0)
    ts = np.log(r[keep])
    ns: set = set()
    for t in ts:
        ns.update(intervals_containing(float(t)))
    return {n: compute_Gn(V, measure, n) for n in sorted(ns)}


def compute_calGn(nu: RadialMeasure, n: int) -> float:
    """Radial counterpart: (1/2pi) integral of |t| (1 for n = 0) d nu(e^t)."""
    if nu.n_atoms == 0:
        return 0.0
    t = np.log(nu.radii)
    lo, hi = interval_bounds(n)
    mask = (t >= lo) & (t <= hi)
    if not np.any(mask):
        return 0.0
    return float(np.sum(_log_weight(n, t[mask]) * nu.masses[mask]) / (2 * math.pi))


def calg_sequence(nu: RadialMeasure) -> Dict[int, float]:
    ns: set = set()
    for r in nu.radii:
        ns.update(intervals_containing(math.log(r)))
    return {n: compute_calGn(nu, n) for n in sorted(ns)}


def compute_Dn(V: PotentialField, measure: AtomicMeasure,
               scheme: AnnularScheme, n: int,
               pair: Optional[NFunctionPair] = None) -> float:
    """Average L log L norm of V over the closed annulus Q_n (0 if empty)."""
    pair = pair or llogl_pair()
    mask = scheme.annulus_mask(measure, n)
    if not np.any(mask):
        return 0.0
    space = WeightedSampleSpace(measure.weights[mask])
    f = V.values[mask]
    if not np.any(f > 0):
        return 0.0
    return orlicz_norm_dual(f, space, pair, space.total_mass)


def d_sequence(V: PotentialField, measure: AtomicMeasure,
               scheme: AnnularScheme,
               pair: Optional[NFunctionPair] = None) -> Dict[int, float]:
    return {n: compute_Dn(V, measure, scheme, n, pair) for n in scheme.n_range}


# ----------------------------------------------------------------------
# equal-norm square covers


@dataclass(frozen=True)
class SquareCover:
    squares: Tuple[SquareRegion, ...]
    achieved_norms: Tuple[float, ...]
    target_norm: float
    branch: str  # "single" | "cover" | "degenerate"


class CoverBisectionError(RuntimeError):
    """Raised when the square-norm jump at the bisected side length is too
    large, which signals mass concentrating on a line parallel to the
    square sides (a bad direction choice)."""


def _restricted_average_norm(V, measure, region_mask, square: SquareRegion,
                             pair: NFunctionPair) -> float:
    in_sq = square.contains(measure.points)
    if not np.any(in_sq):
        return 0.0
    space = WeightedSampleSpace(measure.weights[in_sq])
    f = np.where(region_mask[in_sq], V.values[in_sq], 0.0)
    if not np.any(f > 0):
        return 0.0
    return orlicz_norm_dual(f, space, pair, space.total_mass)


def equal_norm_cover(V: PotentialField, measure: AtomicMeasure, region,
                     n: int, theta0: float, *, besicovitch_n: int = 19,
                     jump_tol: float = 0.05, max_candidates: int = 48,
                     pair: Optional[NFunctionPair] = None) -> SquareCover:
    """Cover supp mu inside the region by squares of equal average norm.

    Each square is centred at a support atom and its side is bisected
    until the average norm of the region-restricted potential reaches
    kappa0 * N / n times the region norm. On an atomic measure the norm
    is a step function of the side, so the bisection resolves the side to
    machine precision and accepts the upward jump across the target as
    long as the relative jump stays below ``jump_tol``; larger jumps abort
    with the offending centre. When n <= kappa0 * N a single doubled
    enclosing square suffices and no bisection runs.
    """
    from .measures import kappa0 as _kappa0

    pair = pair or llogl_pair()
    region_mask = region.contains(measure.points)
    if not np.any(region_mask):
        raise ValueError("region carries no measure mass")
    region_space = WeightedSampleSpace(measure.weights[region_mask])
    f_region = V.values[region_mask]
    center0, side0 = region.enclosing_square(theta0)

    if not np.any(f_region > 0):
        anchor = measure.points[region_mask][0]
        sq = SquareRegion(tuple(anchor), 2.0 * side0, theta0)
        return SquareCover((sq,), (0.0,), 0.0, "degenerate")

    region_norm = orlicz_norm_dual(f_region, region_space, pair,
                                   region_space.total_mass)
    kap = _kappa0(measure, region, theta0)

    if n <= kap * besicovitch_n:
        anchor = measure.points[region_mask][0]
        sq = SquareRegion(tuple(anchor), 2.0 * side0, theta0)
        achieved = _restricted_average_norm(V, measure, region_mask, sq, pair)
        return SquareCover((sq,), (achieved,), region_norm, "single")

    target = kap * besicovitch_n / n * region_norm
    candidates = np.flatnonzero(region_mask)
    if len(candidates) > max_candidates:
        stride = len(candidates) / max_candidates
        candidates = candidates[(np.arange(max_candidates) * stride).astype(int)]

    squares: List[SquareRegion] = []
    norms: List[float] = []
    for idx in candidates:
        center = tuple(measure.points[idx])

        def norm_at(side: float) -> float:
            return _restricted_average_norm(
                V, measure, region_mask, SquareRegion(center, side, theta0), pair)

        hi = 3.0 * side0
        if norm_at(hi) < target:  # entire region norm below target: use hi
            squares.append(SquareRegion(center, hi, theta0))
            norms.append(norm_at(hi))
            continue
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if hi - lo <= 1e-13 * side0:
                break
            if norm_at(mid) >= target:
                hi = mid
            else:
                lo = mid
        achieved = norm_at(hi)
        below = norm_at(lo) if lo > 0 else 0.0
        jump = (achieved - below) / target
        if abs(achieved - target) > jump_tol * target and jump > jump_tol:
            raise CoverBisectionError(
                f"norm jump {jump:.3g} at centre {center} exceeds tolerance; "
                "pick a direction avoiding charged lines")
        squares.append(SquareRegion(center, hi, theta0))
        norms.append(achieved)

    # greedy subcover, largest squares first
    order = sorted(range(len(squares)), key=lambda i: -squares[i].side)
    need = region_mask.copy()
    chosen: List[int] = []
    for i in order:
        if not np.any(need):
            break
        hits = squares[i].contains(measure.points) & need
        if np.any(hits):
            chosen.append(i)
            need &= ~hits
    if np.any(need):
        raise CoverBisectionError("candidate squares failed to cover the region")
    if len(chosen) > n:
        raise CoverBisectionError(
            f"greedy cover used {len(chosen)} squares, exceeding the requested {n}")
    return SquareCover(tuple(squares[i] for i in chosen),
                       tuple(norms[i] for i in chosen), target, "cover")


def scheme_rows(V: PotentialField, measure: AtomicMeasure,
                scheme: AnnularScheme) -> List[Tuple]:
    """CSV-ready rows (n, inner_radius, outer_radius, mass, G_n, D_n)."""
    rows = []
    gs = g_sequence(V, measure)
    for n in scheme.n_range:
        lo, hi = scheme.annulus_bounds(n)
        mass = float(measure.weights[scheme.annulus_mask(measure, n)].sum())
        rows.append((n, lo, hi, mass, gs.get(n, compute_Gn(V, measure, n)),
                     compute_Dn(V, measure, scheme, n)))
    return rows
