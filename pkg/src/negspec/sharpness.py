"""Sharpness experiments: the no-weaker-norm counterexample and the
inverse asymptotics backing the endpoint trace embedding.

The counterexample machinery builds, for any Young function Psi strictly
weaker than the L log L function B (ratio Psi/B vanishing at infinity), a
potential of bumps

    V = t_k  on  B(x_k, r_k^2),    t_k = A19 * r_k^(-2 alpha) / ln(1/r_k)

whose Psi-integral converges while every bump supports an independent
negative direction of the quadratic form once A19 c0 > 2 pi. Bump centres
march toward the origin with |x_(k+1)| < min(|x_k|/3, 2 rho_(k+1)) and
r_k = |x_k|/2, where the rho schedule enforces summability of
beta(rho_k^(-alpha)), beta(s) = sup_{t >= s} Psi(t)/B(t).

Deep bumps live at scales far below the resolution of absolute float
coordinates (r_k^2 << eps * |x_k|), so each bump carries its own local
atom cloud in coordinates relative to its centre; all quantitative checks
run on those local clouds and on closed-form ball masses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .measures import AtomicMeasure, PotentialField
from .orlicz import eval_B, inv_B

__all__ = [
    "beta_ratio",
    "weaker_llogl",
    "LebesgueFamily",
    "Bump",
    "CounterexampleSpec",
    "build_counterexample",
    "RayleighResult",
    "rayleigh_check",
    "FinitenessReport",
    "finiteness_check",
    "binv_asymptotics",
    "lambert_w",
    "phi_asymptotics",
]

TWO_PI = 2.0 * math.pi


def weaker_llogl(p: float = 1.0) -> Callable[[float], float]:
    """B(s) / ln(e + s)^p: an N-function strictly weaker than B for p > 0."""

    def psi(s: float) -> float:
        return eval_B(s) / math.log(math.e + s) ** p

    psi.__name__ = f"llogl_over_log{p:g}"
    return psi


def beta_ratio(psi: Callable[[float], float], s: float,
               decades: float = 8.0, per_decade: int = 8) -> float:
    """sup_{t >= s} psi(t)/B(t), by scanning a log grid above s.

    For the ratios used here the sup is attained at t = s (the ratio
    decays), but the scan guards against non-monotone candidates.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    grid = s * np.logspace(0.0, decades, int(decades * per_decade) + 1)
    return max(psi(float(t)) / eval_B(float(t)) for t in grid)


def _beta_vanishes(psi, s_probe: Sequence[float]) -> bool:
    """Monotone decay of beta along the probe with genuine shrinkage; a
    ratio bounded away from zero (e.g. psi = B itself) fails."""
    vals = [beta_ratio(psi, s) for s in s_probe]
    decays = all(b - a >= -1e-12 * abs(a) for a, b in
                 zip(vals[1:], vals[:-1]))  # nonincreasing along the probe
    return decays and vals[-1] < 0.5 * vals[0] and vals[-1] < 0.5


@dataclass(frozen=True)
class LebesgueFamily:
    """Planar area measure: closed-form ball masses, support everywhere.

    ``inner_hole`` carves the disk |x| < inner_hole out of the support to
    model families with no support near the origin (used for the error
    path of the construction).
    """

    alpha: float = 2.0
    c0: float = math.pi
    c1: float = math.pi
    inner_hole: float = 0.0

    def point_at_radius(self, r: float) -> Optional[np.ndarray]:
        if r <= self.inner_hole:
            return None
        d = r / math.sqrt(2.0)
        return np.array([d, d])

    def ball_mass(self, radius: float) -> float:
        return math.pi * radius * radius

    def local_atoms(self, radius: float, n_target: int
                    ) -> Tuple[np.ndarray, np.ndarray]:
        """Polar-cell atoms partitioning the ball exactly (offsets relative
        to the centre; weights sum to pi * radius^2 up to rounding)."""
        n_r = max(4, int(math.ceil(math.sqrt(n_target / 4))))
        n_th = max(4, int(math.ceil(n_target / n_r)))
        edges = radius * np.sqrt(np.linspace(0.0, 1.0, n_r + 1))  # equal-area rings
        mids = 0.5 * (edges[:-1] + edges[1:])
        th = TWO_PI * (np.arange(n_th) + 0.5) / n_th
        ring_area = math.pi * np.diff(edges**2)
        offs, wts = [], []
        for rm, ra in zip(mids, ring_area):
            offs.append(np.column_stack([rm * np.cos(th), rm * np.sin(th)]))
            wts.append(np.full(n_th, ra / n_th))
        return np.vstack(offs), np.concatenate(wts)


@dataclass(frozen=True)
class Bump:
    center: np.ndarray         # absolute centre x_k
    radius: float              # r_k = |x_k| / 2
    rho: float                 # schedule bound, r_k < rho_k
    height: float              # t_k
    ball_radius: float         # r_k^2
    ball_mass: float           # mu(B(x_k, r_k^2)), closed form
    atom_offsets: np.ndarray   # local cloud, relative to the centre
    atom_weights: np.ndarray


@dataclass(frozen=True)
class CounterexampleSpec:
    psi: Callable[[float], float]
    alpha: float
    c0: float
    a19: float
    s0: float
    r0: float
    bumps: Tuple[Bump, ...]

    @property
    def k_bumps(self) -> int:
        return len(self.bumps)


def _find_s0(psi, alpha: float, identity_factor: float = 0.5) -> float:
    """Smallest s0 >= e^(1/alpha) with psi(u) >= identity_factor * u and
    beta(u) <= 1 for all u >= s0^alpha; expanding search then bisection.

    Identity domination up to a fixed factor is all the finiteness
    conclusions use; requiring the full psi(u) >= u would exclude
    borderline families like B/ln(e + .), whose ratio to the identity
    tends to 1 from below.
    """
    floor = math.exp(1.0 / alpha)

    def ok(u: float) -> bool:
        return psi(u) >= identity_factor * u and beta_ratio(psi, u) <= 1.0

    u = max(floor**alpha, 1.01)
    for _ in range(200):
        if ok(u):
            break
        u *= 2.0
    else:
        raise ValueError("psi never dominates the identity; not an N-function?")
    lo, hi = u / 2.0, u
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return max(floor, hi ** (1.0 / alpha))


def _rho_schedule(psi, alpha: float, s0: float, k_bumps: int) -> List[float]:
    """rho_k = min(geometric, value forcing beta(rho_k^-alpha) <= 1/k^2);
    the forced branch makes sum beta(rho_k^-alpha) converge even for
    logarithmically decaying beta."""
    rhos = []
    u_floor = s0**alpha
    for k in range(1, k_bumps + 1):
        geo = (1.0 / s0) * 2.0 ** (-k)
        target = 1.0 / k**2
        u = max(u_floor, 1.01)
        for _ in range(4000):
            if beta_ratio(psi, u) <= target:
                break
            u *= 2.0
            if u > 1e300:
                raise OverflowError(
                    f"beta decays too slowly to schedule bump {k}")
        forced = u ** (-1.0 / alpha)
        rhos.append(min(geo, forced))
    return rhos


def build_counterexample(psi: Callable[[float], float], alpha: float,
                         k_bumps: int, family: LebesgueFamily, *,
                         a19: Optional[float] = None, r0: float = 0.5,
                         first_radius: Optional[float] = None,
                         min_ball_atoms: int = 100
                         ) -> Tuple[CounterexampleSpec, PotentialField, AtomicMeasure]:
    """Assemble the bump potential for a weaker-than-L-log-L Psi.

    Rejects Psi unless psi/B decays to zero along a log grid. ``a19``
    defaults to twice the negativity threshold 2 pi / c0. The returned
    atomic measure concatenates the local clouds into absolute
    coordinates for inspection and serialization; for deep bumps the
    offsets collapse onto the centre at float precision, so quantitative
    checks use the per-bump local data in the spec.
    """
    probes = np.geomspace(10.0, 1e7, 8)
    if not _beta_vanishes(psi, probes):
        raise ValueError("psi/B does not vanish at infinity; "
                         "the construction requires a strictly weaker norm")
    if a19 is None:
        a19 = 2.0 * TWO_PI / family.c0
    if a19 * alpha * math.e <= 1.0:
        raise ValueError("a19 too small: heights would not dominate 1/r^alpha")
    s0 = _find_s0(psi, alpha)
    rhos = _rho_schedule(psi, alpha, s0, k_bumps)

    bumps: List[Bump] = []
    prev_abs = math.inf
    for k in range(1, k_bumps + 1):
        cap = min((2.0 / 3.0) * r0 if k == 1 else prev_abs / 3.0,
                  2.0 * rhos[k - 1])
        want = 2.0 * first_radius if (k == 1 and first_radius is not None) else None
        if want is not None:
            if want >= cap:
                raise ValueError("first_radius incompatible with the schedule")
            xk_abs = want
        else:
            xk_abs = 0.9 * cap
        center = family.point_at_radius(xk_abs)
        if center is None:
            raise ValueError(
                "support has no points arbitrarily near the origin; "
                "the construction needs them")
        xk_abs = float(np.hypot(*center))
        r_k = xk_abs / 2.0
        if not r_k < rhos[k - 1]:
            raise ArithmeticError("bump radius escaped its schedule bound")
        log_inv = -math.log(r_k)
        t_k = a19 * r_k ** (-2.0 * alpha) / log_inv
        if not math.isfinite(t_k) or not math.isfinite(psi(t_k)):
            raise OverflowError(
                f"bump {k} height overflows float range; reduce k_bumps")
        ball_r = r_k * r_k
        offs, wts = family.local_atoms(ball_r, min_ball_atoms)
        bumps.append(Bump(center=center, radius=r_k, rho=rhos[k - 1],
                          height=t_k, ball_radius=ball_r,
                          ball_mass=family.ball_mass(ball_r),
                          atom_offsets=offs, atom_weights=wts))
        prev_abs = xk_abs

    spec = CounterexampleSpec(psi=psi, alpha=alpha, c0=family.c0, a19=a19,
                              s0=s0, r0=r0, bumps=tuple(bumps))
    pts = np.vstack([b.center + b.atom_offsets for b in bumps])
    wt = np.concatenate([b.atom_weights for b in bumps])
    vals = np.concatenate([np.full(len(b.atom_weights), b.height)
                           for b in bumps])
    measure = AtomicMeasure(pts, wt, alpha=alpha, c0_est=family.c0,
                            c1_est=family.c1, generator_tag="counterexample")
    return spec, PotentialField(vals), measure


@dataclass(frozen=True)
class RayleighResult:
    energy: float
    gradient_term: float
    potential_term: float
    forced_lower_bound: float
    flag: str  # "negative" | "borderline" | "indeterminate"


def rayleigh_check(spec: CounterexampleSpec, k: int) -> RayleighResult:
    """Energy of the k-th logarithmic cutoff test function.

    The gradient integral is the closed form 2 pi / ln(1/r_k); the
    potential term is the bump height times the local atomic quadrature
    of the ball (the test function is 1 there). The construction forces
    negativity exactly when a19 c0 > 2 pi.
    """
    b = spec.bumps[k]
    log_inv = -math.log(b.radius)
    grad = TWO_PI / log_inv
    quad_mass = float(b.atom_weights.sum())
    pot = b.height * quad_mass
    forced = spec.c0 * spec.a19 / log_inv
    if pot < forced * (1 - 1e-9):
        raise AssertionError("ball quadrature fell below the forced lower bound")
    energy = grad - pot
    scale = max(grad, pot)
    if abs(energy) <= 1e-9 * scale:
        flag = "borderline"
    elif energy < 0:
        flag = "negative"
    else:
        flag = "indeterminate"
    return RayleighResult(energy, grad, pot, forced, flag)


@dataclass(frozen=True)
class FinitenessReport:
    psi_terms: np.ndarray
    psi_partial_sums: np.ndarray
    psi_tail_ratios: np.ndarray  # tail_{k+1} / tail_k, length K-1
    vw_terms: np.ndarray
    vw_partial_sums: np.ndarray


def finiteness_check(spec: CounterexampleSpec,
                     w: Optional[Callable] = None) -> FinitenessReport:
    """Partial sums of sum_k Psi(t_k) mu(B_k) and of the V-against-weight
    integral, with consecutive tail ratios as a Cauchy diagnostic."""
    psi_terms = np.array([spec.psi(b.height) * b.ball_mass for b in spec.bumps])
    if w is None:
        wbar = np.ones(len(spec.bumps))
    else:
        wbar = np.array([w(b.center) for b in spec.bumps], dtype=float)
    vw_terms = np.array([b.height * b.ball_mass for b in spec.bumps]) * wbar
    tails = np.cumsum(psi_terms[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = tails[1:] / tails[:-1]
    return FinitenessReport(psi_terms, np.cumsum(psi_terms), ratios,
                            vw_terms, np.cumsum(vw_terms))


# ----------------------------------------------------------------------
# inverse asymptotics


def _tau_of(t: float) -> float:
    return t * inv_B(1.0 / t)


@dataclass(frozen=True)
class AsymptoticsRow:
    t: float
    tau: float
    dev_sqrt: float        # |tau / sqrt(2 t) - 1|
    dev_log: float         # |tau * ln(1/t) - 1|
    dev_log_two_term: float  # after subtracting lnln(1/t)/ln(1/t)


def binv_asymptotics(t_grid: Sequence[float]) -> List[AsymptoticsRow]:
    """tau(t) = t B^{-1}(1/t) against its large-t and small-t laws.

    Large t: tau ~ sqrt(2 t). Small t: tau * ln(1/t) = 1 plus a
    lnln(1/t)/ln(1/t) correction and a genuinely O(1/ln(1/t)) remainder.
    """
    rows = []
    for t in t_grid:
        t = float(t)
        tau = _tau_of(t)
        dev_sqrt = abs(tau / math.sqrt(2.0 * t) - 1.0)
        if t < 1.0:
            L = math.log(1.0 / t)
            dev_log = abs(tau * L - 1.0)
            dev_two = abs(tau * L - 1.0 - math.log(L) / L)
        else:
            dev_log = math.inf
            dev_two = math.inf
        rows.append(AsymptoticsRow(t, tau, dev_sqrt, dev_log, dev_two))
    return rows


def lambert_w(v: float) -> float:
    """Principal branch solution of w e^w = v for v > 0.

    Newton iteration from ln v - ln ln v (large v) or v (small v); the
    converged residual is at the float rounding floor, i.e. relative to v.
    """
    if not (v > 0) or not math.isfinite(v):
        raise ValueError("v must be positive and finite")
    w = math.log(v) - math.log(math.log(v)) if v > math.e else v
    if v <= math.e:
        w = min(w, 1.0)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - v
        if abs(f) <= 1e-13 * max(1.0, v):
            break
        w -= f / (ew * (1.0 + w) - 0.5 * f * (2.0 + w) / (1.0 + w))
    return w


def phi_asymptotics(tau_grid: Sequence[float]) -> List[Tuple[float, float, float]]:
    """Invert tau = t B^{-1}(1/t) on a grid of small tau.

    Returns (tau, t, band) rows with band = ln(t e^{1/tau} / tau); the
    inversion uses bisection in ln t against the increasing map tau(t).
    """
    rows = []
    for tau in tau_grid:
        tau = float(tau)
        if not 0 < tau:
            raise ValueError("tau must be positive")

        def excess(log_t: float) -> float:
            return _tau_of(math.exp(log_t)) - tau

        # tau(e^lo) ~ 1/|lo|, so lo = -2/tau sits safely below the root
        lo, hi = min(-10.0, -2.0 / tau), 0.0
        if excess(hi) < 0:
            raise ValueError("tau out of the invertible range (too large)")
        if excess(lo) > 0:
            raise ValueError("tau out of the invertible range (too small)")
        t = math.exp(brentq(excess, lo, hi, xtol=1e-12, rtol=8.9e-16))
        band = math.log(t) + 1.0 / tau - math.log(tau)
        rows.append((tau, t, band))
    return rows
