"""Shared fixtures and independent oracles used across the test modules."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize

from negspec.orlicz import NFunctionPair, WeightedSampleSpace, llogl_pair


@pytest.fixture(scope="session")
def pair() -> NFunctionPair:
    return llogl_pair()


def random_space(rng: np.random.Generator, max_atoms: int = 50,
                 min_atoms: int = 1) -> WeightedSampleSpace:
    n = int(rng.integers(min_atoms, max_atoms + 1))
    w = rng.uniform(0.05, 3.0, size=n)
    return WeightedSampleSpace(w)


def random_potential(rng: np.random.Generator, n: int,
                     zero_fraction: float = 0.2) -> np.ndarray:
    f = rng.uniform(0.0, 5.0, size=n)
    mask = rng.uniform(size=n) < zero_fraction
    f[mask] = 0.0
    if not np.any(f > 0):
        f[0] = 1.0
    return f


def dual_norm_bruteforce(f, space, pair, budget: float,
                         rng: np.random.Generator) -> float:
    """Independent constrained maximization of sum f g w over the Phi-ball.

    SLSQP ascent from several feasible starts; the objective is linear and
    the constraint set convex, so any interior-point style ascent finds
    the global maximum. Used as an oracle against the stationarity solve.
    """
    f = np.asarray(f, dtype=float)
    w = space.weights
    n = len(w)
    budget_fun = lambda g: budget - float(np.dot(pair.phi_eval(np.abs(g)), w))
    obj = lambda g: -float(np.dot(f * g, w))
    gmax = np.array([pair.phi_inverse(budget / wi) for wi in w])
    best = 0.0
    starts = [np.full(n, pair.phi_inverse(budget / space.total_mass))]
    for _ in range(3):
        starts.append(rng.uniform(0.0, 1.0, size=n) * gmax * 0.5)
    for g0 in starts:
        res = minimize(obj, g0, method="SLSQP",
                       bounds=[(0.0, gm) for gm in gmax],
                       constraints=[{"type": "ineq", "fun": budget_fun}],
                       options={"maxiter": 400, "ftol": 1e-14})
        if res.success:
            best = max(best, -res.fun)
    return best


def dual_norm_gridsearch(f, space, pair, budget: float,
                         levels: int = 4, pts: int = 12) -> float:
    """Pure grid refinement for <= 3 atoms; slower but assumption-free."""
    f = np.asarray(f, dtype=float)
    w = space.weights
    n = len(w)
    assert n <= 3
    lo = np.zeros(n)
    hi = np.array([pair.phi_inverse(budget / wi) for wi in w])
    best, best_g = 0.0, lo
    for _ in range(levels):
        axes = [np.linspace(lo[i], hi[i], pts) for i in range(n)]
        grids = np.meshgrid(*axes, indexing="ij")
        G = np.stack([g.ravel() for g in grids], axis=1)
        cost = np.stack([pair.phi_eval(G[:, i]) * w[i]
                         for i in range(n)], axis=1).sum(axis=1)
        val = G @ (f * w)
        val[cost > budget] = -np.inf
        k = int(np.argmax(val))
        if val[k] > best:
            best, best_g = float(val[k]), G[k]
        span = (hi - lo) / (pts - 1)
        lo = np.maximum(0.0, best_g - 2 * span)
        hi = best_g + 2 * span
    return best
