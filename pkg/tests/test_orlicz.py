"""Young-function pair and discrete Orlicz norm machinery."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from negspec.orlicz import (NFunctionPair, WeightedSampleSpace, average_norm,
                            eval_A, eval_B, inv_A, inv_B, llogl_pair,
                            luxemburg_norm, orlicz_norm_dual, tau_norm)

from conftest import (dual_norm_bruteforce, dual_norm_gridsearch,
                      random_potential, random_space)


class TestEvaluators:
    def test_b_closed_forms(self):
        assert eval_B(0.0) == 0.0
        assert abs(eval_B(math.e - 1.0) - 1.0) < 1e-14
        assert abs(eval_B(1.0) - (2 * math.log(2) - 1)) < 1e-15

    def test_b_series_matches_highprec(self):
        # mpmath as the independent high-precision oracle across the
        # series/direct switchover; worst case is the direct branch just
        # above the cutoff, where cancellation costs ~2 eps / s
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 40
        for s in [1e-9, 1e-6, 5e-5, 9.9e-5, 1.1e-4, 1e-3]:
            exact = float((1 + mp.mpf(s)) * mp.log(1 + mp.mpf(s)) - mp.mpf(s))
            assert abs(eval_B(s) - exact) <= 5e-12 * exact

    def test_a_series_matches_highprec(self):
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 40
        for s in [1e-9, 5e-5, 1.1e-4, 1e-2]:
            exact = float(mp.e ** mp.mpf(s) - 1 - mp.mpf(s))
            assert abs(eval_A(s) - exact) <= 5e-12 * exact

    def test_nonfinite_rejected(self):
        for bad in (math.nan, math.inf):
            with pytest.raises(ValueError):
                eval_B(bad)
        with pytest.raises(ValueError):
            eval_A(-1.0)

    def test_inverse_examples(self):
        assert inv_B(0.0) == 0.0
        assert abs(inv_B(1.0) - (math.e - 1.0)) < 1e-12
        # frozen from a bisection solve of e^g - 1 - g = 1
        got = inv_A(1.0)
        assert abs(got - 1.1461932206205825) < 1e-10
        assert abs(eval_A(got) - 1.0) < 1e-10
        with pytest.raises(ValueError):
            inv_B(-0.5)

    @given(st.floats(min_value=-6.0, max_value=6.0))
    @settings(max_examples=60, deadline=None)
    def test_roundtrip_property(self, logs):
        s = 10.0**logs
        assert abs(inv_B(eval_B(s)) - s) <= 1e-10 * s
        if s <= 700.0:  # e^s overflows float64 beyond this
            assert abs(inv_A(eval_A(s)) - s) <= 1e-10 * s

    def test_pair_validates(self, pair):
        pair.validate()

    def test_young_inequality(self, pair):
        rng = np.random.default_rng(7)
        for _ in range(200):
            s, t = rng.uniform(0, 30, size=2)
            assert s * t <= pair.psi_eval(s) + pair.phi_eval(t) + 1e-9


class TestLuxemburg:
    def test_zero_and_empty(self, pair):
        sp = WeightedSampleSpace(np.array([1.0, 2.0]))
        assert luxemburg_norm(np.zeros(2), sp, pair) == 0.0
        assert luxemburg_norm(0.0, WeightedSampleSpace(np.empty(0)), pair) == 0.0

    def test_constant_on_unit_mass(self, pair):
        sp = WeightedSampleSpace(np.array([0.25, 0.75]))
        got = luxemburg_norm(3.0, sp, pair)
        assert abs(got - 3.0 / (math.e - 1.0)) < 1e-10

    def test_two_atom_defining_equation(self, pair):
        sp = WeightedSampleSpace(np.array([1.0, 1.0]))
        v = luxemburg_norm(np.array([1.0, 2.0]), sp, pair)
        assert abs(eval_B(1.0 / v) + eval_B(2.0 / v) - 1.0) < 1e-9


class TestDualNorm:
    def test_constant_unit(self, pair):
        sp = WeightedSampleSpace(np.array([0.5, 0.5]))
        got = orlicz_norm_dual(1.0, sp, pair, 1.0)
        assert abs(got - inv_A(1.0)) < 1e-10

    def test_zero_and_budget_errors(self, pair):
        sp = WeightedSampleSpace(np.array([1.0]))
        assert orlicz_norm_dual(0.0, sp, pair, 1.0) == 0.0
        with pytest.raises(ValueError):
            orlicz_norm_dual(1.0, sp, pair, 0.0)
        with pytest.raises(ValueError):
            tau_norm(1.0, sp, pair, -2.0)

    def test_matches_gridsearch_3atoms(self, pair):
        rng = np.random.default_rng(3)
        for _ in range(10):
            sp = WeightedSampleSpace(rng.uniform(0.2, 2.0, size=3))
            f = rng.uniform(0.1, 4.0, size=3)
            budget = float(rng.uniform(0.5, 3.0))
            ours = orlicz_norm_dual(f, sp, pair, budget)
            brute = dual_norm_gridsearch(f, sp, pair, budget)
            assert brute <= ours * (1 + 1e-9)
            assert abs(ours - brute) <= 2e-3 * ours  # grid is coarse

    def test_matches_slsqp_5atoms(self, pair):
        rng = np.random.default_rng(4)
        for _ in range(15):
            n = int(rng.integers(1, 6))
            sp = WeightedSampleSpace(rng.uniform(0.2, 2.0, size=n))
            f = random_potential(rng, n)
            budget = float(rng.uniform(0.5, 3.0))
            ours = orlicz_norm_dual(f, sp, pair, budget)
            brute = dual_norm_bruteforce(f, sp, pair, budget, rng)
            assert abs(ours - brute) <= 1e-6 * max(ours, 1e-12)

    def test_generic_pair_against_closed_form(self):
        # self-complementary quadratic pair: the dual solve must fall back
        # to numeric inversion of phi' and reproduce
        # sup{sum f g w : sum g^2/2 w <= b} = sqrt(2 b) * l2-norm(f; w)
        quad = NFunctionPair(
            psi_eval=lambda s: np.asarray(s, dtype=float) ** 2 / 2,
            psi_derivative=lambda s: np.asarray(s, dtype=float),
            psi_inverse=lambda y: math.sqrt(2 * y),
            phi_eval=lambda s: np.asarray(s, dtype=float) ** 2 / 2,
            phi_derivative=lambda s: np.asarray(s, dtype=float),
            phi_inverse=lambda y: math.sqrt(2 * y),
            name="quadratic")
        rng = np.random.default_rng(5)
        sp = WeightedSampleSpace(rng.uniform(0.5, 1.5, size=4))
        f = rng.uniform(0.2, 2.0, size=4)
        b = 1.7
        ours = orlicz_norm_dual(f, sp, quad, b)
        exact = math.sqrt(2 * b) * math.sqrt(float(np.dot(f * f, sp.weights)))
        assert abs(ours - exact) < 1e-9 * exact


class TestNormLemmas:
    def test_equivalence_sandwich(self, pair):
        rng = np.random.default_rng(11)
        for _ in range(30):
            sp = random_space(rng, 40)
            f = random_potential(rng, sp.n_atoms)
            lux = luxemburg_norm(f, sp, pair)
            dual = orlicz_norm_dual(f, sp, pair, 1.0)
            assert lux <= dual + 1e-9
            assert dual <= 2 * lux + 1e-9

    def test_elementary_sandwich(self):
        grid = np.concatenate([[0.0], np.geomspace(1e-9, 1e6, 200)])
        for s in grid:
            lnp = max(0.0, math.log(s)) if s > 0 else 0.0
            b = eval_B(float(s))
            assert 0.5 * s * lnp <= b + 1e-12
            assert b <= s + 2 * s * lnp + 1e-12

    def test_superadditivity_over_partitions(self, pair):
        rng = np.random.default_rng(12)
        for _ in range(20):
            sp = random_space(rng, 40, min_atoms=8)
            f = random_potential(rng, sp.n_atoms)
            parts = rng.integers(0, int(rng.integers(2, 9)), size=sp.n_atoms)
            whole = average_norm(f, sp, pair)
            total = 0.0
            for p in np.unique(parts):
                mask = parts == p
                total += average_norm(f[mask], sp.subspace(mask), pair)
            assert total <= whole + 1e-9

    def test_tau_scaling(self, pair):
        rng = np.random.default_rng(13)
        for _ in range(15):
            sp = random_space(rng, 30)
            f = random_potential(rng, sp.n_atoms)
            t1, t2 = rng.uniform(0.1, 10.0, size=2)
            n1 = tau_norm(f, sp, pair, t1)
            n2 = tau_norm(f, sp, pair, t2)
            assert min(1.0, t2 / t1) * n1 <= n2 + 1e-9
            assert n2 <= max(1.0, t2 / t1) * n1 + 1e-9

    def test_average_plain_equivalence(self, pair):
        rng = np.random.default_rng(14)
        for _ in range(15):
            n = int(rng.integers(2, 30))
            w = rng.uniform(0.1, 10.0 / n, size=n)
            sp = WeightedSampleSpace(w)
            f = random_potential(rng, n)
            plain = orlicz_norm_dual(f, sp, pair, 1.0)
            avg = average_norm(f, sp, pair)
            mass = sp.total_mass
            assert min(1.0, mass) * plain <= avg + 1e-9
            assert avg <= max(1.0, mass) * plain + 1e-9

    def test_l1_bound(self, pair):
        rng = np.random.default_rng(15)
        for _ in range(15):
            sp = random_space(rng, 30)
            f = random_potential(rng, sp.n_atoms)
            l1 = float(np.dot(f, sp.weights))
            assert l1 <= inv_B(1.0) * average_norm(f, sp, pair) + 1e-9

    def test_mass_rescaling_identity(self, pair):
        rng = np.random.default_rng(16)
        for _ in range(10):
            sp = random_space(rng, 20)
            f = random_potential(rng, sp.n_atoms)
            c = float(rng.uniform(0.2, 5.0))
            scaled = WeightedSampleSpace(sp.weights * c)
            lhs = orlicz_norm_dual(f, sp, pair, sp.total_mass)
            rhs = orlicz_norm_dual(f, scaled, pair, scaled.total_mass) / c
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, lhs)

    def test_average_vs_plain_plus_log_mass(self, pair):
        rng = np.random.default_rng(17)
        for _ in range(15):
            n = int(rng.integers(2, 30))
            w = rng.uniform(1.5 / n, 8.0 / n, size=n)  # mass > 1
            sp = WeightedSampleSpace(w)
            if sp.total_mass <= 1.0:
                continue
            f = random_potential(rng, n)
            avg = average_norm(f, sp, pair)
            plain = orlicz_norm_dual(f, sp, pair, 1.0)
            l1 = float(np.dot(f, sp.weights))
            assert avg <= plain + math.log(3.5 * sp.total_mass) * l1 + 1e-9
