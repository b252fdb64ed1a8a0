"""Count bounds, weak-l1 diagnostics, coupling scans."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from negspec.bounds import (BoundConfig, corollary_bound, coupling_scan,
                            radial_bound, radial_bound_from_G,
                            theorem1_bound, threshold_sensitivity,
                            weak_l1_norm)
from negspec.decomposition import build_annuli
from negspec.measures import (PotentialField, Similarity, generate_ifs,
                              generate_polyline, regular_polygon)
from negspec.orlicz import inv_A


class TestTheorem1:
    def test_empty_sums(self):
        rep = theorem1_bound({0: 0.25, 1: 0.1}, {0: 0.01},
                             BoundConfig(A=100, c=0.01))
        assert rep.total == 1.0
        assert rep.contributing_G == () and rep.contributing_D == ()

    def test_arithmetic(self):
        rep = theorem1_bound({0: 4.0}, {}, BoundConfig())
        assert rep.total == 9.0
        rep = theorem1_bound({0: 1.0}, {2: 0.02}, BoundConfig(A=10, c=0.01))
        assert abs(rep.total - (1 + 4 + 10 * 0.02)) < 1e-12
        assert rep.contributing_G == (0,) and rep.contributing_D == (2,)

    def test_structural_split(self):
        rep = theorem1_bound({0: 3.0, 1: 0.5}, {0: 1.0}, BoundConfig(A=7))
        assert rep.total == 1.0 + rep.radial_term + rep.nonradial_term

    @given(st.dictionaries(st.integers(-5, 5),
                           st.floats(0, 10, allow_nan=False), max_size=8),
           st.integers(-5, 5), st.floats(0.01, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_G(self, gs, n, bump):
        cfg = BoundConfig()
        base = theorem1_bound(gs, {}, cfg).total
        gs2 = dict(gs)
        gs2[n] = gs2.get(n, 0.0) + bump
        assert theorem1_bound(gs2, {}, cfg).total >= base

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            BoundConfig(A=-1.0)


class TestRadialBound:
    def test_below_threshold(self):
        assert radial_bound({0: 0.046, 1: 0.01}) == 1.0

    def test_paper_constants(self):
        assert radial_bound({0: 1.0}) == 1.0 + 7.61
        assert radial_bound_from_G([1.0]) == 5.0

    def test_forms_consistent(self):
        # the G-indexed form dominates the calG form on the same data
        rng = np.random.default_rng(2)
        for _ in range(50):
            cal = rng.uniform(0, 3, size=6)
            gs = 2 * math.pi * cal
            assert radial_bound_from_G(list(gs)) >= radial_bound(list(cal)) - 1e-9


class TestCorollary:
    def setup_method(self):
        self.circ = generate_polyline(regular_polygon(1.0, 360), 200)

    def test_zero(self):
        V = PotentialField.constant(self.circ, 0.0)
        assert corollary_bound(V, self.circ, BoundConfig()) == 1.0

    def test_unit_circle_terms(self):
        V = PotentialField.constant(self.circ, 1.0)
        r = self.circ.radii()
        logterm = float(np.sum(V.values * np.log1p(r) * self.circ.weights))
        assert abs(logterm - 2 * math.pi * math.log(2)) < 1e-3
        # constant maximizer: norm = mass * invA(1/mass), frozen 3.2406...
        from negspec.orlicz import WeightedSampleSpace, llogl_pair, \
            orlicz_norm_dual
        space = WeightedSampleSpace(self.circ.weights)
        bnorm = orlicz_norm_dual(V.values, space, llogl_pair(), 1.0)
        mass = self.circ.total_mass
        assert abs(bnorm - mass * inv_A(1.0 / mass)) < 1e-9 * bnorm
        assert abs(bnorm - 3.2406528231324416) < 1e-3

    def test_dominates_theorem_with_fitted_B(self):
        V = PotentialField.constant(self.circ, 2.0)
        shifted = generate_polyline(regular_polygon(1.0, 360, (1.0, 0.0)), 100)
        Vs = PotentialField.constant(shifted, 2.0)
        sch = build_annuli(shifted, c0=2.0, c1=math.pi, alpha=1.0)
        from negspec.decomposition import d_sequence, g_sequence
        rep = theorem1_bound(g_sequence(Vs, shifted),
                             d_sequence(Vs, shifted, sch), BoundConfig())
        cor1 = corollary_bound(Vs, shifted, BoundConfig(B=1.0))
        bracket = cor1 - 1.0
        assert bracket > 0
        b_star = (rep.total - 1.0) / bracket
        cor = corollary_bound(Vs, shifted, BoundConfig(B=b_star * 1.0001))
        assert cor >= rep.total


class TestWeakL1:
    def test_examples(self):
        assert weak_l1_norm([1.0, 0.5, 1.0 / 3.0]) == 1.0
        assert weak_l1_norm([5.0]) == 5.0
        assert weak_l1_norm([3.0, 3.0]) == 6.0
        assert weak_l1_norm([]) == 0.0

    @given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1,
                    max_size=20), st.integers(-3, 12))
    @settings(max_examples=80, deadline=None)
    def test_dyadic_homogeneity_exact(self, a, p):
        g = 2.0**p
        assert weak_l1_norm([g * x for x in a]) == g * weak_l1_norm(a)

    def test_sqrt_sum_inequality(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(1, 40))
            a = rng.uniform(0, 5, size=n)
            c = float(rng.uniform(0.01, 1.0))
            lhs = sum(math.sqrt(x) for x in a if x > c)
            assert lhs <= (2.0 / math.sqrt(c)) * weak_l1_norm(a)


class TestCouplingScan:
    def setup_method(self):
        off = 2.0
        maps = [Similarity(1 / 3, (ox, oy)) for ox in (0.0, off)
                for oy in (0.0, off)]
        self.dust = generate_ifs(maps, 5)  # size-3 dust anchored at origin
        self.V = PotentialField.constant(self.dust, 1.0)
        self.scheme = build_annuli(self.dust)

    def test_gamma_half_exponent(self):
        gammas = np.geomspace(3e2, 3e4, 7)
        res = coupling_scan(self.V, self.dust, gammas, scheme=self.scheme)
        assert res.saturated_from is not None
        assert abs(res.g_exponent - 0.5) <= 0.05

    def test_rows_shape_and_monotone(self):
        gammas = [1.0, 4.0, 16.0]
        res = coupling_scan(self.V, self.dust, gammas, scheme=self.scheme)
        assert len(res.rows) == 3
        totals = [r.bound for r in res.rows]
        assert totals == sorted(totals)

    def test_bad_grid_rejected(self):
        with pytest.raises(ValueError):
            coupling_scan(self.V, self.dust, [2.0, 1.0])

    def test_threshold_sensitivity_decreasing(self):
        ds = {0: 0.5, 1: 0.2, 2: 0.05}
        rows = threshold_sensitivity(ds, A=10.0, c_grid=[0.01, 0.1, 0.3])
        vals = [v for _, v in rows]
        assert vals == sorted(vals, reverse=True)
