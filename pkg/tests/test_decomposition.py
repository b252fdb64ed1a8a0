"""Annular schemes, radialization, the G / calG / D sequences, covers."""

import math

import numpy as np
import pytest

from negspec.decomposition import (AnnularScheme, CoverBisectionError,
                                   RadialMeasure, build_annuli, calg_sequence,
                                   compute_calGn, compute_Dn, compute_Gn,
                                   d_sequence, equal_norm_cover, g_sequence,
                                   interval_bounds, intervals_containing,
                                   radialize, scheme_rows)
from negspec.measures import (AtomicMeasure, PotentialField, SquareRegion,
                              generate_lebesgue, generate_polyline,
                              regular_polygon)
from negspec.orlicz import WeightedSampleSpace, llogl_pair, orlicz_norm_dual


def two_atom_measure(distance: float) -> AtomicMeasure:
    pts = np.array([[0.0, 0.0], [distance, 0.0]])
    return AtomicMeasure(pts, np.array([1.0, 1.0]), alpha=1.0,
                         c0_est=1.0, c1_est=1.0)


class TestIntervals:
    def test_bounds(self):
        assert interval_bounds(0) == (-1.0, 1.0)
        assert interval_bounds(1) == (1.0, 2.0)
        assert interval_bounds(3) == (4.0, 8.0)
        assert interval_bounds(-2) == (-4.0, -2.0)

    def test_membership_with_shared_endpoints(self):
        assert intervals_containing(0.3) == [0]
        assert intervals_containing(1.0) == [0, 1]
        assert intervals_containing(2.0) == [1, 2]
        assert intervals_containing(-1.0) == [-1, 0]
        assert intervals_containing(-4.0) == [-3, -2]
        assert intervals_containing(3.0) == [2]


class TestAnnuli:
    def test_worked_example(self):
        # diam 2.5, c1/c0 = 1, alpha 1: ratio 2, m = 2, eta = 0.625
        m = two_atom_measure(2.5)
        sch = build_annuli(m, c0=1.0, c1=1.0, alpha=1.0)
        assert sch.ratio == 2.0
        assert sch.m == 2
        assert abs(sch.eta - 0.625) < 1e-12
        assert sch.eta > 1.0 / sch.ratio

    def test_exact_power_boundary(self):
        m = two_atom_measure(8.0)  # rho^3 with rho = 2
        sch = build_annuli(m, c0=1.0, c1=1.0, alpha=1.0)
        assert sch.m == 3
        assert abs(sch.eta - 1.0) < 1e-12
        lo, hi = sch.annulus_bounds(sch.m)
        assert abs(hi - m.diam_support) < 1e-9 * m.diam_support

    def test_lebesgue_ratio(self):
        m = generate_lebesgue((0, 0, 2, 2), 40)
        sch = build_annuli(m, c0=1.0, c1=1.0, alpha=2.0)
        assert abs(sch.ratio - math.sqrt(2.0)) < 1e-12

    def test_small_diameter_rejected(self):
        m = two_atom_measure(0.8)
        with pytest.raises(ValueError, match="rescale"):
            build_annuli(m, c0=1.0, c1=1.0, alpha=1.0)

    def test_origin_required(self):
        circ = generate_polyline(regular_polygon(1.5, 90), 40)
        with pytest.raises(ValueError, match="origin"):
            build_annuli(circ, c0=2.0, c1=2.0, alpha=1.0)

    def test_annuli_cover_positive_radii(self):
        m = generate_polyline([(0, 0), (3, 1)], 150)
        sch = build_annuli(m, c0=1.0, c1=1.2, alpha=1.0)
        covered = np.zeros(m.n_atoms, dtype=bool)
        for n in sch.n_range:
            covered |= sch.annulus_mask(m, n)
        assert np.all(covered[m.radii() > 0])

    def test_truncated_support_gets_eta_one(self):
        m = two_atom_measure(40.0)
        m.truncated = True
        sch = build_annuli(m, c0=1.0, c1=1.0, alpha=1.0)
        assert sch.eta == 1.0 and sch.m is None


class TestRadialize:
    def test_circle_merges_shells(self):
        circ = generate_polyline(regular_polygon(1.0, 360), 200)
        V = PotentialField.constant(circ, 1.0)
        nu = radialize(V, circ)
        assert nu.n_atoms <= 4  # chord symmetry leaves a couple of radii
        assert abs(nu.total_mass - circ.total_mass) < 1e-12

    def test_zero_potential_empty(self):
        circ = generate_polyline(regular_polygon(1.0, 60), 30)
        nu = radialize(PotentialField.constant(circ, 0.0), circ)
        assert nu.n_atoms == 0

    def test_total_mass_matches_sum(self):
        rng = np.random.default_rng(0)
        m = generate_polyline([(0, 0), (2, 1), (0.5, 2)], 60)
        V = PotentialField(rng.uniform(0, 3, m.n_atoms))
        nu = radialize(V, m)
        assert abs(nu.total_mass - float(V.values @ m.weights)) \
            <= 1e-12 * nu.total_mass


class TestSequences:
    def test_unit_circle_G0(self):
        circ = generate_polyline(regular_polygon(1.0, 360), 100)
        V = PotentialField.constant(circ, 1.0)
        assert abs(compute_Gn(V, circ, 0) - 2 * math.pi) < 1e-3

    def test_circle_e2_G1(self):
        circ = generate_polyline(regular_polygon(math.e**2, 720), 40)
        V = PotentialField.constant(circ, 1.0)
        got = compute_Gn(V, circ, 1)
        assert abs(got - 4 * math.pi * math.e**2) <= 1e-4 * got

    def test_zero_potential(self):
        circ = generate_polyline(regular_polygon(1.0, 60), 30)
        V = PotentialField.constant(circ, 0.0)
        assert all(compute_Gn(V, circ, n) == 0.0 for n in range(-3, 4))

    def test_radial_identity(self):
        rng = np.random.default_rng(1)
        cases = [
            generate_polyline(regular_polygon(1.0, 180), 60),
            generate_polyline(regular_polygon(math.e**2, 180), 10),
            generate_polyline([(0, 0), (2.5, 0.3)], 120),
            generate_lebesgue((0.1, 0.1, 2, 2), 30),
        ]
        for m in cases:
            for V in (PotentialField.constant(m, 1.0),
                      PotentialField(rng.uniform(0, 2, m.n_atoms))):
                nu = radialize(V, m)
                gs = g_sequence(V, m)
                cgs = calg_sequence(nu)
                for n in set(gs) | set(cgs):
                    g = gs.get(n, compute_Gn(V, m, n))
                    cg = compute_calGn(nu, n)
                    assert abs(g - 2 * math.pi * cg) <= 1e-12 * max(1.0, g)

    def test_single_radial_atom(self):
        nu = RadialMeasure(np.array([math.e**2]), np.array([1.0]))
        assert abs(compute_calGn(nu, 1) - 1 / math.pi) < 1e-15
        assert compute_calGn(RadialMeasure(np.empty(0), np.empty(0)), 1) == 0.0


class TestDn:
    def setup_method(self):
        self.m = generate_polyline(regular_polygon(1.0, 360, (1.0, 0.0)), 100)
        self.sch = build_annuli(self.m, c0=2.0, c1=math.pi, alpha=1.0)

    def test_zero_potential(self):
        V = PotentialField.constant(self.m, 0.0)
        assert compute_Dn(V, self.m, self.sch, 0) == 0.0

    def test_single_annulus_equals_whole(self):
        # all mass concentrated well inside one annulus
        pts = np.array([[0.9, 0.0], [0.95, 0.1], [0.97, -0.05]])
        m = AtomicMeasure(pts, np.array([0.4, 0.3, 0.3]), alpha=1.0)
        sch = AnnularScheme(eta=1.0, ratio=4.0, m=None, n_range=(0,),
                            c0=1.0, c1=1.0, alpha=1.0)
        V = PotentialField.constant(m, 2.0)
        dn = compute_Dn(V, m, sch, 0)
        space = WeightedSampleSpace(m.weights)
        whole = orlicz_norm_dual(V.values, space, llogl_pair(),
                                 space.total_mass)
        assert abs(dn - whole) < 1e-12

    def test_superadditivity_even_annuli(self):
        V = PotentialField.constant(self.m, 2.0)
        ds = d_sequence(V, self.m, self.sch)
        even = [n for n in self.sch.n_range if n % 2 == 0]
        mask = np.zeros(self.m.n_atoms, dtype=bool)
        for n in even:
            mask |= self.sch.annulus_mask(self.m, n)
        space = WeightedSampleSpace(self.m.weights[mask])
        union = orlicz_norm_dual(V.values[mask], space, llogl_pair(),
                                 space.total_mass)
        assert sum(ds[n] for n in even) <= union + 1e-9

    def test_scaling_shifts_indices(self):
        # same eta and ratio, atoms scaled by the ratio: annulus n of the
        # scaled measure holds the atoms of annulus n-1, with equal norms
        V = PotentialField.constant(self.m, 1.5)
        scaled = self.m.scaled(self.sch.ratio)
        ds = d_sequence(V, self.m, self.sch)
        sch2 = AnnularScheme(eta=self.sch.eta, ratio=self.sch.ratio,
                             m=None, n_range=tuple(n + 1 for n in
                                                   self.sch.n_range),
                             c0=self.sch.c0, c1=self.sch.c1,
                             alpha=self.sch.alpha)
        V2 = PotentialField.constant(scaled, 1.5)
        ds2 = d_sequence(V2, scaled, sch2)
        for n in self.sch.n_range:
            assert abs(ds[n] - ds2[n + 1]) <= 1e-10 * max(1.0, ds[n])

    def test_rows_export(self):
        V = PotentialField.constant(self.m, 1.0)
        rows = scheme_rows(V, self.m, self.sch)
        assert len(rows) == len(self.sch.n_range)
        for n, lo, hi, mass, g, d in rows:
            assert hi / lo == pytest.approx(self.sch.ratio)
            assert mass >= 0 and g >= 0 and d >= 0


class TestEqualNormCover:
    def setup_method(self):
        self.m = generate_polyline([(0, 0), (1, 0)], 600)
        self.theta = math.pi / 4  # segment charges theta = 0
        self.region = SquareRegion((0.5, 0.0), 1.2, 0.0)

    def test_single_square_branch(self):
        V = PotentialField.constant(self.m, 1.0)
        cover = equal_norm_cover(V, self.m, self.region, n=5,
                                 theta0=self.theta)
        assert cover.branch == "single"
        assert len(cover.squares) == 1
        inside = cover.squares[0].contains(self.m.points)
        assert np.all(inside)

    def test_zero_potential_degenerate(self):
        V = PotentialField.constant(self.m, 0.0)
        cover = equal_norm_cover(V, self.m, self.region, n=50,
                                 theta0=self.theta)
        assert cover.branch == "degenerate"
        assert len(cover.squares) == 1

    def test_equal_norm_cover_properties(self):
        V = PotentialField.constant(self.m, 1.0)
        n = 100
        cover = equal_norm_cover(V, self.m, self.region, n=n,
                                 theta0=self.theta, jump_tol=0.05)
        assert cover.branch == "cover"
        assert 1 <= len(cover.squares) <= n
        covered = np.zeros(self.m.n_atoms, dtype=bool)
        support_pts = {tuple(p) for p in self.m.points}
        for sq, norm in zip(cover.squares, cover.achieved_norms):
            assert tuple(sq.center) in support_pts
            covered |= sq.contains(self.m.points)
            # achieved norm within the atomic jump tolerance of the target
            assert abs(norm - cover.target_norm) <= 0.05 * cover.target_norm
        assert np.all(covered)
