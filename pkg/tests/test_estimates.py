import math

import numpy as np
import pytest

import warpcap as wc
from warpcap.errors import InputError, PreconditionError, ResolutionError
from warpcap.estimates import (_GrowingVolume, capacity_sandwich_audit,
                               mollify, slice_identity_check)


class TestPhiIntegral:
    def test_flat3_closed_form(self, flat3):
        # int_r^inf s / ((4/3) pi s^3) ds = 3 / (4 pi r)
        for r in (1.0, 2.0):
            cert = wc.phi_integral(flat3, r)
            assert cert.verdict == "convergent"
            assert cert.value == pytest.approx(3 / (4 * math.pi * r), rel=1e-4)

    def test_flat2_divergent(self, flat2):
        assert wc.phi_integral(flat2, 1.0).verdict == "divergent"

    def test_volume_table_override_matches_trapezoid_oracle(self, flat3):
        # caller-supplied volume table: exact closed-form volumes
        def vol(s):
            return 4 * math.pi * s ** 3 / 3

        cert = wc.phi_integral(flat3, 1.0, volume=vol, tol=1e-10)
        s = np.geomspace(1.0, cert.r_cut, 2_000_001)
        oracle = np.trapezoid(s / (4 * math.pi * s ** 3 / 3), s)
        assert cert.value == pytest.approx(oracle, abs=1e-8)

    def test_phi_decreasing_convex(self, flat3):
        rs = np.array([1.0, 1.5, 2.0, 2.5, 3.0])
        vol = _GrowingVolume(flat3, 16.0)
        phis = np.array([wc.phi_integral(flat3, r, volume=vol, tol=1e-9).value
                         for r in rs])
        assert np.all(np.diff(phis) < 0)
        assert np.all(np.diff(phis, 2) > 0)


class TestMollify:
    def test_constant_reproduced_exactly(self):
        field = np.full(801, 2.5)
        res = mollify(field, 1 / 800, 0.1)
        assert np.max(np.abs(res.smoothed - 2.5)) < 1e-12
        assert res.ratio_gradient < 1e-10 and res.ratio_energy == 0.0

    def test_never_increases_sup_norm(self, rng):
        field = rng.standard_normal(1201)
        res = mollify(field, 1 / 1200, 0.05)
        assert np.max(np.abs(res.smoothed)) <= np.max(np.abs(field)) + 1e-12

    def test_step_ratio_bounded_across_lambda(self):
        n = 3201
        xs = np.linspace(0, 1, n)
        field = np.where(xs < 0.5, 0.0, 1.0)
        ratios = [mollify(field, 1 / (n - 1), lam).ratio_gradient
                  for lam in (0.05, 0.1, 0.2, 0.3)]
        assert max(ratios) < 1.2       # single constant across the sweep

    def test_energy_ratio_stable_under_refinement(self):
        for n in (801, 1601):
            xs = np.linspace(0, 1, n)
            bump = np.exp(-((xs - 0.5) / 0.1) ** 2)
            r = mollify(bump, 1 / (n - 1), 0.15)
            assert 0.5 < r.ratio_energy < 3.0

    def test_2d_field(self):
        xs = np.linspace(0, 1, 161)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        f = np.exp(-(((X - 0.5) ** 2 + (Y - 0.5) ** 2) / 0.15 ** 2))
        res = mollify(f, 1 / 160, 0.1)
        assert res.smoothed.shape == f.shape
        assert 0 < res.ratio_energy < 5

    def test_resolution_guard(self):
        with pytest.raises(ResolutionError):
            mollify(np.zeros(32), 0.1, 0.2)


class TestFluxFromProfile:
    def test_zero_flux(self, flat2):
        prof = wc.shoot_for_drop(flat2, 1.0, 10.0, 0.0)
        rep = wc.flux_from_profile(flat2, prof)
        assert rep.mu_norm == 0.0 and rep.window_ok

    def test_window_on_flat_annulus(self, flat2):
        prof = wc.shoot_for_drop(flat2, 1.0, 10.0, 0.1)
        rep = wc.flux_from_profile(flat2, prof)
        assert rep.window_ok
        assert rep.mu_norm == pytest.approx(2 * math.pi * prof.flux_q)
        # near-harmonic regime sits at the top of the window
        assert rep.mu_norm > 1.8 * rep.cap_t / rep.t

    def test_window_on_detached_profile(self, exp_warp1):
        prof = wc.shoot_for_drop(exp_warp1, 0.5, 2.5, 3.0)
        rep = wc.flux_from_profile(exp_warp1, prof)
        assert rep.window_ok

    def test_slice_identity_attached(self, flat2):
        t = 0.3
        prof = wc.shoot_for_drop(flat2, 1.0, 10.0, t)
        for lam, lhs, rhs in slice_identity_check(flat2, prof,
                                                  [t / 4, t / 2, t]):
            assert rhs == pytest.approx(lhs, rel=1e-8)

    def test_slice_identity_with_walls(self, exp_warp1):
        t = 3.0
        prof = wc.shoot_for_drop(exp_warp1, 0.5, 2.5, t)
        assert prof.jump_outer > 0
        for lam, lhs, rhs in slice_identity_check(exp_warp1, prof,
                                                  [t / 4, t / 2, t]):
            assert rhs == pytest.approx(lhs, rel=1e-7)


class TestAsymptoticAudit:
    def test_flat3_ratio_constant(self, flat3):
        cls = wc.classify(flat3)
        audit = wc.asymptotic_audit(flat3, 1.0, 0.1, [2, 4, 8, 16, 32],
                                    classification=cls)
        spread = max(audit.ratios) - min(audit.ratios)
        assert spread / max(audit.ratios) < 0.01
        assert 1.0 <= audit.theta_star < 2.0
        assert audit.stable

    def test_parabolic_rejected(self, flat2):
        cls = wc.classify(flat2)
        with pytest.raises(PreconditionError):
            wc.asymptotic_audit(flat2, 1.0, 0.1, [2, 4], classification=cls)

    def test_radii_validated(self, flat3):
        cls = wc.classify(flat3)
        with pytest.raises(InputError):
            wc.asymptotic_audit(flat3, 1.0, 0.1, [1.0], classification=cls)


class TestSandwichAudit:
    def test_flat3(self, flat3):
        cls = wc.classify(flat3)
        rep = capacity_sandwich_audit(flat3, [1.0, 2.0, 4.0], 0.1,
                                      classification=cls)
        assert rep.upper_ok
        assert rep.vartheta_star >= 1.0
        assert rep.beta_star >= 2.0
        # vartheta stays put when r doubles (volume-doubling geometry)
        ratios = [(0.1 ** 2 / c) / p for c, p in zip(rep.cap_t_values,
                                                     rep.phi_values)]
        assert max(ratios) / min(ratios) < 1.5

    def test_small_t_quadratizes(self, flat3):
        # cap_t / (t^2/2 cap) -> 1 as t -> 0
        cap = wc.classical_capacity(flat3, 1.0, 64.0).value
        vals = []
        for t in (0.4, 0.1, 0.025):
            cap_t = wc.minimal_capacity(flat3, 1.0, 64.0, t).value
            vals.append(cap_t / (0.5 * t * t * cap))
        assert all(v < 1.0 for v in vals)
        assert vals[-1] > 0.999
        assert vals == sorted(vals)
