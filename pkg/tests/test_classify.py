import math

import pytest

import warpcap as wc
from warpcap.classify import neck_minima
from warpcap.errors import PreconditionError


@pytest.fixture(scope="module")
def prop26_cls(prop26_n2):
    return wc.classify(prop26_n2, r0=1.0)


class TestClassify:
    def test_flat2(self, flat2):
        cls = wc.classify(flat2)
        assert (cls.parabolicity, cls.m_parabolicity) == ("parabolic",
                                                          "m_parabolic")

    def test_flat3(self, flat3):
        cls = wc.classify(flat3)
        assert (cls.parabolicity, cls.m_parabolicity) == ("nonparabolic",
                                                          "m_nonparabolic")
        ids = [cid for cid, _ in cls.evidence]
        assert "exhaustion_sequence" in ids

    def test_prop26(self, prop26_cls):
        assert prop26_cls.parabolicity == "nonparabolic"
        assert prop26_cls.m_parabolicity == "m_parabolic"
        ids = [cid for cid, _ in prop26_cls.evidence]
        assert "neck_cutoff_sequence" in ids

    def test_prop26_cutoff_bounds_decreasing(self, prop26_cls):
        payload = dict(prop26_cls.evidence)["neck_cutoff_sequence"]
        bounds = [b for _, b in payload["bounds"]]
        assert all(b < a for a, b in zip(bounds, bounds[1:]))
        assert bounds[-1] < 1e-3

    def test_exp_warp_parabolic(self, exp_warp1):
        cls = wc.classify(exp_warp1)
        assert (cls.parabolicity, cls.m_parabolicity) == ("parabolic",
                                                          "m_parabolic")

    def test_cylinder(self):
        cls = wc.classify(wc.build("cylinder"))
        assert (cls.parabolicity, cls.m_parabolicity) == ("parabolic",
                                                          "m_parabolic")

    def test_staircase(self, staircase):
        cls = wc.classify(staircase, r0=1.0, inner_r=1.5, t=1.0,
                          neck_scan_max=2.0 ** 14)
        assert cls.parabolicity == "nonparabolic"
        assert cls.m_parabolicity == "m_nonparabolic"

    def test_superlinear_decay_certificate(self):
        m = wc.manifold_from_json(
            {"n": 2, "warp": {"kind": "expr", "expr": "exp(-r * r)"},
             "origin": "open"})
        cls = wc.classify(m, volume_check=False)
        # parabolic already implies it; force past (a) by checking (c) directly
        from warpcap.classify import _superlinear_ratios
        assert _superlinear_ratios(m, 1.0) is not None
        assert cls.m_parabolicity == "m_parabolic"

    def test_consistency_never_parabolic_and_m_nonparabolic(self, flat2,
                                                            flat3, exp_warp1):
        for m in (flat2, flat3, exp_warp1):
            cls = wc.classify(m)
            assert not (cls.parabolicity == "parabolic"
                        and cls.m_parabolicity == "m_nonparabolic")

    def test_json_round_trip(self, flat3):
        doc = wc.classify(flat3).to_json()
        assert doc["parabolicity"] == "nonparabolic"
        assert isinstance(doc["evidence"], list) and doc["evidence"]


class TestSiVDNPSanity:
    @pytest.mark.parametrize("n", [2, 3])
    def test_doubling_warp_verdicts_coincide(self, n):
        # w comparable to r (doubling + Poincare hold): parabolic iff
        # M-parabolic, so the two verdicts agree in the obvious sense
        m = wc.manifold_from_json(
            {"n": n, "warp": {"kind": "expr",
                              "expr": "r * (1.5 + 0.5 * sin(log(1 + r)))"}})
        cls = wc.classify(m)
        assert cls.parabolicity != "undetermined"
        is_par = cls.parabolicity == "parabolic"
        is_mpar = cls.m_parabolicity == "m_parabolic"
        assert is_par == is_mpar


class TestParaKEInstantiation:
    def test_other_heights_and_bigger_compacts_vanish(self, prop26_n2):
        # once M-parabolic is certified for one (t, K), exhaustion along the
        # necks vanishes for other heights and larger compacts too
        R_list = [k * math.pi for k in (2, 4, 8, 16, 32)]
        for t, r_a in ((1.0, 1.0), (2.5, 2.0), (0.3, 4.0)):
            res = wc.capacity_exhaustion(prop26_n2, r_a, t, R_list)
            seq = [v for _, v in res.diagnostics["sequence"]]
            assert seq[-1] < 0.3 * seq[0]
            bound = 2 * math.pi * 4 * prop26_n2.w(R_list[-1]) ** 1 * max(t, 1)
            assert seq[-1] <= bound * (1 + 1e-6)


class TestNeckSearch:
    def test_prop26_known_necks_used(self, prop26_n2):
        records = neck_minima(prop26_n2, 1.0, 100.0)
        ks = [round(r / math.pi) for r, _ in records]
        assert ks[0] == 1 and all(b > a for a, b in zip(ks, ks[1:]))
        for r, w in records:
            k = round(r / math.pi)
            expected = k * math.pi * (1 + k * math.pi) \
                * (1 + (k * math.pi) ** 2) ** -1.5
            assert w == pytest.approx(expected, rel=1e-10)

    def test_generic_scan_finds_synthetic_necks(self):
        m = wc.build(wc.ExampleSpec("neck_cylinder", {}))
        # forget the analytic necks: force the grid + refinement route
        class Masked:
            def __init__(self, w):
                self._w = w
                self.domain = w.domain

            def __call__(self, r):
                return self._w(r)

            def value(self, r):
                return self._w.value(r)

            def hint_points(self, lo, hi):
                return self._w.hint_points(lo, hi)

            def known_necks(self, lo, hi):
                return None

        masked = wc.WarpedManifold(n=2, warp=Masked(m.warp), origin="open")
        records = neck_minima(masked, 1.0, 40.0, per_decade=64)
        deep = [(r, w) for r, w in records if w < 0.9]
        assert len(deep) >= 3
        # the scan should land on the true dips at multiples of 3
        for r, w in deep[:3]:
            k = round(r / 3.0)
            assert abs(r - 3.0 * k) < 0.02
            assert w == pytest.approx(0.5 ** k, rel=1e-3)


class TestBoundaryTest:
    def test_cylinder_nondegenerate(self):
        rep = wc.nondegenerate_boundary_test(wc.build("cylinder"), 1.0)
        assert rep.verdict == "nondegenerate"
        assert rep.epsilon == pytest.approx(2 * math.pi, rel=1e-9)

    def test_prop26_degenerate(self, prop26_n2):
        rep = wc.nondegenerate_boundary_test(prop26_n2, 1.0)
        assert rep.verdict == "degenerate"
        assert rep.witness

    def test_staircase_nondegenerate(self, staircase):
        rep = wc.nondegenerate_boundary_test(staircase, 1.0, r_max=2.0 ** 25)
        assert rep.verdict == "nondegenerate"
        # the plateau floor is 1, so the sphere areas stay above ~2 pi
        assert rep.epsilon >= 2 * math.pi * 0.99


class TestSliceConvergence:
    def test_prop26_supremum_decays(self, prop26_n2, prop26_cls):
        R_list = [k * math.pi for k in range(1, 7)]
        sups = wc.slice_convergence(prop26_n2, 1.0, 1.0, R_list, 2.0,
                                    classification=prop26_cls)
        assert all(b <= a * (1 + 1e-9) for a, b in zip(sups, sups[1:]))
        assert sups[-1] < 0.05

    def test_tiny_annulus_huge_neck_zero_sup(self):
        m = wc.build(wc.ExampleSpec("neck_cylinder", {"depth_base": 0.02}))
        cls = wc.classify(m)
        sups = wc.slice_convergence(m, 1.0, 0.5, [3.0], 1.05,
                                    classification=cls)
        assert sups[0] < 2e-3

    def test_neck_cylinder_below_threshold_by_sixth_neck(self):
        m = wc.build(wc.ExampleSpec("neck_cylinder", {}))
        cls = wc.classify(m)
        R_list = [3.0 * k for k in range(1, 7)]
        sups = wc.slice_convergence(m, 1.0, 1.0, R_list, 2.0,
                                    classification=cls)
        assert sups[-1] < 0.05
        assert all(b <= a * (1 + 1e-9) for a, b in zip(sups, sups[1:]))

    def test_precondition_enforced(self, flat3):
        cls = wc.classify(flat3)
        with pytest.raises(PreconditionError):
            wc.slice_convergence(flat3, 1.0, 1.0, [4.0], 2.0,
                                 classification=cls)
