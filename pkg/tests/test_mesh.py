import math

import numpy as np
import pytest

import warpcap as wc
from warpcap import mesh as wm
from warpcap.errors import InputError


@pytest.fixture(scope="module")
def annulus10k():
    return wm.annulus_mesh(1.0, 10.0, 50, 100)


@pytest.fixture(scope="module")
def radial_cap(flat2):
    return wc.minimal_capacity(flat2, 1.0, 10.0, 0.1).value


class TestTriMesh:
    def test_rejects_flipped_triangle(self):
        verts = np.array([[0, 0], [1, 0], [0, 1]])
        with pytest.raises(InputError):
            wm.TriMesh(verts, np.array([[0, 2, 1]]))

    def test_rejects_interior_tag(self, annulus10k):
        verts = annulus10k.vertices
        tris = annulus10k.triangles
        tags = dict(annulus10k.boundary_tags)
        tags[150] = "K"      # second ring: not on the topological boundary
        with pytest.raises(InputError):
            wm.TriMesh(verts, tris, tags)

    def test_boundary_detection(self, annulus10k):
        b = annulus10k.boundary_vertices()
        assert len(b) == 200     # inner + outer rings

    def test_off_round_trip(self, tmp_path):
        mesh = wm.annulus_mesh(1.0, 3.0, 4, 12)
        wm.write_off(mesh, tmp_path / "m.off")
        wm.write_tags(mesh, tmp_path / "m.json")
        mesh2 = wm.load_mesh(tmp_path / "m.off", tmp_path / "m.json")
        assert np.allclose(mesh2.vertices, mesh.vertices)
        assert np.array_equal(mesh2.triangles, mesh.triangles)
        assert mesh2.tagged("K") == mesh.tagged("K")


class TestSolve:
    def test_uniform_boundary_data_zero_energy(self):
        # u = t everywhere: the constant state has (float-)zero energy
        mesh = wm.annulus_mesh(1.0, 3.0, 8, 24)
        asm = wm._P1Assembler(mesh)
        assert asm.energy(np.full(len(mesh.vertices), 0.7)) < 1e-25

    def test_annulus_against_radial_oracle(self, annulus10k, radial_cap):
        sol = wm.solve(annulus10k, 0.1, "dirichlet")
        assert abs(sol.J - radial_cap) / radial_cap < 0.02
        assert sol.diagnostics["monotone_J"]

    def test_dirichlet_values_pinned(self, annulus10k):
        sol = wm.solve(annulus10k, 0.1, "dirichlet")
        K = annulus10k.tagged("K")
        outer = annulus10k.tagged("outer")
        assert np.allclose(sol.u[K], 0.1)
        assert np.allclose(sol.u[outer], 0.0)

    def test_relaxed_within_box_and_below_dirichlet(self, annulus10k):
        d = wm.solve(annulus10k, 0.1, "dirichlet")
        r = wm.solve(annulus10k, 0.1, "relaxed")
        assert r.J <= d.J * (1 + 1e-12)
        assert np.all(r.u >= -1e-12) and np.all(r.u <= 0.1 + 1e-12)

    def test_comparison_principle(self, annulus10k):
        u1 = wm.solve(annulus10k, 0.05, "dirichlet").u
        u2 = wm.solve(annulus10k, 0.10, "dirichlet").u
        assert np.all(u1 <= u2 + 1e-10)

    def test_square_disk_bracketed_by_radial(self, flat2):
        mesh = wm.square_disk_mesh(2.0, (0.4, 0.2), 0.5, 0.08)
        sol = wm.solve(mesh, 0.05, "dirichlet")
        R1 = 2.0 - 0.4                      # inscribed ball around the disk
        R2 = math.hypot(2.4, 2.2)           # circumscribed
        lo = wc.minimal_capacity(flat2, 0.5, R2, 0.05).value
        hi = wc.minimal_capacity(flat2, 0.5, R1, 0.05).value
        assert lo <= sol.J <= hi

    def test_hessian_positive_semidefinite(self, rng):
        mesh = wm.annulus_mesh(1.0, 3.0, 6, 16)
        asm = wm._P1Assembler(mesh)
        for _ in range(3):
            u = rng.uniform(0, 1, len(mesh.vertices))
            H = asm.hessian(u).toarray()
            eig = np.linalg.eigvalsh(0.5 * (H + H.T))
            assert eig.min() > -1e-10


class TestBoundaryFlux:
    def test_constant_solution_zero_flux(self):
        mesh = wm.annulus_mesh(1.0, 3.0, 8, 24)
        asm = wm._P1Assembler(mesh)
        flux = wm._k_edge_flux(mesh, asm, np.full(len(mesh.vertices), 0.3))
        assert abs(math.fsum(f for _, f in flux)) < 1e-12

    def test_window_with_slack(self, annulus10k):
        sol = wm.solve(annulus10k, 0.1, "dirichlet")
        total, per_edge = wm.boundary_flux(sol, annulus10k)
        assert len(per_edge) == 100
        assert total >= (sol.J / 0.1) * (1 - 0.05)
        assert total <= (2 * sol.J / 0.1) * (1 + 0.05)

    def test_radial_first_integral_comparison(self, flat2):
        # finely graded mesh: flux approaches 2 pi q of the radial solution
        mesh = wm.annulus_mesh(1.0, 10.0, 160, 160)
        sol = wm.solve(mesh, 0.1, "dirichlet")
        total, _ = wm.boundary_flux(sol, mesh)
        q = wc.shoot_for_drop(flat2, 1.0, 10.0, 0.1).flux_q
        assert total == pytest.approx(2 * math.pi * q, rel=0.02)


class TestRefinement:
    def test_exact_zero_stays_zero(self):
        mesh = wm.annulus_mesh(1.0, 3.0, 4, 12)
        # height zero: the zero state is optimal at every level, exactly
        rep = wm.refine_and_extrapolate(mesh, 0.0, levels=2)
        assert rep["values"] == [0.0, 0.0]
        assert rep["extrapolated"] == 0.0

    def test_observed_order_at_least_1_5(self, flat2):
        mesh = wm.annulus_mesh(1.0, 10.0, 12, 25)
        rep = wm.refine_and_extrapolate(mesh, 0.1, levels=4,
                                        snap=wm.circle_snapper(1.0, 10.0))
        assert rep["order"] is not None and rep["order"] >= 1.5
        ref = wc.minimal_capacity(flat2, 1.0, 10.0, 0.1).value
        assert rep["extrapolated"] == pytest.approx(ref, rel=0.005)

    def test_off_center_extrapolation_stable(self):
        mesh = wm.square_disk_mesh(2.0, (0.4, 0.2), 0.5, 0.16)
        rep = wm.refine_and_extrapolate(mesh, 0.05, levels=3)
        v = rep["values"]
        assert abs(v[-1] - v[-2]) / v[-1] < 0.005

    def test_refine_preserves_tags_and_orientation(self):
        mesh = wm.annulus_mesh(1.0, 3.0, 4, 12)
        fine = wm.refine(mesh, snap=wm.circle_snapper(1.0, 3.0))
        assert len(fine.triangles) == 4 * len(mesh.triangles)
        assert fine.areas().min() > 0
        K = fine.tagged("K")
        assert len(K) == 2 * len(mesh.tagged("K"))
        radii = np.hypot(*fine.vertices[K].T)
        assert np.allclose(radii, 1.0)
