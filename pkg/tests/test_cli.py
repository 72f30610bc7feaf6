import json
import math

import pytest

from warpcap import cli, mesh as wm


def run(args):
    return cli.main(args)


class TestCapacityCommand:
    def test_zero_height(self, tmp_path, capsys):
        code = run(["capacity", "--example", "flat2", "--ra", "1", "--rb",
                    "10", "--t", "0", "--out", str(tmp_path)])
        assert code == 0
        doc = json.loads((tmp_path / "capacity.json").read_text())
        assert doc["graph_area"][0]["value"] == 0.0
        assert "cap_0 = 0" in capsys.readouterr().out

    def test_sweep_csv_header(self, tmp_path):
        run(["capacity", "--example", "flat2", "--t", "0.05,0.1",
             "--out", str(tmp_path)])
        lines = (tmp_path / "capacity.csv").read_text().splitlines()
        assert lines[0].startswith("# warpcap 0.1.0 config=")
        assert lines[1] == "r_a,r_b,t,cap,method,interior,trace_inner,trace_outer"
        assert len(lines) == 5    # two heights + the classical row

    def test_manifold_file(self, tmp_path):
        doc = {"n": 3, "warp": {"kind": "expr", "expr": "r"}}
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc))
        code = run(["capacity", "--manifold", str(path), "--rb", "inf",
                    "--t", "0.1", "--out", str(tmp_path)])
        assert code == 0

    def test_missing_manifold_is_input_error(self, tmp_path):
        assert run(["capacity", "--out", str(tmp_path)]) == 1


class TestDeterminism:
    def test_same_config_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            run(["capacity", "--example", "flat2", "--t", "0.1",
                 "--out", str(out)])
        assert (a / "capacity.json").read_bytes() == \
            (b / "capacity.json").read_bytes()
        assert (a / "capacity.csv").read_bytes() == \
            (b / "capacity.csv").read_bytes()


class TestClassifyCommand:
    def test_flat2(self, tmp_path, capsys):
        assert run(["classify", "--example", "flat2",
                    "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "parabolic" in out
        doc = json.loads((tmp_path / "classification.json").read_text())
        assert doc["classification"]["parabolicity"] == "parabolic"


class TestProfileCommand:
    def test_export(self, tmp_path):
        assert run(["profile", "--example", "flat2", "--ra", "1", "--rb",
                    "10", "--t", "0.1", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "profile.csv").read_text().splitlines()
        assert lines[0] == "r,u,u_prime,w"
        side = json.loads((tmp_path / "profile.csv.json").read_text())
        assert side["flux_q"] > 0


class TestMeshCommand:
    def test_solve_from_files(self, tmp_path):
        mesh = wm.annulus_mesh(1.0, 5.0, 10, 24)
        wm.write_off(mesh, tmp_path / "m.off")
        wm.write_tags(mesh, tmp_path / "m.json")
        code = run(["mesh-capacity", "--mesh", str(tmp_path / "m.off"),
                    "--tags", str(tmp_path / "m.json"), "--t", "0.1",
                    "--out", str(tmp_path)])
        assert code == 0
        doc = json.loads((tmp_path / "mesh_capacity.json").read_text())
        assert doc["J"] > 0
        assert doc["flux_window"][0] <= doc["flux_total"] * 1.05


class TestAuditCommands:
    def test_scaling_pass(self, tmp_path):
        assert run(["audit", "scaling", "--example", "flat3", "--ra", "1",
                    "--rb", "10", "--t", "0.1", "--T", "0.5",
                    "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "audit_scaling.json").read_text())
        assert doc["passed"] is True

    def test_flux_pass(self, tmp_path):
        assert run(["audit", "flux", "--example", "flat2", "--ra", "1",
                    "--rb", "10", "--t", "0.1", "--out", str(tmp_path)]) == 0

    def test_scaling_random_sweep(self, tmp_path):
        assert run(["audit", "scaling", "--random", "2",
                    "--out", str(tmp_path)]) == 0


class TestReproduceCommand:
    def test_staircase_5_14(self, tmp_path, capsys):
        code = run(["reproduce", "staircase", "--i", "5", "--k", "14",
                    "--out", str(tmp_path)])
        assert code == 0
        doc = json.loads((tmp_path / "reproduce_staircase.json").read_text())
        assert doc["E_k"] == 2.0
        assert abs(doc["I_at_alpha_star"] - 3.0) < 1e-9
        assert doc["cap_steps"] <= doc["cap_bound"] * (1 + 1e-6)
        assert "E_k(alpha_k) = 2.0" in capsys.readouterr().out

    def test_staircase_small_i_reports_audit_failure(self, tmp_path):
        # the interior condition genuinely fails at i = 3; exit code says so
        assert run(["reproduce", "staircase", "--i", "3", "--k", "10",
                    "--out", str(tmp_path)]) == 2

    def test_exp_warp(self, tmp_path):
        assert run(["reproduce", "exp_warp", "--lam", "2.0",
                    "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "reproduce_exp_warp.json").read_text())
        assert doc["osc_sup"] <= math.pi / 4 + 1e-9

    def test_flat2(self, tmp_path):
        assert run(["reproduce", "flat2", "--out", str(tmp_path)]) == 0

    def test_unknown_example(self, tmp_path):
        assert run(["reproduce", "moebius", "--out", str(tmp_path)]) == 1


class TestMollifyCommand:
    def test_ratio_sweep(self, tmp_path):
        assert run(["mollify", "--demo", "step", "--dim", "1", "--grid",
                    "1601", "--lam", "0.1,0.2", "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "mollify.json").read_text())
        assert len(doc["rows"]) == 2
        assert all(r["ratio_energy"] < 5 for r in doc["rows"])


class TestAsymptoticsCommand:
    def test_flat3(self, tmp_path):
        code = run(["asymptotics", "--example", "flat3", "--ra", "1",
                    "--t", "0.1", "--R", "2,4,8", "--out", str(tmp_path)])
        assert code == 0
        doc = json.loads((tmp_path / "asymptotics.json").read_text())
        assert doc["stable"] is True
