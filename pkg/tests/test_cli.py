import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mpea import cli
from mpea.errors import ScenarioError
from mpea.models import build_axial_symmetry
from mpea.scenario import BUNDLED, matrix_to_json, parse_scenario_text

JC = """
[model]
type = jaynes_cummings
n_max = 4
[evolution]
tau = 0.5
[initial]
rho_B = {state}
"""


def run_cli(*args):
    return cli.main([str(a) for a in args])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write(tmp_path, text, name="s.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.fixture(scope="module")
def outputs(tmp_path_factory):
    """Every subcommand on every bundled scenario it applies to, run twice."""
    root = tmp_path_factory.mktemp("cli")
    jobs = [(cmd, sc) for sc in BUNDLED for cmd in ("construct", "run", "estimate")]
    jobs.append(("trajectories", "axial_fig4"))
    done = {}
    for cmd, sc in jobs:
        for rep in (0, 1):
            out = root / f"{cmd}-{sc}-{rep}"
            assert run_cli(cmd, "--scenario", sc, "--out", out) == 0
        done[cmd, sc] = (root / f"{cmd}-{sc}-0", root / f"{cmd}-{sc}-1")
    return done


class TestBundled:
    def test_reruns_are_byte_identical(self, outputs):
        for a, b in outputs.values():
            names = sorted(p.name for p in a.iterdir())
            assert names == sorted(p.name for p in b.iterdir())
            for n in names:
                assert (a / n).read_bytes() == (b / n).read_bytes()

    def test_jc_spectrum_file(self, outputs):
        rows = read_csv(outputs["construct", "jc_fig3"][0] / "spectrum.csv")
        lam = [complex(float(r["lambda_re"]), float(r["lambda_im"])) for r in rows]
        mod = (3 + 2 * np.cos(np.sqrt(10) / 2)) / 5
        k = int(np.argmin([abs(abs(z) - mod) for z in lam]))
        assert abs(abs(lam[k]) - mod) < 1e-12
        assert abs(float(rows[k]["phase"]) + 1) < 1e-12
        assert all(r["degenerate"] == "0" for r in rows)

    def test_axial_spectrum_file(self, outputs):
        rows = read_csv(outputs["construct", "axial_fig4"][0] / "spectrum.csv")
        assert [r["degenerate"] for r in rows[:2]] == ["1", "1"]
        re = sorted(float(r["lambda_re"]) for r in rows)
        assert abs(re[0] + 0.951363) < 5e-7

    def test_vb_json_round_trip(self, outputs):
        from mpea.evolution import construct_vb
        dump = json.loads((outputs["construct", "axial_fig4"][0] / "vb.json").read_text())
        M = np.array(dump["matrix"])
        M = M[..., 0] + 1j * M[..., 1]
        ref = construct_vb(build_axial_symmetry(2.0), 1.0).in_basis()
        # 17 significant digits reproduce every double exactly
        np.testing.assert_array_equal(M, ref)
        assert dump["basis_labels"] == ["s", "t_plus", "t0", "t_minus"]

    def test_survival_csv(self, outputs):
        rows = read_csv(outputs["run", "axial_fig4"][0] / "survival.csv")
        assert [int(r["m"]) for r in rows] == list(range(11))
        c = np.cos(2 * np.sqrt(2))
        assert abs(float(rows[10]["P"]) - c**20) < 1e-12
        assert abs(float(rows[10]["F"]) - 1) < 1e-12

    def test_survival_csv_mixed(self, outputs):
        rows = read_csv(outputs["run", "jc_fig3"][0] / "survival.csv")
        F = [float(r["F"]) for r in rows]
        assert np.all(np.diff(F) > 0)
        assert abs(float(rows[-1]["P"]) - 0.25) < 1e-3

    def test_estimate_digits(self, outputs):
        est = json.loads((outputs["estimate", "jc_tplus_digits"][0] / "estimate.json").read_text())
        assert abs(est["f"] - 1 / (2 * np.pi)) <= 2.0**-15

    def test_trajectory_summary(self, outputs):
        out = outputs["trajectories", "axial_fig4"][0]
        summary = json.loads((out / "trajectories_summary.json").read_text())
        assert summary["n_traj"] == 100_000
        assert abs(summary["success_rate"] - summary["P_exact"]) < 4 * summary["binomial_sigma"]
        rows = read_csv(out / "trajectories.csv")
        assert len(rows) == 100_000
        assert np.mean([int(r["success"]) for r in rows]) == summary["success_rate"]


class TestValidation:
    @pytest.mark.parametrize("text, needle", [
        ("[model]\ntype = axial\n[evolution]\ntau = 1\n[bogus]\nx = 1\n", "bogus"),
        ("[model]\ntype = axial\ncolour = red\n[evolution]\ntau = 1\n", "colour"),
        ("[model]\ntype = axial\n[evolution]\ntau = fast\n", "evolution.tau"),
        ("[model]\ntype = axial\n[evolution]\ntau = nan\n", "evolution.tau"),
        ("[model]\ntype = pendulum\n[evolution]\ntau = 1\n", "model.type"),
        ("[model]\ntype = axial\n", "evolution"),
        ("[model\ntype = axial\n", "malformed"),
        (JC.format(state="t7"), "initial.rho_B"),
    ])
    def test_parser_names_the_offender(self, text, needle):
        with pytest.raises(ScenarioError, match=needle):
            parse_scenario_text(text)

    @pytest.mark.parametrize("cmd", ["construct", "run", "estimate", "trajectories"])
    def test_bad_key_exits_2_without_output(self, tmp_path, cmd, capsys):
        sc = write(tmp_path, JC.format(state="t_plus") + "[run]\nm_max = 3\nspeed = 9\n")
        out = tmp_path / "out"
        assert run_cli(cmd, "--scenario", sc, "--out", out) == 2
        assert not out.exists()
        assert "run.speed" in capsys.readouterr().err

    def test_unseeded_trajectories(self, tmp_path):
        sc = write(tmp_path, JC.format(state="t_plus") + "[run]\nm = 3\n")
        out = tmp_path / "out"
        assert run_cli("trajectories", "--scenario", sc, "--out", out) == 2
        assert not out.exists()
        assert run_cli("trajectories", "--scenario", sc, "--out", out, "--seed", 3) == 0

    def test_unseeded_sampled_estimate(self, tmp_path):
        sc = write(tmp_path, JC.format(state="t_plus") + "[readout]\nmethod = qst\ncopies = 100\n")
        out = tmp_path / "out"
        assert run_cli("estimate", "--scenario", sc, "--out", out, "--mode", "sample") == 2
        assert not out.exists()

    def test_run_needs_length(self, tmp_path):
        sc = write(tmp_path, JC.format(state="t_plus"))
        assert run_cli("run", "--scenario", sc, "--out", tmp_path / "o") == 2

    def test_missing_scenario(self, tmp_path):
        assert run_cli("run", "--scenario", tmp_path / "nope.ini") == 2


class TestRuntime:
    def test_zero_length_run(self, tmp_path):
        sc = write(tmp_path, JC.format(state="maximally_mixed") + "[run]\nm_max = 0\n")
        assert run_cli("run", "--scenario", sc, "--out", tmp_path / "o") == 0
        rows = read_csv(tmp_path / "o" / "survival.csv")
        assert len(rows) == 1
        assert float(rows[0]["P"]) == 1.0

    def test_insufficient_contrast_names_bit(self, tmp_path, capsys):
        sc = write(tmp_path, JC.format(state="t_plus")
                   + "[readout]\nmethod = mqft\nn_bits = 4\ncopies = 100\nqk_mode = blind\n"
                   "[sampling]\nmode = sample\nseed = 1\n")
        out = tmp_path / "o"
        assert run_cli("estimate", "--scenario", sc, "--out", out) == 1
        assert "failing bit index 4" in capsys.readouterr().err
        assert not out.exists()

    def test_sampled_qst(self, tmp_path):
        sc = write(tmp_path, JC.format(state="t_plus")
                   + "[readout]\nmethod = qst\ncopies = 1000000\n[sampling]\nmode = sample\nseed = 11\n")
        assert run_cli("estimate", "--scenario", sc, "--out", tmp_path / "o") == 0
        est = json.loads((tmp_path / "o" / "estimate.json").read_text())
        assert abs(est["b"] - 0.5177) < 0.01

    def test_generic_model_from_json(self, tmp_path):
        sysm = build_axial_symmetry(2.0)
        files = {
            "ha.json": np.zeros((2, 2)), "hb.json": np.zeros((4, 4)), "hab.json": sysm.H,
        }
        for name, m in files.items():
            (tmp_path / name).write_text(json.dumps(matrix_to_json(m)))
        (tmp_path / "phi.json").write_text(json.dumps([[0, 0], [1, 0]]))
        sc = write(tmp_path, "[model]\ntype = generic\nh_A = ha.json\nh_B = hb.json\nh_AB = hab.json\n"
                             "phi_A = phi.json\n[evolution]\ntau = 1\n")
        assert run_cli("construct", "--scenario", sc, "--out", tmp_path / "o") == 0
        rows = read_csv(tmp_path / "o" / "spectrum.csv")
        mods = sorted(float(r["modulus"]) for r in rows)
        np.testing.assert_allclose(mods, [0.951363, 0.951363, 1, 1], atol=5e-7)
        dump = json.loads((tmp_path / "o" / "vb.json").read_text())
        assert dump["basis"] == "computational"

    def test_missing_json_file(self, tmp_path):
        sc = write(tmp_path, "[model]\ntype = generic\nh_A = ha.json\nh_B = hb.json\nh_AB = hab.json\n"
                             "phi_A = phi.json\n[evolution]\ntau = 1\n")
        assert run_cli("construct", "--scenario", sc, "--out", tmp_path / "o") == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mpea", "construct", "--scenario", "axial_fig4",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "spectrum.csv").is_file()
