import io
import subprocess
import sys

import numpy as np
import pytest

from lattice_semiconj.cli import RunConfig, UsageError, main
from lattice_semiconj.scgf import read_scgf
from lattice_semiconj.specfile import load_action_spec


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_spectral_cat(capsys):
    code, out, _ = run(capsys, "spectral", "-m", "2,1;1,1")
    assert code == 0
    assert "2.61803398875" in out and "0.38196601125" in out and "dim E = 1" in out


def test_spectral_unipotent_and_bad(capsys):
    assert "dim E = 0" in run(capsys, "spectral", "-m", "1,1;0,1")[1]
    code, _, err = run(capsys, "spectral", "-m", "1,0;0,2")
    assert code == 64 and "det" in err


def test_spectral_word_over_spec(capsys, tmp_path):
    run(capsys, "demo", "linear", "--out", tmp_path)
    code, out, _ = run(capsys, "spectral", "--spec", tmp_path / "action.spec", "--word", "ab")
    assert code == 0 and "5,2;2,1" in out


def test_certify(capsys, tmp_path):
    run(capsys, "demo", "linear", "--out", tmp_path)
    code, out, _ = run(capsys, "certify", tmp_path / "action.spec", "-L", 2)
    assert code == 0 and "ab" in out and "ba" in out
    rot = tmp_path / "rot.spec"
    rot.write_text("[action]\nn = 2\n[generator r]\nmatrix = 0,-1;1,0\n")
    assert run(capsys, "certify", rot, "-L", 6)[0] == 2
    assert run(capsys, "certify", rot, "-L", 0)[0] == 64


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 64
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 64


def test_run_config_validation():
    with pytest.raises(UsageError):
        RunConfig(res=1)
    with pytest.raises(UsageError):
        RunConfig(res=8, tol_tail=0)
    assert RunConfig(res=8).seed == 0x5EED


def test_demo_conjugation_pipe_solve(capsys, tmp_path, monkeypatch):
    code, spec_text, _ = run(capsys, "demo", "conjugation", "--res", 64, "--out", tmp_path / "demo")
    assert code == 0
    monkeypatch.setattr(sys, "stdin", io.StringIO(spec_text))
    out = tmp_path / "run"
    code, report, _ = run(capsys, "solve", "-", "--res", 64, "--out", out)
    assert code == 0 and "verdict: OK" in report
    phi2 = read_scgf(out / "phi2.scgf")
    truth = read_scgf(tmp_path / "demo" / "truth_phi2.scgf")
    assert np.abs(phi2.data - truth.data).max() < 1e-3
    assert (out / "residuals.csv").read_text().startswith("generator,sup_residual,budget,pass")
    text = (out / "report.txt").read_text()
    for key in ("run config:", "tol_tail=1e-08", "budget =", "induced map on H_1: 1,0; 0,1", "tau["):
        assert key in text
    code, vrep, _ = run(capsys, "verify", tmp_path / "demo" / "action.spec", out / "phi2.scgf", "--res", 64)
    assert code == 0 and "verdict: OK" in vrep


def test_demo_twist_solve_fails(capsys, tmp_path):
    # below about 96 samples per axis the interpolation budget hides the twist
    run(capsys, "demo", "twist", "--res", 128, "--out", tmp_path)
    code, report, _ = run(capsys, "solve", tmp_path / "action.spec", "--res", 128, "--out", tmp_path / "run")
    assert code == 3 and "verdict: NO_SEMICONJUGACY" in report
    assert ",false" in (tmp_path / "run" / "residuals.csv").read_text()


def test_zero_delta_solve(capsys, tmp_path):
    run(capsys, "demo", "linear", "--out", tmp_path)
    code, report, _ = run(capsys, "solve", tmp_path / "action.spec", "--res", 16, "--out", tmp_path / "run",
                          "--words", "ab,BA")
    assert code == 0 and "sup |phi2| = 0.000e+00" in report


def test_demo_spec_roundtrip(capsys, tmp_path):
    run(capsys, "demo", "conjugation", "--n", 3, "--res", 6, "--out", tmp_path)
    spec = load_action_spec(tmp_path / "action.spec")
    assert spec.n == 3 and len(spec.generators) == 6 and spec.relations
    assert (tmp_path / "truth_phi2.scgf").exists()


def test_console_script_installed(tmp_path):
    r = subprocess.run(["lattice-semiconj", "spectral", "-m", "1,0;0,2"], capture_output=True, text=True)
    assert r.returncode == 64
