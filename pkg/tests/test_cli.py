import os

import numpy as np
import pytest

from subinf import cli, fieldio

LINE_CFG = """\
[problem]
geometry = euclidean:1
lower = 0
upper = 1
h = 0.125
boundary = linear:1

[solver]
k_max = 16
"""

PLANE_CFG = """\
[problem]
geometry = euclidean:2
lower = 0 0
upper = 1 1
h = 0.25
boundary = linear:1,-0.5

[solver]
k_max = 8
"""

H1_CFG = """\
[problem]
geometry = heisenberg1
lower = -1 -1 -1
upper = 1 1 1
h = 0.5
boundary = linear:1,0,0

[solver]
k_max = 8
"""


def write_cfg(tmp_path, text, name="prob.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_solve_writes_field_and_deterministic_manifest(tmp_path, capsys):
    cfg = write_cfg(tmp_path, LINE_CFG)
    out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    assert cli.main(["solve", cfg, "-o", out1]) == 0
    assert cli.main(["solve", cfg, "-o", out2]) == 0
    m1 = open(os.path.join(out1, "manifest.txt"), "rb").read()
    m2 = open(os.path.join(out2, "manifest.txt"), "rb").read()
    assert m1 == m2
    f1 = open(os.path.join(out1, "solution.field"), "rb").read()
    f2 = open(os.path.join(out2, "solution.field"), "rb").read()
    assert f1 == f2
    u = fieldio.read_field(os.path.join(out1, "solution.field"))
    x = u.domain.coords[:, 0]
    assert np.max(np.abs(u.values - x)) < 1e-5
    assert "converged" in capsys.readouterr().out


def test_solve_manifest_records_resolved_config(tmp_path):
    cfg = write_cfg(tmp_path, LINE_CFG)
    out = str(tmp_path / "run")
    assert cli.main(["solve", cfg, "-o", out, "--seed", "5"]) == 0
    text = open(os.path.join(out, "manifest.txt")).read()
    assert "config.seed = 5" in text
    assert "config.solver.k_max = 16" in text
    assert "config.integrand = squared_norm" in text
    assert "command = solve" in text
    assert "result.converged = true" in text


def test_solve_reports_nonconvergence_with_exit_3(tmp_path, capsys):
    text = PLANE_CFG.replace("boundary = linear:1,-0.5", "boundary = aronsson43")
    text = text.replace("k_max = 8", "k_schedule = 64\nmax_iterations = 1")
    cfg = write_cfg(tmp_path, text)
    assert cli.main(["solve", cfg, "-o", str(tmp_path / "out")]) == 3
    assert "NOT converged" in capsys.readouterr().out


def test_config_errors_exit_2_and_name_the_field(tmp_path, capsys):
    cfg = write_cfg(tmp_path, LINE_CFG.replace("euclidean:1", "torus"))
    assert cli.main(["solve", cfg, "-o", str(tmp_path / "out")]) == 2
    err = capsys.readouterr().err
    assert "field 'geometry'" in err
    assert "line 2" in err


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert cli.main(["solve", str(tmp_path / "nope.cfg")]) == 2
    assert "cannot read config" in capsys.readouterr().err


def test_distance_single_pair_and_table(tmp_path, capsys):
    cfg = write_cfg(tmp_path, PLANE_CFG)
    out = str(tmp_path / "d")
    code = cli.main(["distance", cfg, "-o", out,
                     "--source", "0,0", "--target", "1,0"])
    assert code == 0
    assert "d_cc = 1" in capsys.readouterr().out
    code = cli.main(["distance", cfg, "-o", out])
    assert code == 0
    lines = open(os.path.join(out, "distance.txt")).read().splitlines()
    assert lines[1] == "# x0 x1 d_cc"
    assert len(lines) == 2 + 25
    assert "distance.edges" in open(os.path.join(out, "manifest.txt")).read()


def test_distance_bad_point_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, PLANE_CFG)
    assert cli.main(["distance", cfg, "-o", str(tmp_path / "d"),
                     "--source", "0,0,0"]) == 2
    assert "--source" in capsys.readouterr().err


def test_convolve_writes_field_and_gap(tmp_path, capsys):
    cfg = write_cfg(tmp_path, PLANE_CFG)
    out = str(tmp_path / "c")
    assert cli.main(["convolve", cfg, "-o", out, "--eps", "0.05"]) == 0
    rep = fieldio.read_field(os.path.join(out, "sup_convolution.field"))
    assert rep.domain.dims == (5, 5)
    manifest = open(os.path.join(out, "manifest.txt")).read()
    assert "convolve.mode = sup" in manifest
    assert "convolve.eps = 0.05" in manifest
    assert cli.main(["convolve", cfg, "-o", out, "--eps", "0.05",
                     "--mode", "inf"]) == 0
    assert os.path.exists(os.path.join(out, "inf_convolution.field"))


def test_verify_comparison_passes(tmp_path, capsys):
    cfg = write_cfg(tmp_path, LINE_CFG)
    out = str(tmp_path / "v")
    assert cli.main(["verify", cfg, "-o", out, "--check", "comparison"]) == 0
    assert "comparison: margin" in capsys.readouterr().out
    assert "verify.passed = true" in open(os.path.join(out, "manifest.txt")).read()


def test_verify_viscosity_passes_on_line(tmp_path, capsys):
    cfg = write_cfg(tmp_path, LINE_CFG)
    out = str(tmp_path / "v")
    assert cli.main(["verify", cfg, "-o", out, "--check", "viscosity",
                     "--jets", "16"]) == 0
    assert "certified jets" in capsys.readouterr().out


def test_verify_subelliptic_and_amle(tmp_path, capsys):
    cfg = write_cfg(tmp_path, LINE_CFG)
    out = str(tmp_path / "v")
    assert cli.main(["verify", cfg, "-o", out, "--check", "subelliptic",
                     "--trials", "200"]) == 0
    assert cli.main(["verify", cfg, "-o", out, "--check", "amle",
                     "--trials", "5"]) == 0
    txt = capsys.readouterr().out
    assert "subelliptic" in txt and "amle" in txt


def test_table_full_dump_and_axis_line(tmp_path):
    cfg = write_cfg(tmp_path, PLANE_CFG)
    out = str(tmp_path / "t2")
    assert cli.main(["table", cfg, "-o", out]) == 0
    lines = open(os.path.join(out, "solution.txt")).read().splitlines()
    assert lines[1] == "# x0 x1 u"
    assert len(lines) == 2 + 25

    cfg3 = write_cfg(tmp_path, H1_CFG, name="h1.cfg")
    out3 = str(tmp_path / "t3")
    assert cli.main(["table", cfg3, "-o", out3, "--axis", "2"]) == 0
    lines = open(os.path.join(out3, "solution.txt")).read().splitlines()
    assert lines[1] == "# x2 u"
    assert len(lines) == 2 + 5
    assert cli.main(["table", cfg3, "-o", out3, "--axis", "7"]) == 2


def test_acceptance_only_subset(tmp_path, capsys):
    out = str(tmp_path / "acc")
    assert cli.main(["acceptance", "-o", out, "--only", "A1"]) == 0
    txt = capsys.readouterr().out
    assert "A1" in txt and "pass" in txt
    assert "1/1 criteria passed" in txt
    assert os.path.exists(os.path.join(out, "acceptance_summary.txt"))


def test_acceptance_unknown_name_exits_2(tmp_path, capsys):
    assert cli.main(["acceptance", "-o", str(tmp_path / "acc"),
                     "--only", "A99"]) == 2
    assert "A99" in capsys.readouterr().err


def test_acceptance_empty_config_dir_exits_2(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.main(["acceptance", "-o", str(tmp_path / "acc"),
                     "--configs", str(empty)]) == 2
    assert "config" in capsys.readouterr().err


def test_thread_cap_env(monkeypatch):
    for var in cli._THREAD_VARS:
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setenv("SUBINF_THREADS", "2")
    assert cli.thread_cap() == 2
    cli._apply_thread_cap()
    for var in cli._THREAD_VARS:
        assert os.environ[var] == "2"
    monkeypatch.setenv("SUBINF_THREADS", "owl")
    assert cli.thread_cap(default=3) == 3
    with pytest.raises(SystemExit):
        cli._apply_thread_cap()
