import io
import subprocess
import sys

import pytest

from hbgfdi.cli import run
from hbgfdi.fsm import render_fsm
from hbgfdi.garr import render_garrs
from hbgfdi.tcg import export_dot, instantiate_mode


def call(*argv):
    buf = io.StringIO()
    code = run(list(argv), out=buf)
    return code, buf.getvalue()


def test_garr_derive_matches_library(analysis):
    code, out = call("garr", "derive", "--model", "builtin:three-tank")
    assert code == 0
    assert out == render_garrs(analysis.garrs)
    assert len(out.splitlines()) == 3


def test_fsm_matches_library(analysis):
    code, out = call("fsm", "--format", "csv")
    assert code == 0 and out.startswith(render_fsm(analysis.fsm, "csv"))


def test_fsm_single_mode():
    code, out = call("fsm", "--mode", "a1=0,a2=1")
    assert code == 0
    assert out.splitlines()[3].split() == ["R12", "0", "0", "0", "0", "0"]


def test_tcg_dot_matches_library(bg, qual):
    code, out = call("tcg", "export", "--mode", "0,0")
    assert code == 0
    assert out == export_dot(instantiate_mode(qual[0], {"a1": 0, "a2": 0}), bg.name)


def test_demo(tmp_path):
    code, out = call("demo", "--model", "builtin:three-tank", "--out", str(tmp_path))
    assert code == 0
    assert "isolation: {R12}" in out
    assert "coherence vector [1, 1, 0]" in out
    lines = out.splitlines()
    switch = next(l for l in lines if l.startswith("a1 switches"))
    detect = next(l for l in lines if l.startswith("detection"))
    k_switch = int(switch.split("sample ")[1].rstrip(")"))
    k_detect = int(detect.split("sample ")[1].rstrip(")"))
    assert 0 <= k_detect - k_switch <= 5
    assert (tmp_path / "residuals.csv").read_text().startswith("t,De1,De2,De3")


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("HBGFDI_OUT", str(tmp_path / "env"))
    from hbgfdi import cli

    args = cli.build_parser().parse_args(["simulate"])
    assert args.out == str(tmp_path / "env")


def test_outputs_are_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert call("residuals", "--out", str(tmp_path / sub), "--seed", "3")[0] == 0
        assert call("simulate", "--out", str(tmp_path / sub))[0] == 0
    for name in ("residuals.csv", "trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert call("tcg", "export")[1] == call("tcg", "export")[1]


def test_svg(tmp_path):
    pytest.importorskip("matplotlib")
    code, _ = call("residuals", "--format", "svg", "--out", str(tmp_path))
    assert code == 0
    first = (tmp_path / "residuals.svg").read_bytes()
    assert first.lstrip().startswith(b"<?xml")
    call("residuals", "--format", "svg", "--out", str(tmp_path))
    assert (tmp_path / "residuals.svg").read_bytes() == first


def test_thresholds_flow_through(tmp_path):
    code, out = call("diagnose", "quant", "--eps1", "100", "--eps2", "100", "--eps3", "100")
    assert code == 0 and "no fault detected" in out


def test_qualitative_commands():
    code, out = call("qual", "fsm")
    assert code == 0 and "# mode 4 (a1=0, a2=0)" in out and "R12+" in out
    code, out = call("diagnose", "qual", "--mode", "1,0", "--observed", "De1=0+,De2=0-,De3=00")
    assert (code, out) == (0, "candidates: {R12+}\n")


def test_model_check(tmp_path):
    code, out = call("model", "check")
    assert code == 0 and out.startswith("three_tank: ok")
    bad = tmp_path / "bad.hbg"
    bad.write_text("junction 0 j\nbond 1 from=j to=nowhere\n")
    code, _ = call("model", "check", str(bad))
    assert code == 1


def test_dhbg_reports_retained_resistor():
    code, out = call("dhbg")
    assert code == 0 and "# retained sensor resistors: Rs_0_2" in out


@pytest.mark.parametrize(
    "argv, code",
    [
        (["frobnicate"], 2),
        (["fsm", "--format", "pdf"], 2),
        (["fsm", "--mode", "1"], 1),
        (["fsm", "--mode", "a1=2,a2=0"], 1),
        (["diagnose", "qual", "--observed", "De1=0+"], 1),
        (["diagnose", "qual", "--mode", "1,1", "--observed", "De9=0+"], 1),
        (["simulate", "--scenario", "/nonexistent.scn"], 1),
        (["garr", "derive", "--model", "/nonexistent.hbg"], 1),
    ],
)
def test_exit_codes(argv, code, capsys):
    assert call(*argv)[0] == code
    assert capsys.readouterr().err


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "hbgfdi.cli", "garr", "derive"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.count("GARR") == 3
