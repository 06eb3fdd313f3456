import csv
from pathlib import Path

import pytest

from anacomp.cli import main, parse_input_spec
from anacomp.engine import Sine, Step

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"


def test_check_valid_is_silent(capsys):
    assert main(["check", str(CORPUS / "lowpass.apc")]) == 0
    out, err = capsys.readouterr()
    assert out == "" and err == ""


def test_check_reports_diagnostics(tmp_path, capsys):
    bad = tmp_path / "bad.apc"
    bad.write_text("patch p\nwire a.out -> b.in[0]\nend\n")
    assert main(["check", str(bad)]) == 1
    err = capsys.readouterr().err
    assert f"{bad}:2:6: error E_UNKNOWN_ID" in err


def test_compile_then_run_step(tmp_path):
    lp = tmp_path / "lp.apc"
    out = tmp_path / "out.csv"
    assert main(["compile", str(CORPUS / "lowpass.ode"), "-o", str(lp)]) == 0
    assert main(["run", str(lp), "--csv", str(out), "--in", "x=step:1", "--dur", "1"]) == 0
    rows = {r["t"]: float(r["y"]) for r in csv.DictReader(out.open())}
    assert rows["0.5"] == pytest.approx(0.63212, abs=1e-4)


def test_compile_errors(tmp_path, capsys):
    src = tmp_path / "bad.ode"
    src.write_text("system s\ninput x\neq: y'' + y*y = x\nend\n")
    assert main(["compile", str(src)]) == 1
    assert "E_NONLINEAR" in capsys.readouterr().err


def test_estimate(capsys):
    args = ["estimate", str(CORPUS / "vcf.apc"), "--device", str(ROOT / "models/sample.dev"),
            "--profile", str(ROOT / "models/sample.prof")]
    assert main(args) == 0
    assert capsys.readouterr().out.splitlines() == ["demand: capacitor=1, ota=2, switch=8",
                                                    "copies: 12"]


def test_wav_input_round_trip(tmp_path):
    tone = tmp_path / "tone.wav"
    echo = tmp_path / "echo.csv"
    assert main(["run", str(CORPUS / "vcf.apc"), "--in", "x=sine:50,5", "--dur", "0.05",
                 "--wav", str(tone), "--probe", "y"]) == 0
    assert main(["run", str(CORPUS / "vcf.apc"), "--in", f"x=wav:{tone}", "--dur", "0.05",
                 "--csv", str(echo)]) == 0
    assert len(echo.read_text().splitlines()) == 1 + 2400


def test_input_specs():
    assert parse_input_spec("x=step:2,0.1") == ("x", Step(2.0, 0.1))
    assert parse_input_spec("x=sine:440,3") == ("x", Sine(440.0, 3.0))
    assert main(["run", str(CORPUS / "vcf.apc"), "--in", "x=saw:1"]) == 2


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["run", str(CORPUS / "vcf.apc"), "--dur", "0"])
    assert e.value.code == 2
    assert main(["run", str(tmp_path / "missing.apc")]) == 1
