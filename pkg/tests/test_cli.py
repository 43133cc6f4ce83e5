import dataclasses
import io
import json
import math

import pytest

from bellforge import catalog
from bellforge.cli import EXIT_NO_VIOLATION, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main
from bellforge.inequality import SymmetricBellInequality


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


def test_verify_default():
    code, text = run("verify")
    data = json.loads(text)
    assert code == EXIT_OK
    assert data["ok"] is True and data["count"] == 9


def test_verify_only():
    code, text = run("verify", "--only", "W-444")
    assert code == EXIT_OK
    assert [e["id"] for e in json.loads(text)["entries"]] == ["W-444"]
    assert run("verify", "--only", "W-999")[0] == EXIT_USAGE


def test_verify_corrupted_catalog(tmp_path, capsys):
    entries = catalog.entries()
    bad = []
    for e in entries:
        if e.id == "W-444":
            m3 = dict(e.inequality.m3)
            m3[next(iter(m3))] += 1
            e = dataclasses.replace(e, inequality=SymmetricBellInequality(e.inequality.m, dict(e.inequality.m2), m3))
        bad.append(e)
    path = tmp_path / "bad.json"
    path.write_text(catalog.to_json(bad))
    code, text = run("verify", "--catalog", str(path))
    assert code == EXIT_VERIFY
    assert json.loads(text)["ok"] is False
    assert "FAILED W-444" in capsys.readouterr().err
    assert run("verify", "--catalog", str(tmp_path / "missing.json"))[0] == EXIT_USAGE


def test_synthesize_examples():
    code, text = run("synthesize", "--m", "3", "--slopes", "0,1,-1", "--state", "W")
    assert code == EXIT_OK
    data = json.loads(text)
    assert data["eta_crit"] == pytest.approx(0.6, abs=1e-9)
    assert data["id"] == "W-333"
    code, text = run("synthesize", "--m", "4", "--slopes", "1,-1,0.466715,-0.466715", "--state", "W")
    assert code == EXIT_OK
    assert json.loads(text)["eta_crit"] == pytest.approx(0.509036, abs=1e-6)


def test_synthesize_single_setting_exits_2():
    assert run("synthesize", "--m", "1")[0] == EXIT_NO_VIOLATION


def test_synthesize_angles_and_mixing():
    code, text = run("synthesize", "--angles", "2.28059,0.33432")
    assert code == EXIT_OK
    assert json.loads(text)["eta_crit"] == pytest.approx(0.83747, abs=1e-5)
    code, text = run("synthesize", "--m", "3", "--slopes", "0,1,-1", "--mixing", "auto")
    assert code == EXIT_OK
    assert json.loads(text)["eta_crit"] == pytest.approx((19 + math.sqrt(937)) / 96, abs=1e-8)


def test_synthesize_usage_errors():
    assert run("synthesize", "--m", "2")[0] == EXIT_USAGE
    assert run("synthesize", "--m", "3", "--slopes", "0,1")[0] == EXIT_USAGE
    assert run("synthesize", "--slopes", "0,1", "--angles", "1,2")[0] == EXIT_USAGE
    assert run("synthesize", "--angles", "1,2", "--state", "bogus")[0] == EXIT_USAGE


def test_optimize_table():
    code, text = run("optimize", "--family", "W-666")
    assert code == EXIT_OK
    rows = dict(line.split() for line in text.strip().split("\n"))
    assert float(rows["mu"]) == pytest.approx(0.495815, abs=1e-6)
    assert float(rows["nu"]) == pytest.approx(0.295435, abs=1e-6)
    assert float(rows["eta_crit"]) == pytest.approx(0.502417, abs=1e-6)
    assert all(len(v.split(".")[1]) == 6 for v in rows.values())


def test_optimize_json():
    code, text = run("optimize", "--family", "W-444", "--format", "json")
    data = json.loads(text)
    assert data["params"]["lambda"] == pytest.approx(0.466715, abs=1e-6)


def test_scan_m2():
    code, text = run("scan", "--m", "2", "--step", "0.157")
    assert code == EXIT_OK
    data = json.loads(text)
    assert data["best"]["eta_crit"] == pytest.approx(0.837, abs=1e-3)
    assert data["best"]["id"] == "W-222"


def test_scan_m1_has_no_violation():
    assert run("scan", "--m", "1", "--step", "0.5")[0] == EXIT_NO_VIOLATION


def test_curve_rows_and_determinism():
    args = ("curve", "--ineq", "SYM-222", "--grid", "0.6:1.0:0.05", "--starts", "6", "--seed", "5")
    code, a = run(*args)
    assert code == EXIT_OK
    assert len(a.strip().split("\n")) == 1 + 9
    assert run(*args)[1] == a


def test_grid_row_count():
    from bellforge.cli import UsageError, _grid

    assert len(_grid("0.6:1.0:0.01")) == 41
    with pytest.raises(UsageError):
        _grid("1:0")


def test_curve_usage_errors():
    assert run("curve", "--ineq", "W-999", "--grid", "0.6:1:0.1")[0] == EXIT_USAGE
    assert run("curve", "--ineq", "W-223", "--grid", "0.6:1:0.1")[0] == EXIT_USAGE


def test_catalog_commands():
    code, text = run("catalog")
    assert code == EXIT_OK and len(text.strip().split("\n")) == 9
    assert json.loads(run("catalog", "--id", "SYM-333")[1])["id"] == "SYM-333"
    assert catalog.from_json(run("catalog", "--dump")[1]) == catalog.entries()
    assert run("catalog", "--id", "nope")[0] == EXIT_USAGE


def test_parser_errors():
    assert run()[0] == EXIT_USAGE
    assert run("frobnicate")[0] == EXIT_USAGE
    assert run("--help")[0] == EXIT_OK
