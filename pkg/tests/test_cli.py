import csv
import io
import json
import subprocess
import sys
from fractions import Fraction

import mpmath
import pytest
from gmpy2 import mpc, mpfr

from zpl import cli
from zpl import probe as pb
from zpl import report as rp


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def cache_dir(tmp_path):
    return str(tmp_path / "cache")


def test_special_value(capsys):
    code, out, _ = run(["special-value", "--k", "1", "--base", "2"], capsys)
    assert code == 0
    doc = json.loads(out)
    with mpmath.workdps(50):
        expected = mpmath.pi**2 / (3 * mpmath.log(2) ** 2)
        assert abs(mpmath.mpf(doc["report"]["value"]) - expected) < mpmath.mpf(10) ** -37
    assert doc["meta"] == {"cache_keys": [], "format_version": 1, "precision_bits": 128, "runtime_ms": None}
    assert doc["params"] == {"b": 2, "bits": 128, "k": 1, "seed": 0}


def test_decimal_digits_follow_bits(capsys):
    _, out, _ = run(["special-value", "--k", "1", "--base", "2", "--bits", "64"], capsys)
    mantissa = json.loads(out)["report"]["value"].split("e")[0]
    assert len(mantissa.replace(".", "").lstrip("-")) == 19  # floor(64 log10 2)


def test_compare_report(capsys, cache_dir):
    code, out, _ = run(["compare", "--base", "2", "--alpha", "sqrt2", "--k", "1", "--N", "200", "--cache", cache_dir], capsys)
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"params", "report", "meta"}
    assert doc["params"]["alpha"] == "sqrt2" and doc["params"]["theta"] == "1/2"
    rep = doc["report"]
    assert set(rep) >= {"zeta_side", "bernoulli_side", "difference", "normalized", "h_count", "statistic"}
    assert float(rep["zeta_side"]["im"]) == 0
    assert rep["h_count"] == 7
    assert len(doc["meta"]["cache_keys"]) == 1
    assert out == json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def test_compare_k0_has_sine_fields(capsys):
    _, out, _ = run(["compare", "--base", "2", "--alpha", "sqrt2", "--k", "0", "--N", "64"], capsys)
    rep = json.loads(out)["report"]
    assert {"sine_side", "gn_envelope", "sine_defect"} <= set(rep)
    assert float(rep["sine_defect"]) <= float(rep["gn_envelope"])


def test_workers_do_not_change_bytes(tmp_path, capsys):
    outs = []
    for w in ("1", "2"):
        cache = tmp_path / f"c{w}"
        _, out, _ = run(["compare", "--base", "2", "--alpha", "3", "--k", "1", "--N", "150,300", "--workers", w, "--cache", str(cache)], capsys)
        outs.append(out)
    assert outs[0] == outs[1]
    assert len(json.loads(outs[0])) == 2


def test_cached_rerun_is_identical(capsys, cache_dir):
    argv = ["normality", "--base", "2", "--alpha", "1", "--k", "2", "--N", "120", "--cache", cache_dir]
    first = run(argv, capsys)[1]
    second = run(argv, capsys)[1]
    assert first == second


def test_sweep_csv(capsys):
    code, out, _ = run(["sweep", "--base", "2", "--alpha", "1", "--k", "1", "--N", "50,100,200"], capsys)
    assert code == 0
    assert out.count("\r\n") == 4
    rows = list(csv.DictReader(io.StringIO(out)))
    assert next(csv.reader(io.StringIO(out)))[:6] == ["N", "statistic", "limit", "gap_to_limit", "normalized", "difference"]
    assert [r["N"] for r in rows] == ["50", "100", "200"]
    assert len({r["limit"] for r in rows}) == 1 and rows[0]["limit"].startswith("6.847")
    assert rows[0]["precision_bits"] == "128"


def test_sine_sum_reports_total_check(capsys):
    _, out, _ = run(["sine-sum", "--base", "2", "--alpha", "sqrt2", "--N", "256"], capsys)
    rep = json.loads(out)["report"]
    assert rep["within_envelope"] is True
    assert rep["h_count"] == 7


def test_bernoulli_and_zeta_sum(capsys):
    _, out, _ = run(["bernoulli-sum", "--base", "2", "--alpha", "1", "--k", "1", "--N", "1024"], capsys)
    rep = json.loads(out)["report"]
    assert rep["h_count"] == 9 and rep["boundary_hit"] is True
    with mpmath.workdps(50):
        assert abs(mpmath.mpf(rep["bernoulli_side"]) + 9 / (6 * mpmath.log(2))) < mpmath.mpf(10) ** -36
    _, out, _ = run(["zeta-sum", "--d", "7/5", "--theta", "1/2", "--k", "0", "--N", "10"], capsys)
    assert float(json.loads(out)["report"]["zeta_side"]["im"]) == 0


def test_ratio_presentation(capsys):
    _, out, _ = run(["bernoulli-sum", "--ratio", "3/2", "--k", "0", "--N", "1000"], capsys)
    doc = json.loads(out)
    assert doc["params"]["ratio"] == "3/2"
    assert doc["report"]["h_count"] == 17
    assert run(["bernoulli-sum", "--ratio", "4/2", "--N", "100"], capsys)[0] == 1


def test_digits_outputs(tmp_path, capsys):
    dump = tmp_path / "dump.txt"
    _, out, _ = run(["digits", "--base", "2", "--alpha", "1/3", "--N", "999", "--dump", str(dump)], capsys)
    rep = json.loads(out)["report"]
    assert rep["counts"] == [500, 500]
    assert rep["digits"] == "01" * 500
    assert dump.read_text().splitlines()[1:3] == ["1 0", "2 1"]
    _, out, _ = run(["digits", "--base", "10", "--alpha", "sqrt2", "--N", "7", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["a"] for r in rows] == [str(a) for a in range(10)]
    assert sum(int(r["count"]) for r in rows) == 8


def test_ergodic_discrepancy_gap_profile(capsys):
    _, out, _ = run(["ergodic", "--base", "2", "--alpha", "1/3", "--k", "0", "--N", "10"], capsys)
    assert json.loads(out)["report"]["average"] == "0"
    _, out, _ = run(["discrepancy", "--base", "2", "--alpha", "sqrt2", "--N", "100,1000"], capsys)
    docs = json.loads(out)
    assert float(docs[1]["report"]["star_discrepancy"]) < float(docs[0]["report"]["star_discrepancy"])
    _, out, _ = run(["gap-profile", "--base", "2", "--alpha", "sqrt2", "--N", "20", "--gamma", "0.2"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 20 and rows[0]["gamma"] == "2e-1"
    assert all(float(r["gap"]) > 0 for r in rows)


def test_probe_commands(capsys):
    code, out, _ = run(["probe-stationary", "--base", "2", "--m", "9", "--h", "-4"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["probe"] == "stationary_phase" and doc["pass"] is True
    assert set(doc) >= {"probe", "lhs", "rhs", "residual", "bound", "pass", "params", "meta"}
    code, out, _ = run(["probe-derivative", "--base", "2"], capsys)
    assert code == 0 and json.loads(out)["pass"] is True
    code, out, _ = run(["probe-em", "--base", "2", "--m", "3", "--N", "50", "--H-cut", "400"], capsys)
    assert code == 0 and json.loads(out)["pass"] is True
    code, out, _ = run(["probe-step1", "--base", "2", "--N", "20"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["params"]["M"] == 80 and set(doc["params"]) >= {"X", "V", "H"}


def test_probe_violation_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(pb, "C_AUDIT", 0)
    code, out, _ = run(["probe-derivative", "--base", "2"], capsys)
    assert code == 3
    assert json.loads(out)["pass"] is False


def test_usage_errors(capsys):
    code, _, err = run([], capsys)
    assert code == 1 and "usage:" in err
    code, _, err = run(["compare", "--base", "2", "--d", "1"], capsys)
    assert code == 1 and "usage:" in err
    code, _, err = run(["compare", "--frobnicate"], capsys)
    assert code == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["compare", "--base", "2", "--N", "1"],
        ["compare", "--base", "2", "--alpha", "sqrt4", "--N", "10"],
        ["compare", "--N", "10"],
        ["digits", "--base", "2", "--alpha", "-1", "--N", "10"],
        ["special-value", "--k", "1"],
        ["compare", "--base", "2", "--N", "ten"],
        ["cache", "vacuum", "--cache", "/tmp/zpl-cli-test-empty"],
        ["compare", "--base", "2", "--workers", "0", "--N", "10"],
        ["special-value", "--k", "1", "--base", "2", "--bits", "65530"],
    ],
)
def test_validation_exit_code(argv, capsys):
    assert run(argv, capsys)[0] == 1


def test_precision_exhaustion_exit_code(capsys):
    code, _, err = run(["special-value", "--k", "1", "--base", "2", "--bits", "65500"], capsys)
    assert code == 2 and "zpl:" in err


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"k": 3, "base": 2, "bits": 64}))
    _, out, _ = run(["special-value", "--config", str(cfg)], capsys)
    doc = json.loads(out)
    assert doc["params"]["k"] == 3 and doc["meta"]["precision_bits"] == 64
    _, out, _ = run(["special-value", "--config", str(cfg), "--k", "1"], capsys)
    assert json.loads(out)["params"]["k"] == 1
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert run(["special-value", "--config", str(cfg)], capsys)[0] == 1


def test_out_file_and_timing(tmp_path, capsys):
    target = tmp_path / "r.csv"
    code, out, _ = run(["sweep", "--base", "2", "--N", "20,40", "--out", str(target)], capsys)
    assert code == 0 and out == ""
    assert target.read_bytes().count(b"\r\n") == 3
    _, out, _ = run(["special-value", "--k", "1", "--base", "2", "--timing"], capsys)
    assert isinstance(json.loads(out)["meta"]["runtime_ms"], int)


def test_cache_subcommand(tmp_path, capsys):
    cache = str(tmp_path / "c")
    run(["compare", "--base", "2", "--N", "70", "--cache", cache], capsys)
    run(["compare", "--base", "2", "--N", "30", "--bits", "64", "--cache", cache], capsys)
    _, out, _ = run(["cache", "stats", "--cache", cache, "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert sorted(int(r["records"]) for r in rows) == [30, 70]
    _, out, _ = run(["cache", "vacuum", "--keep-bits", "128", "--cache", cache], capsys)
    assert len(json.loads(out)["removed"]) == 1


def test_env_cache_default(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ZPL_CACHE_DIR", str(tmp_path / "env"))
    _, out, _ = run(["compare", "--base", "2", "--N", "20"], capsys)
    assert len(json.loads(out)["meta"]["cache_keys"]) == 1
    assert list((tmp_path / "env").glob("grid_*.jsonl"))


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "zpl", "special-value", "--k", "2", "--base", "3"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["report"]["value"] == "0"


def test_report_plain_and_csv():
    digits = 5
    assert rp.plain(mpc(mpfr("1.5"), mpfr("-2")), digits) == {"re": "1.5e+0", "im": "-2e+0"}
    assert rp.plain(Fraction(1, 3), digits) == "3.3333e-1"
    assert rp.plain([True, None, 3], digits) == [True, None, 3]
    rec = rp.record({"N": 4}, {"z": mpc(1, 2), "xs": [1, 2], "flag": False}, 64)
    text = rp.to_csv([rec], ["N"])
    header, row = list(csv.reader(io.StringIO(text)))
    data = dict(zip(header, row))
    assert header[0] == "N"
    assert data["z_re"] == "1e+0" and data["z_im"] == "2e+0" and data["xs"] == "1;2" and data["flag"] == "false"
    assert data["format_version"] == "1" and data["runtime_ms"] == ""
    with pytest.raises(ValueError):
        rp.render([rec], "xml")
