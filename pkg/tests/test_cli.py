import csv
import json

import numpy as np
import pytest

from hsmuce.cli import main
from hsmuce.critical_values import cache_path


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def two_level(tmp_path):
    rng = np.random.default_rng(1)
    y = np.r_[rng.normal(0, 1, 60), rng.normal(4, 0.5, 40)]
    p = tmp_path / "obs.csv"
    p.write_text("time,value\n" + "".join(f"{i},{float(v)!r}\n" for i, v in enumerate(y)))
    return p


def test_fit_report(tmp_path, two_level, capsys):
    cache = tmp_path / "cache"
    out = tmp_path / "r.json"
    code, _, _ = run(["fit", two_level, "--column", "value", "--M", 2000, "--cache-dir", cache, "--out", out,
                      "--band-out", tmp_path / "band.csv"], capsys)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["k_hat"] == 1 and rep["inputs"]["n"] == 100 and rep["inputs"]["n_sim"] == 128
    assert len(rep["band"]) == 100 and len(rep["segment_values"]) == 2
    lo, hi = rep["confidence_interval_indices"][0]
    assert lo <= rep["change_indices"][0] <= hi
    assert cache_path(cache, "dyadic", 128, 2000, 0).exists()
    rows = list(csv.reader((tmp_path / "band.csv").open()))
    assert rows[0] == ["index", "x", "y_fit", "band_lo", "band_hi"] and len(rows) == 101
    assert float(rows[1][1]) == 0.01
    assert all(float(r[3]) <= float(r[2]) <= float(r[4]) for r in rows[1:])


def test_fit_deterministic(tmp_path, two_level, capsys):
    args = ["fit", two_level, "--column", "2", "--M", 2000, "--cache-dir", tmp_path]
    _, first, _ = run(args, capsys)
    _, second, _ = run(args, capsys)

    def strip(text):
        d = json.loads(text)
        d.pop("runtime_seconds")
        return d

    assert strip(first) == strip(second)
    assert [l for l in first.splitlines() if "runtime" not in l] == [
        l for l in second.splitlines() if "runtime" not in l]


def test_constant_column(tmp_path, capsys):
    p = tmp_path / "c.tsv"
    p.write_text("a\tb\n" + "1\t2.5\n" * 30)
    code, out, _ = run(["fit", p, "--column", "b", "--M", 500, "--cache-dir", tmp_path], capsys)
    assert code == 0 and json.loads(out)["k_hat"] == 0


def test_bands_shrink_with_alpha(tmp_path, two_level, capsys):
    widths = []
    for alpha in (0.1, 0.3, 0.5):
        code, out, _ = run(["fit", two_level, "--column", "value", "--alpha", alpha, "--M", 2000,
                            "--cache-dir", tmp_path], capsys)
        band = np.array([[float(v) for v in pair] for pair in json.loads(out)["band"]])
        widths.append(np.mean(band[:, 1] - band[:, 0]))
    assert widths[0] > widths[1] > widths[2]


@pytest.mark.parametrize("content,extra,code", [
    ("1\n2\nabc\n", [], 2),
    ("1\n2\nnan\n", [], 5),
    ("1\n2\ninf\n3\n", [], 5),
    ("1\n2\n3\n4\n", ["--alpha", "1.5"], 3),
    ("1\n2\n3\n4\n", ["--weights", "0.5,0.4"], 3),
    ("1\n2\n3\n4\n", ["--weights", "0.5,0.5", "--equal-weights"], 3),
    ("1\n2\n3\n4\n", ["--column", "missing"], 3),
    ("1\n2\n3\n4\n", ["--weights", "a,b"], 2),
])
def test_fit_errors(tmp_path, capsys, content, extra, code):
    p = tmp_path / "in.csv"
    p.write_text(content)
    got, out, err = run(["fit", p, "--M", 200, "--cache-dir", tmp_path, *extra], capsys)
    assert got == code
    assert err.count("\n") == 1 and err.startswith(f"error[{code}]:") and out == ""


def test_missing_file_and_bad_flags(tmp_path, capsys):
    assert run(["fit", tmp_path / "nope.csv"], capsys)[0] == 6
    with pytest.raises(SystemExit) as exc:
        main(["fit", "x.csv", "--system", "octagons"])
    assert exc.value.code == 2


def test_cache_version_mismatch(tmp_path, capsys):
    code, out, _ = run(["simulate-critvals", "--n", 4, "--M", 50, "--cache-dir", tmp_path], capsys)
    path = json.loads(out)["path"]
    data = bytearray(open(path, "rb").read())
    data[6] = 99
    open(path, "wb").write(bytes(data))
    p = tmp_path / "in.csv"
    p.write_text("1\n2\n3\n4\n")
    code, _, err = run(["fit", p, "--M", 50, "--cache-dir", tmp_path], capsys)
    assert code == 4 and "version" in err


def test_simulate_out(tmp_path, capsys):
    code, out, _ = run(["simulate-critvals", "--n", 100, "--M", 100, "--seed", 3, "--out", tmp_path / "x.bin"],
                       capsys)
    info = json.loads(out)
    assert code == 0 and info["n_sim"] == 128 and (tmp_path / "x.bin").exists()
    assert run(["simulate-critvals", "--n", 100, "--M", 100], capsys)[0] == 3


def test_bounds(capsys):
    code, out, _ = run(["bounds", "--n", 8192, "--alpha", 0.5, "--delta", 2.0, "--lam", 0.5, "--K", 1], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["overestimation"]["P(K_hat > K + 0)"] == 0.5
    assert 0 < rep["underestimation"]["eta"] <= 1
    assert "condition_not_met" in rep["critical_value_bounds"]["1"]
    code, out, _ = run(["bounds", "--n", 100, "--delta", 1.0, "--lam", 0.1, "--K", 1], capsys)
    assert "condition_not_met" in json.loads(out)["underestimation"]


def test_benchmark(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("n = 64\nK = 1\nC = 40\nlam_min = 0.2\nalpha = 0.1,0.5\nreps = 5\nM = 300\n")
    code, out, _ = run(["benchmark", "--config", cfg, "--cache-dir", tmp_path, "--format", "csv"], capsys)
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0 and [r["method"] for r in rows] == ["HS(0.1)", "HS(0.5)"]
    code, out, _ = run(["benchmark", "--config", cfg, "--cache-dir", tmp_path], capsys)
    rep = json.loads(out)
    assert rep["scenario"]["n"] == 64 and len(rep["results"]) == 2
    cfg.write_text("n = 64\nfoo = 1\n")
    assert run(["benchmark", "--config", cfg], capsys)[0] == 3
