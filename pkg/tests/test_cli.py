import json

import pytest

from reliefplan.cli import main
from reliefplan.evalstats import REPORT_FIELDS, read_fbar, read_reports
from reliefplan.instance import load

QUICK = ["--time-limit", "20", "--max-iterations", "30", "--window", "10", "--scenarios", "20"]


@pytest.fixture
def det_file(tmp_path):
    p = tmp_path / "det.json"
    assert main(["gen", "--kind", "det", "--nu", "0.6", "--seed", "1", "--out", str(p)]) == 0
    return p


def test_gen_is_deterministic(tmp_path, det_file):
    again = tmp_path / "again.json"
    main(["gen", "--kind", "det", "--nu", "0.6", "--seed", "1", "--out", str(again)])
    assert again.read_bytes() == det_file.read_bytes()
    inst = load(det_file)
    assert inst.kind == "det" and inst.n_sp == 3 and inst.n_dp == 10


@pytest.mark.parametrize("model", ["famsp", "static2ssp"])
def test_train_then_evaluate(tmp_path, det_file, model):
    pol, log, out, fbar = (tmp_path / n for n in ("pol.json", "log.csv", "r.csv", "f.csv"))
    assert main(["train", "--instance", str(det_file), "--model", model, "--out", str(pol), "--log", str(log)]
                + QUICK) == 0
    assert pol.exists() and log.read_text().startswith("iteration,lower_bound,seconds")
    assert main(["evaluate", "--instance", str(det_file), "--model", model, "--policy", str(pol), "--N", "20",
                 "--out", str(out), "--fbar", str(fbar)]) == 0
    rows = read_reports(out)
    assert len(rows) == 1 and rows[0]["model"] == model and rows[0]["N"] == "20"
    assert float(rows[0]["gap_pct"]) >= -1e-6
    assert len(read_fbar(fbar)) == 5


def test_evaluate_rolling_and_clairvoyant(tmp_path, det_file):
    out = tmp_path / "r.csv"
    for model in ("cv", "rh2ssp"):
        assert main(["evaluate", "--instance", str(det_file), "--model", model, "--N", "10", "--out", str(out),
                     "--rh-method", "extensive"] + QUICK) == 0
    rows = read_reports(out)
    assert [r["model"] for r in rows] == ["cv", "rh2ssp"]
    assert float(rows[0]["gap_pct"]) == 0.0


def test_sweep_and_report(tmp_path, capsys):
    out, fdir, table = tmp_path / "s.csv", tmp_path / "fbar", tmp_path / "t.csv"
    assert main(["sweep", "--models", "cv,static2ssp", "--kind", "det,rand", "--nu", "0.6", "--N", "10",
                 "--out", str(out), "--fbar-dir", str(fdir)] + QUICK) == 0
    rows = read_reports(out)
    assert len(rows) == 4 and tuple(rows[0]) == REPORT_FIELDS
    assert len(list(fdir.glob("fbar_*.csv"))) == 4
    capsys.readouterr()
    assert main(["report", "--input", str(out), "--json", "--out", str(table)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert {(r["model"], r["kind"]) for r in summary} == {
        ("cv", "det"), ("cv", "rand"), ("static2ssp", "det"), ("static2ssp", "rand")}
    assert table.exists()
    assert main(["report", "--input", str(out)]) == 0
    assert "static2ssp" in capsys.readouterr().out


def test_errors_exit_nonzero(tmp_path, det_file, capsys):
    assert main(["evaluate", "--instance", str(tmp_path / "missing.json"), "--model", "cv"]) == 1
    assert "reliefplan: error:" in capsys.readouterr().err
    assert main(["evaluate", "--instance", str(det_file), "--model", "famsp", "--N", "5"]) == 1
    assert main(["evaluate", "--instance", str(det_file), "--model", "cv", "--N", "0",
                 "--out", str(tmp_path / "r.csv")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{\"format\": 1}")
    assert main(["evaluate", "--instance", str(bad), "--model", "cv"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--models", "oracle"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["gen", "--kind", "sideways"])
    assert main(["sweep", "--kind", "sideways", "--models", "cv"]) == 1
