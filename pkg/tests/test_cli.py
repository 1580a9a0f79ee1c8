import csv
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from trajset import io
from trajset.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == 0, err
    return json.loads(out)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--kind", "interaction", "--scenarios", "120", "--seed", "1",
                 "--out", str(d / "ds.csv")]) == 0
    assert main(["generate-set", "--dataset", str(d / "ds.csv"), "--size", "24",
                 "--out", str(d / "set.json")]) == 0
    assert main(["train", "--dataset", str(d / "ds.csv"), "--set", str(d / "set.json"), "--conditional",
                 "--hidden", "32", "--feature-size", "16", "--epochs", "3", "1",
                 "--out", str(d / "ck.json")]) == 0
    return d


def test_synth_benchmark(tmp_path, capsys):
    out = run_json(capsys, "synth", "--vehicles", "5", "--pedestrians", "3", "--cyclists", "1",
                   "--out", tmp_path / "b.csv")
    assert out["scenarios"] == 9
    assert len(io.read_dataset(tmp_path / "b.csv")) == 9


def test_generate_and_eval(pipeline, capsys):
    res = run_json(capsys, "generate-set", "--dataset", pipeline / "ds.csv", "--size", "10",
                   "--out", pipeline / "s10.json")
    assert res["mixed"]["size"] == 10
    rows = list(csv.DictReader(open(pipeline / "s10.curve.csv")))
    assert [int(r["size"]) for r in rows] == list(range(1, 11))
    ev = run_json(capsys, "eval-set", "--dataset", pipeline / "ds.csv", "--set", pipeline / "s10.json")
    assert ev["sets"][0]["lb_minade"] == pytest.approx(res["mixed"]["lb_minade"], abs=1e-12)
    assert ev["sets"][0]["lb_minade"] == pytest.approx(float(rows[-1]["achievable"]), abs=1e-9)


def test_full_size_set_reaches_zero(tmp_path, capsys):
    run(capsys, "synth", "--vehicles", "6", "--pedestrians", "4", "--out", tmp_path / "d.csv")
    res = run_json(capsys, "generate-set", "--dataset", tmp_path / "d.csv", "--size", "10",
                   "--out", tmp_path / "s.json")
    assert res["mixed"]["final_achievable"] == 0.0


def test_class_specific_and_bagging(tmp_path, capsys):
    run(capsys, "synth", "--vehicles", "30", "--pedestrians", "20", "--out", tmp_path / "d.csv")
    res = run_json(capsys, "generate-set", "--dataset", tmp_path / "d.csv", "--size", "5",
                   "--class-specific", "--out", tmp_path / "cs.json")
    assert set(res) == {"non_vulnerable", "vulnerable"}
    assert io.read_set(tmp_path / "cs.vulnerable.json").class_group.value == "vulnerable"
    bag = run_json(capsys, "generate-set", "--dataset", tmp_path / "d.csv", "--algorithm", "bagging",
                   "--epsilon", "3", "--out", tmp_path / "bag.json")
    assert bag["mixed"]["final_achievable"] is None and bag["mixed"]["size"] >= 1


def test_predict_top1_consistent(pipeline, capsys):
    for k in (1, 6):
        run(capsys, "predict", "--checkpoint", pipeline / "ck.json", "--dataset", pipeline / "ds.csv",
            "--k", k, "--out-csv", pipeline / f"p{k}.csv", "--report", pipeline / f"r{k}.json")
    top = {}
    for k in (1, 6):
        for r in csv.DictReader(open(pipeline / f"p{k}.csv")):
            if r["rank"] == "0" and r["timestep"] == "0":
                top.setdefault(k, {})[r["scenario_id"]] = r["set_index"]
    assert top[1] == top[6]
    r1, r6 = io.read_report(pipeline / "r1.json"), io.read_report(pipeline / "r6.json")
    assert r6["min_fde"] <= r1["min_fde"] + 1e-12 and r1["n_sequences"] == 120


def test_no_nms_matches_zero_radius(pipeline, capsys):
    a = run_json(capsys, "predict", "--checkpoint", pipeline / "ck.json", "--dataset", pipeline / "ds.csv",
                 "--no-nms")
    b = run_json(capsys, "predict", "--checkpoint", pipeline / "ck.json", "--dataset", pipeline / "ds.csv",
                 "--r-nms", "0")
    assert a == b


def test_report_rcc(pipeline, capsys):
    out = run_json(capsys, "report-rcc", "--checkpoint", pipeline / "ck.json")
    assert out["conditional"] and 0 < out["rcc"] < 100
    code, text, _ = run(capsys, "report-rcc", "--checkpoint", pipeline / "ck.json")
    assert code == 0 and text.startswith("RCC ")


def test_train_text_output(pipeline, capsys):
    code, text, _ = run(capsys, "train", "--dataset", pipeline / "ds.csv", "--set", pipeline / "set.json",
                        "--hidden", "8", "--feature-size", "8", "--epochs", "1", "1",
                        "--out", pipeline / "u.json")
    assert code == 0 and text.splitlines()[0] == "epoch\tloss" and len(text.splitlines()) == 3
    assert run_json(capsys, "report-rcc", "--checkpoint", pipeline / "u.json")["rcc"] == 0.0


def test_bench(pipeline, capsys):
    out = run_json(capsys, "bench", "--dataset", pipeline / "ds.csv", "--sizes", "3", "5", "--k", "60")
    assert [r["s"] for r in out["runs"]] == [3, 5]
    assert all(r["k"] == 60 and r["peak_rss_mb"] > 0 for r in out["runs"])
    out = run_json(capsys, "bench", "--dataset", pipeline / "ds.csv", "--sizes", "3", "--matrix-threshold", "10")
    assert out["runs"][0]["strategy"] == "streaming"


def test_errors_exit_nonzero(tmp_path, capsys):
    code, _, err = run(capsys, "eval-set", "--dataset", tmp_path / "missing.csv", "--set", tmp_path / "x.json")
    assert code == 2 and "error" in err
    run(capsys, "synth", "--vehicles", "3", "--pedestrians", "0", "--out", tmp_path / "d.csv")
    code, _, err = run(capsys, "generate-set", "--dataset", tmp_path / "d.csv", "--size", "50",
                       "--out", tmp_path / "s.json")
    assert code == 2 and "distinct" in err
    with pytest.raises(SystemExit):
        main(["generate-set"])


def test_console_pipeline_under_a_minute(tmp_path):
    exe = [sys.executable, "-m", "trajset"]
    t0 = time.perf_counter()
    steps = [
        ["synth", "--kind", "interaction", "--scenarios", "200", "--out", "ds.csv"],
        ["generate-set", "--dataset", "ds.csv", "--size", "32", "--out", "set.json"],
        ["train", "--dataset", "ds.csv", "--set", "set.json", "--conditional", "--hidden", "64",
         "--epochs", "2", "1", "--out", "ck.json"],
        ["predict", "--checkpoint", "ck.json", "--dataset", "ds.csv", "--report", "r.txt"],
        ["report-rcc", "--checkpoint", "ck.json", "--json"],
    ]
    for step in steps:
        proc = subprocess.run(exe + step, cwd=tmp_path, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    assert time.perf_counter() - t0 < 60
    assert json.loads(proc.stdout)["rcc"] > 0
    assert "min_fde" in (tmp_path / "r.txt").read_text()
