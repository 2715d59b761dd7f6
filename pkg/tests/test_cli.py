import csv
import json

import pytest

from nn2rules.cli import main, parse_widths, UsageError
from nn2rules.rules import load_rule_list
from nn2rules.schema import load_schema
from oracles import DATA

TOMATO = DATA / "tomato"


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def tomato_args(*extra):
    return ["--schema", str(TOMATO / "tomato.schema"), *extra]


def test_parse_widths():
    assert parse_widths("6,3") == [6, 3]
    for bad in ("0", "6,-1", "a", ""):
        with pytest.raises(UsageError):
            parse_widths(bad)


def test_tomato_extract_verify(tmp_path, capsys):
    w = str(TOMATO / "tomato_net.json")
    assert main(["extract", *tomato_args("--weights", w, "--out", str(tmp_path))]) == 0
    text = (tmp_path / "rules.txt").read_text()
    rules, _ = load_rule_list(tmp_path / "rules.txt", load_schema(TOMATO / "tomato.schema"))
    assert [r for r, c in zip(rules.rules(), rules.labels) if c == 1] == [(0, 1), (0, 2)]
    assert "color=red AND size=medium => 1" in text and "color=red AND size=big => 1" in text
    assert main(["verify", *tomato_args("--weights", w, "--rules", str(tmp_path / "rules.txt"),
                                        "--out", str(tmp_path))]) == 0
    assert json.loads((tmp_path / "verify.json").read_text())["passed"] is True
    assert "PASS" in capsys.readouterr().out


def test_corrupted_rules_fail_verify(tmp_path):
    w = str(TOMATO / "tomato_net.json")
    main(["extract", *tomato_args("--weights", w, "--out", str(tmp_path))])
    rules_txt = tmp_path / "rules.txt"
    rules_txt.write_text(rules_txt.read_text().replace("size=big => 1", "size=big => 0"))
    (tmp_path / "rules.txt.json").unlink()
    code = main(["verify", *tomato_args("--weights", w, "--rules", str(rules_txt), "--out", str(tmp_path))])
    assert code == 1
    assert (tmp_path / "counterexamples.txt").read_text() == "color=red, size=big\n"
    assert json.loads((tmp_path / "verify.json").read_text())["mismatches"] == 1


def test_extraction_is_byte_identical(tmp_path):
    w = str(TOMATO / "tomato_net.json")
    for d in ("a", "b"):
        assert main(["extract", *tomato_args("--weights", w, "--out", str(tmp_path / d))]) == 0
    for f in ("rules.txt", "rules.txt.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_missing_schema_exits_2(tmp_path, capsys):
    missing = tmp_path / "nope.schema"
    assert main(["extract", "--schema", str(missing), "--weights", "w.json"]) == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_widths_exit_2(tmp_path, capsys):
    code = main(["train", *tomato_args("--data", str(TOMATO / "tomato.csv"), "--label", "ripe",
                                       "--widths", "0", "--out", str(tmp_path))])
    assert code == 2
    assert "width" in capsys.readouterr().err


def test_unknown_dataset_exit_2(capsys):
    assert main(["train", "--dataset", "iris"]) == 2
    assert "unknown dataset" in capsys.readouterr().err


def test_train_tomato(tmp_path):
    code = main(["train", *tomato_args("--data", str(TOMATO / "tomato.csv"), "--label", "ripe",
                                       "--widths", "3", "--epochs", "50", "--test-fraction", "0.5",
                                       "--out", str(tmp_path))])
    assert code == 0
    assert (tmp_path / "weights.json").exists()
    manifest = json.loads((tmp_path / "train_manifest.json").read_text())
    assert manifest["config"]["train"]["hidden"] == [3]


@pytest.fixture(scope="module")
def cars_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cars")
    common = ["--dataset", "cars", "--out", str(out)]
    assert main(["train", *common, "--widths", "4,2", "--epochs", "30"]) == 0
    assert main(["extract", *common, "--weights", str(out / "weights.json")]) == 0
    assert main(["verify", *common, "--weights", str(out / "weights.json"), "--rules", str(out / "rules.txt")]) == 0
    assert main(["evaluate", *common, "--weights", str(out / "weights.json"),
                 "--rules", str(out / "rules.txt")]) == 0
    return out


def test_cars_metrics(cars_run):
    rows = {r["method"]: r for r in read_csv(cars_run / "metrics.csv")}
    assert list(rows) == ["decision_tree", "trepan", "nn2rules_full", "nn2rules_support"]
    assert float(rows["nn2rules_full"]["fidelity"]) == 1.0
    for r in rows.values():
        assert 0.0 <= float(r["fidelity"]) <= 1.0 and 0.0 <= float(r["accuracy"]) <= 1.0
    counts = read_csv(cars_run / "rule_counts.csv")[0]
    assert int(counts["num_rules_max"]) == 1728
    assert int(counts["nn2rules_support"]) <= int(counts["nn2rules_full"])


def test_cars_curve(cars_run):
    curve = read_csv(cars_run / "curve.csv")
    assert [float(r["percent"]) for r in curve] == [5.0 * i for i in range(21)]
    assert float(curve[-1]["fidelity"]) == 1.0
    assert curve[0]["num_rules"] == "0"
    counts = [int(r["num_rules"]) for r in curve]
    assert counts == sorted(counts)


def test_cars_artifacts(cars_run):
    for f in ("tree.txt", "trepan.txt", "rules_support.txt", "verify.json",
              "train_manifest.json", "extract_manifest.json", "verify_manifest.json", "evaluate_manifest.json"):
        assert (cars_run / f).exists(), f
    assert not (cars_run / "counterexamples.txt").exists()
