import json

import numpy as np
import pytest

from facestack.cli import main
from facestack.features import load_features
from facestack.stacking import load_stacked
from facestack.svm import load_model


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One small corpus taken through the whole pipeline."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    pats = root / "fpat"
    assert main(["--out", str(corpus), "synth", "--per-class", "15"]) == 0
    assert main(["--out", str(root / "folds.csv"), "folds",
                 "--manifest", str(corpus / "manifest.csv"), "--k", "3"]) == 0
    assert main(["--out", str(pats), "prepare",
                 "--manifest", str(corpus / "manifest.csv"), "--pattern", "F"]) == 0
    assert main(["--out", str(root / "hog.fsfm"), "extract",
                 "--manifest", str(pats / "manifest.csv"), "--descriptor", "hog",
                 "--csv", str(root / "hog.csv")]) == 0
    assert main(["--out", str(root / "losib.fsfm"), "extract",
                 "--manifest", str(pats / "manifest.csv"), "--descriptor", "losib"]) == 0
    return root


def test_pipeline_artifacts(workspace):
    fm = load_features(workspace / "hog.fsfm")
    assert fm.data.shape == (30, 576)
    assert fm.descriptor_id == "hog"
    csv_rows = (workspace / "hog.csv").read_text().strip().splitlines()
    assert len(csv_rows) == 30
    run = json.loads((workspace / "corpus" / "run.json").read_text())
    assert run["command"] == "synth"
    assert run["results"]["n_samples"] == 30
    assert run["started"] <= run["finished"]
    folds_rows = (workspace / "folds.csv").read_text().strip().splitlines()
    assert folds_rows[0] == "row_index,fold"
    assert len(folds_rows) == 31


def test_train_command(workspace):
    out = workspace / "model.fsvm"
    assert main(["--out", str(out), "train",
                 "--features", str(workspace / "hog.fsfm"),
                 "--manifest", str(workspace / "corpus" / "manifest.csv"),
                 "--folds", str(workspace / "folds.csv"),
                 "--C", "4.0", "--gamma", "0.095"]) == 0
    model = load_model(out)
    assert model.params.C == 4.0
    run = json.loads((workspace / "run.json").read_text())
    assert run["results"]["train_accuracy"] >= 0.9


def test_stack_command(workspace):
    out = workspace / "stack.fstk"
    assert main(["--out", str(out), "stack",
                 "--manifest", str(workspace / "corpus" / "manifest.csv"),
                 "--stage", f"C1={workspace / 'hog.fsfm'}",
                 "--stage", f"C4={workspace / 'losib.fsfm'}",
                 "--folds", str(workspace / "folds.csv"),
                 "--C", "4.0"]) == 0
    model = load_stacked(out)
    assert model.column_ids == ("C1", "C4")


def test_eval_kfold_and_idempotence(workspace):
    args = lambda out: ["--seed", "3", "--out", str(out), "eval", "kfold",
                        "--manifest", str(workspace / "corpus" / "manifest.csv"),
                        "--stage", f"C1={workspace / 'hog.fsfm'}",
                        "--k", "3", "--C", "8.0", "--gamma", "0.04",
                        "--patterns", str(workspace / "fpat")]
    a, b = workspace / "eval_a", workspace / "eval_b"
    assert main(args(a)) == 0
    assert main(args(b)) == 0
    report = json.loads((a / "report.json").read_text())
    assert report["accuracy"] >= 0.9
    assert report["mode"] == "kfold"
    assert report["protocol"] == "none"
    assert "error_breakdown" in report
    assert (a / "roc.csv").exists()
    means = list(a.glob("mean_*.pgm"))
    assert means  # one image per populated gender/age cell

    # every artifact except run.json is byte-identical across reruns
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "roc.csv").read_bytes() == (b / "roc.csv").read_bytes()
    for m in means:
        assert m.read_bytes() == (b / m.name).read_bytes()
    ra = json.loads((a / "run.json").read_text())
    rb = json.loads((b / "run.json").read_text())
    for doc in (ra, rb):
        doc.pop("started"), doc.pop("finished")
        doc["config"].pop("out")
    assert ra == rb


def test_eval_protocol_filters_rows(workspace):
    out = workspace / "eval_adults"
    assert main(["--out", str(out), "eval", "kfold",
                 "--manifest", str(workspace / "corpus" / "manifest.csv"),
                 "--stage", f"C1={workspace / 'hog.fsfm'}",
                 "--k", "3", "--C", "4.0", "--protocol", "adults"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert 0 < report["n_samples"] < 30
    assert report["protocol"] == "adults"
    # synthetic eyes are all >20px apart, so dago keeps every row
    out2 = workspace / "eval_dago"
    assert main(["--out", str(out2), "eval", "kfold",
                 "--manifest", str(workspace / "corpus" / "manifest.csv"),
                 "--stage", f"C1={workspace / 'hog.fsfm'}",
                 "--k", "3", "--C", "4.0", "--protocol", "dago"]) == 0
    assert json.loads((out2 / "report.json").read_text())["n_samples"] == 30


def test_eval_crossdb_command(workspace, tmp_path):
    other = tmp_path / "corpus2"
    pats2 = tmp_path / "fpat2"
    assert main(["--seed", "9", "--out", str(other), "synth",
                 "--per-class", "10", "--name", "synthb"]) == 0
    assert main(["--out", str(pats2), "prepare",
                 "--manifest", str(other / "manifest.csv"), "--pattern", "F"]) == 0
    assert main(["--out", str(tmp_path / "hog2.fsfm"), "extract",
                 "--manifest", str(pats2 / "manifest.csv"), "--descriptor", "hog"]) == 0
    out = tmp_path / "xdb"
    assert main(["--out", str(out), "eval", "crossdb",
                 "--train-manifest", str(workspace / "corpus" / "manifest.csv"),
                 "--test-manifest", str(other / "manifest.csv"),
                 "--train-name", "synth", "--test-name", "synthb",
                 "--stage", f"C1={workspace / 'hog.fsfm'},{tmp_path / 'hog2.fsfm'}",
                 "--C", "8.0", "--gamma", "0.04"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["mode"] == "crossdb"
    assert report["train_dataset"] == "synth"
    assert report["test_dataset"] == "synthb"
    assert report["n_samples"] == 20
    assert report["accuracy"] >= 0.8
    # same manifest stem on both sides needs explicit names
    rc = main(["--out", str(tmp_path / "xdb2"), "eval", "crossdb",
               "--train-manifest", str(workspace / "corpus" / "manifest.csv"),
               "--test-manifest", str(other / "manifest.csv"),
               "--stage", f"C1={workspace / 'hog.fsfm'},{tmp_path / 'hog2.fsfm'}"])
    assert rc == 2


def test_noise_sweep_command(workspace):
    out = workspace / "sweep"
    assert main(["--out", str(out), "noise-sweep",
                 "--manifest", str(workspace / "corpus" / "manifest.csv"),
                 "--pattern", "F", "--descriptor", "losib",
                 "--noise", "gaussian", "--variances", "0,0.05",
                 "--k", "2", "--C", "4.0"]) == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "noise,accuracy"
    assert len(lines) == 3
    levels = [float(ln.split(",")[0]) for ln in lines[1:]]
    assert levels == [0.0, 0.05]


def test_exit_code_configuration_error(workspace, tmp_path, capsys):
    rc = main(["--out", str(tmp_path / "f.csv"), "folds",
               "--manifest", str(workspace / "corpus" / "manifest.csv"), "--k", "1"])
    assert rc == 2
    assert "configuration error" in capsys.readouterr().err


def test_exit_code_data_error(workspace, tmp_path, capsys):
    bad = tmp_path / "manifest.csv"
    good = (workspace / "corpus" / "manifest.csv").read_text().splitlines()
    bad.write_text("\n".join(good[:11]) + "\n")  # 10 rows vs 30 feature rows
    rc = main(["--out", str(tmp_path / "m.fsvm"), "train",
               "--features", str(workspace / "hog.fsfm"),
               "--manifest", str(bad), "--C", "1.0"])
    assert rc == 3
    assert "data error" in capsys.readouterr().err


def test_exit_code_partial_failure(workspace, tmp_path, capsys):
    src = (workspace / "corpus" / "manifest.csv").read_text().splitlines()
    img_dir = str(workspace / "corpus" / "images")
    broken = [src[0]] + [ln.replace("images/", img_dir + "/") for ln in src[1:3]]
    broken[2] = broken[2].replace(img_dir, str(tmp_path / "missing"))
    man = tmp_path / "manifest.csv"
    man.write_text("\n".join(broken) + "\n")
    out = tmp_path / "pats"
    rc = main(["--out", str(out), "prepare", "--manifest", str(man), "--pattern", "F"])
    assert rc == 4
    assert "partial failure" in capsys.readouterr().err
    run = json.loads((out / "run.json").read_text())
    assert run["results"] == {"n_prepared": 1, "n_failed": 1}
    assert run["failures"][0]["row"] == 1
    prepared = (out / "manifest.csv").read_text().strip().splitlines()
    assert len(prepared) == 2  # header + the surviving row


def test_stack_requires_stage_flag(workspace, tmp_path, capsys):
    rc = main(["--out", str(tmp_path / "s.fstk"), "stack",
               "--manifest", str(workspace / "corpus" / "manifest.csv")])
    assert rc == 2


def test_unknown_descriptor_rejected_by_parser(workspace, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["--out", str(tmp_path / "x.fsfm"), "extract",
              "--manifest", str(workspace / "fpat" / "manifest.csv"),
              "--descriptor", "sift"])
    assert exc.value.code == 2


def test_folds_protocol_conflict(workspace, tmp_path, capsys):
    rc = main(["--out", str(tmp_path / "e"), "eval", "kfold",
               "--manifest", str(workspace / "corpus" / "manifest.csv"),
               "--stage", f"C1={workspace / 'hog.fsfm'}",
               "--folds", str(workspace / "folds.csv"),
               "--protocol", "adults", "--C", "4.0"])
    assert rc == 2


def test_jobs_flag_matches_serial(workspace, tmp_path):
    out = tmp_path / "par.fsfm"
    assert main(["--jobs", "4", "--out", str(out), "extract",
                 "--manifest", str(workspace / "fpat" / "manifest.csv"),
                 "--descriptor", "losib"]) == 0
    a = load_features(out)
    b = load_features(workspace / "losib.fsfm")
    assert np.array_equal(a.data, b.data)
