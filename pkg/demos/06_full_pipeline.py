"""The whole pipeline through the command line interface.

Same subcommands a shell user would run: synth -> folds -> prepare ->
extract -> train -> stack -> eval. Everything is seeded, so rerunning
this script reproduces the artifacts byte for byte (run.json keeps the
timestamps so nothing else has to).
"""

import json
import os
import tempfile

from facestack.cli import main

with tempfile.TemporaryDirectory() as td:
    os.chdir(td)
    steps = [
        ["--seed", "7", "--out", "corpus", "synth", "--per-class", "40"],
        ["--out", "folds.csv", "folds", "--manifest", "corpus/manifest.csv", "--k", "5"],
        ["--out", "fpat", "prepare", "--manifest", "corpus/manifest.csv", "--pattern", "F"],
        ["--out", "hs64", "prepare", "--manifest", "corpus/manifest.csv", "--pattern", "HS64"],
        ["--out", "f_hog.fsfm", "extract", "--manifest", "fpat/manifest.csv",
         "--descriptor", "hog"],
        ["--out", "hs_hog.fsfm", "extract", "--manifest", "hs64/manifest.csv",
         "--descriptor", "hog"],
        ["--seed", "7", "--out", "c1.fsvm", "train", "--features", "f_hog.fsfm",
         "--manifest", "corpus/manifest.csv", "--folds", "folds.csv",
         "--C", "8.0", "--gamma", "0.04"],
        ["--seed", "7", "--out", "s1.fstk", "stack", "--manifest", "corpus/manifest.csv",
         "--stage", "C1=f_hog.fsfm", "--stage", "C2=hs_hog.fsfm",
         "--folds", "folds.csv", "--C", "8.0", "--gamma", "0.04"],
        ["--seed", "7", "--out", "eval_c1", "eval", "kfold",
         "--manifest", "corpus/manifest.csv", "--stage", "C1=f_hog.fsfm",
         "--folds", "folds.csv", "--C", "8.0", "--gamma", "0.04"],
        ["--seed", "7", "--out", "eval_s1", "eval", "kfold",
         "--manifest", "corpus/manifest.csv", "--stage", "C1=f_hog.fsfm",
         "--stage", "C2=hs_hog.fsfm", "--folds", "folds.csv",
         "--C", "8.0", "--gamma", "0.04", "--patterns", "fpat"],
    ]
    for argv in steps:
        print("$ facestack " + " ".join(argv))
        rc = main(argv)
        assert rc == 0, f"exit code {rc}"

    report = json.load(open("eval_s1/report.json"))
    print("\nstacked eval report keys:", sorted(report)[:8], "...")
    print(f"accuracy {report['accuracy']:.4f}  auc {report['auc']:.4f}  "
          f"confusion {report['confusion']}")
    print("error breakdown cells:", list(report["error_breakdown"])[:4])
    print("artifacts:", sorted(os.listdir("eval_s1")))
