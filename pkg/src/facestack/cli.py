"""Command line pipeline: synth -> prepare -> extract -> train/stack -> eval.

Stages communicate through files (manifests, feature matrices, models,
score CSVs) so features extracted once can feed many experiments. Every
command writes a run.json into its output directory echoing the resolved
configuration; timestamps live only there, keeping all other outputs
byte-identical across reruns with the same seed.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 partial failure.
"""

import argparse
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .dataset import (Manifest, Sample, adults_mask, dago_mask, load_folds,
                      load_manifest, make_folds, save_folds, save_manifest)
from .descriptors import DESCRIPTOR_IDS, extract_descriptor
from .errors import ConfigurationError, DataError, PartialFailure
from .evaluation import (StageData, error_breakdown, mean_pattern,
                         run_crossdb, run_kfold, save_report, save_roc)
from .features import FeatureMatrix, export_csv, load_features, save_features
from .geometry import (NoiseSpec, PATTERN_VARIANTS, pattern_eyes,
                       prepare_pattern)
from .pgm import load_gray, read_pgm, write_pgm
from .stacking import (CANONICAL_STAGES, FirstStageSpec, stack_fit,
                       save_stacked)
from .svm import SvmParams, grid_search, load_scores, save_model, svm_fit
from .synth import synth_corpus

PROTOCOLS = ("none", "dago", "dago-adults", "adults")


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _derive_seed(seed, *key):
    return int(np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(1)[0])


def _pmap(fn, items, jobs):
    """Map preserving input order; thread pool when jobs > 1."""
    items = list(items)
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _write_run(out_dir, ns, started, results=None, failures=None):
    config = {k: v for k, v in sorted(vars(ns).items()) if k != "func"}
    doc = {
        "version": __version__,
        "command": ns.command,
        "config": config,
        "started": started,
        "finished": _now(),
        "results": results or {},
        "failures": failures or [],
    }
    with open(os.path.join(out_dir, "run.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _params_from_flags(ns):
    return SvmParams(C=ns.C, gamma=ns.gamma)


def _class_weight(ns):
    if getattr(ns, "weight_female", 1.0) == 1.0 and getattr(ns, "weight_male", 1.0) == 1.0:
        return None
    return {-1: ns.weight_female, 1: ns.weight_male}


_STAGE_RE = re.compile(r":pca(\d+)$")


def _parse_stage(text, paired=False):
    """Parse ID=FILE[:pcaN] (or ID=TRAIN,TEST[:pcaN] when paired)."""
    if "=" not in text:
        raise ConfigurationError(
            f"stage {text!r} must look like ID=FILE[:pcaN]"
            + (" with FILE as TRAIN,TEST" if paired else ""))
    sid, rest = text.split("=", 1)
    pca = 0
    m = _STAGE_RE.search(rest)
    if m:
        pca = int(m.group(1))
        rest = rest[: m.start()]
    if paired:
        parts = rest.split(",")
        if len(parts) != 2:
            raise ConfigurationError(f"stage {text!r}: need TRAIN,TEST feature files")
        return sid, parts[0], parts[1], pca
    return sid, rest, pca


def _stage_spec(sid, descriptor_id):
    canon = CANONICAL_STAGES.get(sid)
    if canon is not None:
        return canon
    return FirstStageSpec(sid, "custom", descriptor_id or "custom")


def _load_stage_features(path, n_expected):
    fm = load_features(path)
    if len(fm.data) != n_expected:
        raise DataError(f"{path}: {len(fm.data)} rows, manifest has {n_expected}")
    return fm


def _protocol_indices(manifest, protocol):
    mask = np.ones(len(manifest), dtype=bool)
    if protocol in ("dago", "dago-adults"):
        mask &= dago_mask(manifest)
    if protocol in ("adults", "dago-adults"):
        mask &= adults_mask(manifest)
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        raise DataError(f"protocol {protocol!r} filtered out every sample")
    return idx


# ---------------------------------------------------------------- commands

def cmd_synth(ns):
    out = _ensure_dir(ns.out)
    manifest = synth_corpus(out, ns.per_class, seed=ns.seed, dataset_name=ns.name)
    print(f"synth: wrote {len(manifest)} samples under {out}")
    return {"n_samples": len(manifest), "manifest": os.path.join(out, "manifest.csv")}, []


def cmd_folds(ns):
    manifest = load_manifest(ns.manifest, check_files=False)
    plan = make_folds(manifest, ns.k, seed=ns.seed, grouping=ns.grouping)
    save_folds(plan, ns.out)
    sizes = [int(np.sum(plan.assignments == f)) for f in range(plan.k)]
    print(f"folds: wrote {plan.k}-fold plan ({ns.grouping}) to {ns.out}; sizes {sizes}")
    return {"k": plan.k, "fold_sizes": sizes}, []


def _noise_spec(ns, row_seed):
    if ns.noise == "none":
        return None
    if ns.noise == "gaussian":
        return NoiseSpec("gaussian", gaussian_variance=ns.variance, seed=row_seed)
    return NoiseSpec("motion_blur", motion_length=ns.length, seed=row_seed)


def cmd_prepare(ns):
    manifest = load_manifest(ns.manifest, check_files=False)
    out = _ensure_dir(ns.out)

    def work(item):
        row, sample = item
        try:
            img = load_gray(sample.image_path)
            noise = _noise_spec(ns, _derive_seed(ns.seed, row))
            pat = prepare_pattern(img, sample.eye_left, sample.eye_right,
                                  ns.pattern, noise=noise)
            return row, pat, None
        except (DataError, ConfigurationError, OSError) as exc:
            return row, None, str(exc)

    results = _pmap(work, enumerate(manifest.samples), ns.jobs)
    eye_l, eye_r = pattern_eyes(ns.pattern)
    kept, failures = [], []
    for row, pat, err in results:
        if err is not None:
            failures.append({"row": row, "error": err})
            continue
        name = f"{row:06d}.pgm"
        write_pgm(os.path.join(out, name), pat)
        src = manifest.samples[row]
        kept.append(Sample(os.path.join(out, name), src.identity_id, src.gender,
                           src.age_group, eye_l, eye_r))
    prepared = Manifest(manifest.dataset_name, tuple(kept))
    save_manifest(prepared, os.path.join(out, "manifest.csv"))
    print(f"prepare: {len(kept)} patterns ({ns.pattern}) in {out}, {len(failures)} failed")
    results_doc = {"n_prepared": len(kept), "n_failed": len(failures)}
    if failures:
        return results_doc, failures
    return results_doc, []


def cmd_extract(ns):
    manifest = load_manifest(ns.manifest)
    if len(manifest) == 0:
        raise DataError(f"{ns.manifest}: no samples")

    def work(sample):
        return extract_descriptor(read_pgm(sample.image_path), ns.descriptor)

    vectors = _pmap(work, manifest.samples, ns.jobs)
    widths = {len(v) for v in vectors}
    if len(widths) > 1:
        raise DataError(f"inconsistent feature widths {sorted(widths)}; "
                        "are all patterns the same size?")
    fm = FeatureMatrix(np.asarray(vectors, dtype=np.float32), ns.descriptor)
    save_features(fm, ns.out)
    if ns.csv:
        export_csv(fm, ns.csv)
    print(f"extract: {fm.data.shape[0]}x{fm.data.shape[1]} {ns.descriptor} matrix -> {ns.out}")
    return {"n_samples": int(fm.data.shape[0]), "n_dims": int(fm.data.shape[1])}, []


def _training_setup(ns, features_n):
    manifest = load_manifest(ns.manifest, check_files=False)
    if len(manifest) != features_n:
        raise DataError(f"manifest has {len(manifest)} rows, features {features_n}")
    labels = manifest.labels().astype(np.float64)
    if ns.folds:
        plan = load_folds(ns.folds)
        if plan.assignments.shape != (features_n,):
            raise DataError("fold plan does not cover the feature rows")
    else:
        plan = make_folds(manifest, ns.kfolds, seed=_derive_seed(ns.seed, 77))
    return manifest, labels, plan


def cmd_train(ns):
    fm = load_features(ns.features)
    manifest, labels, plan = _training_setup(ns, len(fm.data))
    cw = _class_weight(ns)
    if ns.grid:
        params = grid_search(fm.data, labels, plan, seed=_derive_seed(ns.seed, 11),
                             class_weight=cw)
    else:
        params = _params_from_flags(ns)
    model = svm_fit(fm, labels, params, seed=_derive_seed(ns.seed, 1), class_weight=cw)
    save_model(ns.out, model)
    train_acc = float(np.mean(np.where(model.decision_function(fm.data) >= 0, 1, -1) == labels))
    print(f"train: C={params.C} gamma={params.gamma} "
          f"support vectors={len(model.dual_coefs)} train accuracy={train_acc:.4f}")
    return {"C": params.C, "gamma": params.gamma,
            "n_support": int(len(model.dual_coefs)), "train_accuracy": train_acc}, []


def cmd_stack(ns):
    parsed = [_parse_stage(s) for s in ns.stage]
    if not parsed:
        raise ConfigurationError("need at least one --stage")
    first_n = None
    mats, specs = [], []
    for sid, path, pca in parsed:
        if pca:
            raise ConfigurationError("PCA stage suffixes are only supported by eval")
        fm = load_features(path)
        if first_n is None:
            first_n = len(fm.data)
        elif len(fm.data) != first_n:
            raise DataError(f"{path}: row count differs from the first stage file")
        mats.append(fm.data.astype(np.float64))
        specs.append(_stage_spec(sid, fm.descriptor_id))
    manifest, labels, plan = _training_setup(ns, first_n)
    external = load_scores(ns.external) if ns.external else None
    cw = _class_weight(ns)
    if ns.grid:
        params_first = [
            grid_search(X, labels, plan, seed=_derive_seed(ns.seed, 11, si), class_weight=cw)
            for si, X in enumerate(mats)
        ]
        params_meta = None  # stack_fit grid-searches the meta stage
    else:
        params_first = _params_from_flags(ns)
        params_meta = _params_from_flags(ns)
    model = stack_fit(mats, labels, plan, specs, external_scores=external,
                      params_meta=params_meta, seed=_derive_seed(ns.seed, 2),
                      params_first=params_first, class_weight=cw)
    save_stacked(ns.out, model)
    print(f"stack: {len(specs)} first-stage columns "
          f"{'+ external ' if external else ''}-> {ns.out}")
    return {"columns": list(model.column_ids)}, []


def _breakdown_doc(samples, scores):
    pred = np.where(np.asarray(scores) >= 0, 1, -1)
    cells = error_breakdown(samples, pred)
    return {f"{g}/{a}": cells[(g, a)] for g, a in sorted(cells)}


def _write_mean_patterns(out, manifest_rows, row_ids, patterns_dir):
    by_cell = {}
    for sample, rid in zip(manifest_rows, row_ids):
        by_cell.setdefault((sample.gender, sample.age_group), []).append(rid)
    written = []
    for (gender, age), rows in sorted(by_cell.items()):
        imgs = [read_pgm(os.path.join(patterns_dir, f"{r:06d}.pgm")) for r in rows]
        name = f"mean_{gender}_{age.replace('+', 'plus')}.pgm"
        write_pgm(os.path.join(out, name), mean_pattern(imgs))
        written.append(name)
    return written


def cmd_eval_kfold(ns):
    out = _ensure_dir(ns.out)
    manifest = load_manifest(ns.manifest, check_files=False)
    idx = _protocol_indices(manifest, ns.protocol)
    sub = manifest.subset(idx)
    labels = sub.labels().astype(np.float64)

    stages = []
    for text in ns.stage:
        sid, path, pca = _parse_stage(text)
        fm = _load_stage_features(path, len(manifest))
        stages.append(StageData(_stage_spec(sid, fm.descriptor_id),
                                fm.data[idx].astype(np.float64), pca))
    if ns.folds:
        if ns.protocol != "none":
            raise ConfigurationError(
                "--folds plans index the unfiltered manifest; with a protocol "
                "preset, let eval build folds on the filtered rows")
        plan = load_folds(ns.folds)
        if plan.assignments.shape != (len(sub),):
            raise DataError("fold plan does not cover the evaluated rows")
    else:
        plan = make_folds(sub, ns.k, seed=_derive_seed(ns.seed, 77), grouping=ns.grouping)

    report, scores = run_kfold(stages, labels, folds=plan, seed=ns.seed,
                               params_first=None if ns.grid else _params_from_flags(ns),
                               params_meta=None if ns.grid else _params_from_flags(ns),
                               use_grid=ns.grid, class_weight=_class_weight(ns))
    extra = {
        "protocol": ns.protocol,
        "mode": "kfold",
        "dataset": manifest.dataset_name,
        "stages": [s for s in ns.stage],
        "error_breakdown": _breakdown_doc(sub.samples, scores),
    }
    save_report(os.path.join(out, "report.json"), report, extra)
    save_roc(os.path.join(out, "roc.csv"), report)
    means = []
    if ns.patterns:
        means = _write_mean_patterns(out, sub.samples, idx, ns.patterns)
    print(f"eval kfold: accuracy={report.accuracy:.4f} "
          f"(female {report.accuracy_female:.4f} / male {report.accuracy_male:.4f}) "
          f"auc={report.auc:.4f} n={report.n_samples}")
    doc = report.to_dict()
    doc.pop("roc_points")
    doc["mean_patterns"] = means
    return doc, []


def cmd_eval_crossdb(ns):
    out = _ensure_dir(ns.out)
    train_man = load_manifest(ns.train_manifest, dataset_name=ns.train_name,
                              check_files=False)
    test_man = load_manifest(ns.test_manifest, dataset_name=ns.test_name,
                             check_files=False)
    tr_idx = _protocol_indices(train_man, ns.protocol)
    te_idx = _protocol_indices(test_man, ns.protocol)
    tr_sub, te_sub = train_man.subset(tr_idx), test_man.subset(te_idx)

    train_stages, test_stages = [], []
    for text in ns.stage:
        sid, tr_path, te_path, pca = _parse_stage(text, paired=True)
        tr_fm = _load_stage_features(tr_path, len(train_man))
        te_fm = _load_stage_features(te_path, len(test_man))
        spec = _stage_spec(sid, tr_fm.descriptor_id)
        train_stages.append(StageData(spec, tr_fm.data[tr_idx].astype(np.float64), pca))
        test_stages.append(StageData(spec, te_fm.data[te_idx].astype(np.float64), pca))

    report, scores = run_crossdb(
        train_stages, test_stages, tr_sub.labels().astype(np.float64),
        te_sub.labels().astype(np.float64), train_man.dataset_name,
        test_man.dataset_name, seed=ns.seed,
        params_first=None if ns.grid else _params_from_flags(ns),
        params_meta=None if ns.grid else _params_from_flags(ns),
        use_grid=ns.grid, class_weight=_class_weight(ns))
    extra = {
        "protocol": ns.protocol,
        "mode": "crossdb",
        "train_dataset": train_man.dataset_name,
        "test_dataset": test_man.dataset_name,
        "stages": [s for s in ns.stage],
        "error_breakdown": _breakdown_doc(te_sub.samples, scores),
    }
    save_report(os.path.join(out, "report.json"), report, extra)
    save_roc(os.path.join(out, "roc.csv"), report)
    print(f"eval crossdb: {train_man.dataset_name} -> {test_man.dataset_name} "
          f"accuracy={report.accuracy:.4f} auc={report.auc:.4f} n={report.n_samples}")
    doc = report.to_dict()
    doc.pop("roc_points")
    return doc, []


def cmd_noise_sweep(ns):
    out = _ensure_dir(ns.out)
    manifest = load_manifest(ns.manifest)
    labels = manifest.labels().astype(np.float64)
    images = _pmap(lambda s: load_gray(s.image_path), manifest.samples, ns.jobs)
    plan = make_folds(manifest, ns.k, seed=_derive_seed(ns.seed, 77))

    if ns.noise == "gaussian":
        levels = [float(v) for v in ns.variances.split(",")]
    else:
        levels = [int(v) for v in ns.lengths.split(",")]
    spec = _stage_spec("sweep", ns.descriptor)

    rows = []
    for li, level in enumerate(levels):
        def prep(item):
            row, (img, sample) = item
            if ns.noise == "gaussian":
                noise = NoiseSpec("gaussian", gaussian_variance=level,
                                  seed=_derive_seed(ns.seed, li, row))
            else:
                noise = NoiseSpec("motion_blur", motion_length=level,
                                  seed=_derive_seed(ns.seed, li, row))
            pat = prepare_pattern(img, sample.eye_left, sample.eye_right,
                                  ns.pattern, noise=noise)
            return extract_descriptor(pat, ns.descriptor)

        feats = np.asarray(_pmap(prep, enumerate(zip(images, manifest.samples)), ns.jobs))
        report, _ = run_kfold([StageData(spec, feats)], labels, folds=plan,
                              seed=ns.seed, params_first=_params_from_flags(ns),
                              use_grid=ns.grid)
        rows.append((level, report.accuracy))
        print(f"noise-sweep: {ns.noise}={level} accuracy={report.accuracy:.4f}")

    with open(os.path.join(out, "sweep.csv"), "w", encoding="utf-8") as fh:
        fh.write("noise,accuracy\n")
        for level, acc in rows:
            fh.write(f"{level},{acc!r}\n")
    return {"noise": ns.noise, "levels": [r[0] for r in rows],
            "accuracies": [r[1] for r in rows]}, []


# ---------------------------------------------------------------- parser

def _add_svm_flags(p):
    p.add_argument("--grid", action="store_true",
                   help="grid-search C/gamma instead of using --C/--gamma")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.095)
    p.add_argument("--weight-female", type=float, default=1.0,
                   help="multiplier on C for female samples")
    p.add_argument("--weight-male", type=float, default=1.0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="facestack",
        description="Gender classification pipeline over eye-normalized face patterns.")
    parser.add_argument("--seed", type=int, default=0, help="experiment seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads for per-sample stages")
    parser.add_argument("--out", default="out",
                        help="output directory (synth/prepare/eval/noise-sweep) or file (folds/extract/train/stack)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--name", default="synth", help="dataset name")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("folds", help="build and save a fold plan")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--grouping", choices=("by_sample", "by_identity"), default="by_sample")
    p.set_defaults(func=cmd_folds)

    p = sub.add_parser("prepare", help="normalize images to a named pattern")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pattern", choices=tuple(PATTERN_VARIANTS), required=True)
    p.add_argument("--noise", choices=("none", "gaussian", "motion"), default="none")
    p.add_argument("--variance", type=float, default=0.0, help="gaussian variance on [0,1] scale")
    p.add_argument("--length", type=int, default=1, help="motion blur length (odd)")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("extract", help="run a descriptor over prepared patterns")
    p.add_argument("--manifest", required=True, help="prepared manifest")
    p.add_argument("--descriptor", choices=DESCRIPTOR_IDS, required=True)
    p.add_argument("--csv", default=None, help="also export the matrix as CSV")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train one SVM on a feature matrix")
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True, help="manifest aligned with the feature rows")
    p.add_argument("--folds", default=None, help="fold plan CSV for the grid search")
    p.add_argument("--kfolds", type=int, default=5, help="folds to build when --folds absent")
    _add_svm_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("stack", help="train the two-stage stacked model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--stage", action="append", default=[],
                   help="ID=FEATURES.fsfm, repeatable (C1..C5 or custom ids)")
    p.add_argument("--external", default=None, help="external score CSV joined by row_index")
    p.add_argument("--folds", default=None)
    p.add_argument("--kfolds", type=int, default=5)
    _add_svm_flags(p)
    p.set_defaults(func=cmd_stack)

    p = sub.add_parser("eval", help="run an evaluation protocol")
    esub = p.add_subparsers(dest="eval_mode", required=True)

    pk = esub.add_parser("kfold", help="in-database k-fold evaluation")
    pk.add_argument("--manifest", required=True, help="original (unprepared) manifest")
    pk.add_argument("--stage", action="append", default=[], required=False,
                    help="ID=FEATURES.fsfm[:pcaN], repeatable")
    pk.add_argument("--k", type=int, default=5)
    pk.add_argument("--folds", default=None, help="fold plan CSV (protocol none only)")
    pk.add_argument("--grouping", choices=("by_sample", "by_identity"), default="by_sample")
    pk.add_argument("--protocol", choices=PROTOCOLS, default="none")
    pk.add_argument("--patterns", default=None,
                    help="prepared pattern dir for mean-pattern images")
    _add_svm_flags(pk)
    pk.set_defaults(func=cmd_eval_kfold)

    pc = esub.add_parser("crossdb", help="train on one dataset, test on another")
    pc.add_argument("--train-manifest", required=True)
    pc.add_argument("--test-manifest", required=True)
    pc.add_argument("--train-name", default=None,
                    help="dataset name override (default: manifest file stem)")
    pc.add_argument("--test-name", default=None)
    pc.add_argument("--stage", action="append", default=[],
                    help="ID=TRAIN.fsfm,TEST.fsfm[:pcaN], repeatable")
    pc.add_argument("--protocol", choices=PROTOCOLS, default="none")
    _add_svm_flags(pc)
    pc.set_defaults(func=cmd_eval_crossdb)

    p = sub.add_parser("noise-sweep", help="accuracy vs noise level for one pattern/descriptor")
    p.add_argument("--manifest", required=True, help="original manifest with source images")
    p.add_argument("--pattern", choices=tuple(PATTERN_VARIANTS), required=True)
    p.add_argument("--descriptor", choices=DESCRIPTOR_IDS, required=True)
    p.add_argument("--noise", choices=("gaussian", "motion"), default="gaussian")
    p.add_argument("--variances", default="0,0.025,0.05,0.1")
    p.add_argument("--lengths", default="1,7,13,21")
    p.add_argument("--k", type=int, default=5)
    _add_svm_flags(p)
    p.set_defaults(func=cmd_noise_sweep)

    return parser


def _run_dir(ns):
    # run.json goes to the output directory, or next to an output file
    if ns.command in ("synth", "prepare", "noise-sweep") or ns.command == "eval":
        return _ensure_dir(ns.out)
    return _ensure_dir(os.path.dirname(os.path.abspath(ns.out)))


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    started = _now()
    try:
        results, failures = ns.func(ns)
        _write_run(_run_dir(ns), ns, started, results, failures)
        if failures:
            raise PartialFailure(f"{len(failures)} of the rows failed; see run.json")
    except ConfigurationError as exc:
        print(f"facestack: configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"facestack: data error: {exc}", file=sys.stderr)
        return 3
    except PartialFailure as exc:
        print(f"facestack: partial failure: {exc}", file=sys.stderr)
        return 4
    return 0


def entrypoint():
    sys.exit(main())
