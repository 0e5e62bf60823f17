import numpy as np
import pytest

from facestack import (
    CANONICAL_STAGES,
    ConfigurationError,
    DataError,
    FirstStageSpec,
    S_CONFIGS,
    ScoreMatrix,
    SvmParams,
    inner_folds,
    load_stacked,
    oof_scores,
    save_stacked,
    stack_fit,
    stack_predict,
    stack_scores,
    svm_fit,
)
from facestack.stacking import DEFAULT_STAGE_PARAMS, _fit_seed

PARAMS = SvmParams(C=1.0, gamma=0.095)


def test_canonical_tables():
    assert [CANONICAL_STAGES[c].pattern for c in ("C1", "C2", "C3", "C4", "C5")] == \
        ["F", "HS64", "F", "F", "HS64"]
    assert [CANONICAL_STAGES[c].descriptor for c in ("C1", "C2", "C3", "C4", "C5")] == \
        ["hog", "hog", "lbpu2", "losib", "losib"]
    assert S_CONFIGS == {
        "S1": ("C1", "C3"),
        "S2": ("C1", "C3", "C4"),
        "S3": ("C4", "C5"),
        "S4": ("C1", "C2", "C3"),
        "S5": ("C1", "C2", "C3", "C4", "C5"),
    }
    assert DEFAULT_STAGE_PARAMS.C == 1.0
    assert DEFAULT_STAGE_PARAMS.gamma == 0.095


def _specs(k):
    return [FirstStageSpec(f"C{i + 1}", "custom", "raw") for i in range(k)]


def _views(n, seed=0):
    """Two feature views, each informative on a complementary half."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    half = rng.random(n) < 0.5
    a = rng.normal(0, 1, (n, 3))
    b = rng.normal(0, 1, (n, 3))
    a[half, 0] = y[half] * 2 + rng.normal(0, 0.3, half.sum())
    b[~half, 0] = y[~half] * 2 + rng.normal(0, 0.3, (~half).sum())
    return [a, b], y


def test_oof_scores_shape_and_columns():
    views, y = _views(60)
    folds = inner_folds(y, k=3, seed=1)
    sm = oof_scores(views, y, folds, _specs(2), seed=2, params=PARAMS)
    assert sm.scores.shape == (60, 2)
    assert sm.column_ids == ("C1", "C2")


def test_oof_scores_come_from_excluded_fold_models():
    views, y = _views(45, seed=3)
    folds = inner_folds(y, k=3, seed=4)
    sm = oof_scores(views, y, folds, _specs(2), seed=7, params=PARAMS)
    # rebuild one fold model by hand and match its scores bit for bit
    train, test = folds.split(1)
    m = svm_fit(views[0][train], y[train], PARAMS, seed=_fit_seed(7, 0, 1))
    np.testing.assert_array_equal(sm.scores[test, 0], m.decision_function(views[0][test]))


def test_oof_scores_on_noise_stay_modest():
    rng = np.random.default_rng(5)
    X = rng.normal(0, 1, (120, 4))
    y = np.where(rng.random(120) < 0.5, 1.0, -1.0)
    folds = inner_folds(y, k=4, seed=0)
    sm = oof_scores([X], y, folds, _specs(1), seed=1, params=PARAMS)
    acc = np.mean(np.where(sm.scores[:, 0] >= 0, 1, -1) == y)
    assert acc < 0.68  # resubstitution would be near 1.0 here


def test_stack_beats_single_stages_on_complementary_views():
    views, y = _views(240, seed=8)
    tr = np.arange(160)
    te = np.arange(160, 240)
    folds = inner_folds(y[tr], k=4, seed=2)
    model = stack_fit([v[tr] for v in views], y[tr], folds, _specs(2),
                      params_first=PARAMS, params_meta=PARAMS, seed=3)
    stacked = np.mean(np.where(stack_scores(model, [v[te] for v in views]) >= 0, 1, -1) == y[te])
    singles = []
    for v in views:
        m = svm_fit(v[tr], y[tr], PARAMS, seed=3)
        singles.append(np.mean(np.where(m.decision_function(v[te]) >= 0, 1, -1) == y[te]))
    assert stacked >= max(singles) + 0.05


def test_external_oracle_column_dominates():
    rng = np.random.default_rng(9)
    n = 90
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    noise = [rng.normal(0, 1, (n, 3))]
    row_indices = rng.permutation(1000)[:n]  # sparse, shuffled global ids
    ext = ScoreMatrix(np.c_[y * 3.0], ("EXT",), row_indices.copy())
    folds = inner_folds(y, k=3, seed=0)
    model = stack_fit(noise, y, folds, _specs(1), external_scores=ext,
                      params_meta=PARAMS, params_first=PARAMS, seed=1,
                      row_indices=row_indices)
    assert model.column_ids == ("C1", "EXT")
    assert model.external_ids == ("EXT",)
    scores = stack_scores(model, noise, external={"EXT": y * 3.0})
    assert np.mean(np.where(scores >= 0, 1, -1) == y) >= 0.97


def test_external_join_by_row_index():
    rng = np.random.default_rng(10)
    n = 30
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    rows = np.arange(100, 100 + n)
    # external matrix stored in scrambled order must still line up by id
    shuffle = rng.permutation(n)
    ext = ScoreMatrix(np.c_[y[shuffle] * 2.0], ("EXT",), rows[shuffle])
    folds = inner_folds(y, k=3, seed=1)
    model = stack_fit([rng.normal(0, 1, (n, 2))], y, folds, _specs(1),
                      external_scores=ext, params_meta=PARAMS,
                      params_first=PARAMS, row_indices=rows)
    scores = stack_scores(model, [rng.normal(0, 1, (n, 2))], external={"EXT": y * 2.0})
    assert np.mean(np.where(scores >= 0, 1, -1) == y) >= 0.9


def test_external_missing_row_index():
    rng = np.random.default_rng(11)
    n = 20
    y = np.r_[np.ones(10), -np.ones(10)]
    ext = ScoreMatrix(np.zeros((n - 1, 1)), ("EXT",), np.arange(n - 1))
    folds = inner_folds(y, k=2, seed=0)
    with pytest.raises(DataError, match="row_index"):
        stack_fit([rng.normal(0, 1, (n, 2))], y, folds, _specs(1),
                  external_scores=ext, params_meta=PARAMS, params_first=PARAMS)


def test_stack_scores_requires_external_columns():
    views, y = _views(40, seed=12)
    rows = np.arange(40)
    ext = ScoreMatrix(np.c_[y * 2.0], ("EXT",), rows)
    folds = inner_folds(y, k=2, seed=0)
    model = stack_fit([views[0]], y, folds, _specs(1), external_scores=ext,
                      params_meta=PARAMS, params_first=PARAMS, row_indices=rows)
    with pytest.raises(DataError, match="EXT"):
        stack_scores(model, [views[0]])
    with pytest.raises(DataError, match="aligned"):
        stack_scores(model, [views[0]], external={"EXT": np.zeros(3)})


def test_random_labels_stay_at_chance():
    rng = np.random.default_rng(13)
    n_tr, n_te = 120, 240
    X = rng.normal(0, 1, (n_tr + n_te, 5))
    y = np.where(rng.random(n_tr + n_te) < 0.5, 1.0, -1.0)
    folds = inner_folds(y[:n_tr], k=4, seed=1)
    model = stack_fit([X[:n_tr], X[:n_tr, :3]], y[:n_tr], folds, _specs(2),
                      params_first=PARAMS, params_meta=PARAMS, seed=2)
    acc = np.mean(np.where(stack_scores(model, [X[n_tr:], X[n_tr:, :3]]) >= 0, 1, -1) == y[n_tr:])
    assert 0.38 <= acc <= 0.62


def test_stack_predict_matches_scores():
    views, y = _views(50, seed=14)
    folds = inner_folds(y, k=3, seed=0)
    model = stack_fit(views, y, folds, _specs(2), params_first=PARAMS,
                      params_meta=PARAMS, seed=0)
    scores = stack_scores(model, views)
    label, score = stack_predict(model, [views[0][7], views[1][7]])
    assert score == pytest.approx(scores[7])
    assert label == (1 if scores[7] >= 0 else -1)


def test_stacked_roundtrip(tmp_path):
    views, y = _views(60, seed=15)
    rows = np.arange(60)
    ext = ScoreMatrix(np.c_[y * 1.5], ("EXT",), rows)
    folds = inner_folds(y, k=3, seed=0)
    model = stack_fit(views, y, folds, _specs(2), external_scores=ext,
                      params_meta=PARAMS, params_first=PARAMS, row_indices=rows)
    p = tmp_path / "stack.bin"
    save_stacked(p, model)
    back = load_stacked(p)
    assert back.column_ids == model.column_ids
    assert [s.id for s, _ in back.first_stage] == ["C1", "C2"]
    ext_scores = {"EXT": y * 1.5}
    np.testing.assert_array_equal(stack_scores(back, views, external=ext_scores),
                                  stack_scores(model, views, external=ext_scores))


def test_load_stacked_rejects_garbage(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"FSTKxxxx")
    with pytest.raises(DataError):
        load_stacked(p)


def test_misaligned_inputs():
    views, y = _views(30, seed=16)
    folds = inner_folds(y, k=3, seed=0)
    with pytest.raises(DataError):
        oof_scores(views, y[:-1], folds, _specs(2), params=PARAMS)
    with pytest.raises(DataError):
        oof_scores([views[0], views[1][:-2]], y, folds, _specs(2), params=PARAMS)
    with pytest.raises(ConfigurationError):
        oof_scores(views[:0], y, folds, [], params=PARAMS)
    with pytest.raises(ConfigurationError):
        stack_fit(views, y, folds, _specs(2), params_first=[PARAMS], params_meta=PARAMS)


def test_inner_folds_properties():
    y = np.r_[np.ones(17), -np.ones(14)]
    a = inner_folds(y, k=5, seed=3)
    b = inner_folds(y, k=5, seed=3)
    assert np.array_equal(a.assignments, b.assignments)
    sizes = np.bincount(a.assignments, minlength=5)
    assert sizes.max() - sizes.min() <= 1
    with pytest.raises(ConfigurationError):
        inner_folds(np.ones(3), k=5)
