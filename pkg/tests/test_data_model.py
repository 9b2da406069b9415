import numpy as np
import pytest

from fairadjust.data_model import (AdjustmentDataset, DataError, from_values, load_dataset,
                                   make_splits, save_dataset)
from fairadjust.synth import RegimeSpec, generate


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_minimal_csv(tmp_path):
    p = write_csv(tmp_path / "d.csv", "y,y_hat,a\na,a,g0\na,b,g0\nb,b,g1\nb,a,g1\n")
    ds = load_dataset(p)
    assert ds.n == 4 and ds.n_classes == 2 and ds.n_groups == 2
    assert ds.class_names == ("a", "b") and ds.group_names == ("g0", "g1")
    assert ds.y.tolist() == [0, 0, 1, 1]
    assert ds.y_hat.tolist() == [0, 1, 1, 0]


def test_load_custom_columns(tmp_path):
    p = write_csv(tmp_path / "d.csv", "truth,pred,race\n1,2,x\n2,1,y\n")
    ds = load_dataset(p, y_col="truth", yhat_col="pred", a_col="race")
    assert ds.n == 2 and ds.class_names == ("1", "2")


def test_predicted_only_labels_expand_class_space():
    ds = from_values(["a", "a", "b"], ["a", "c", "b"], ["g", "h", "g"])
    assert ds.class_names == ("a", "b", "c")
    assert ds.n_classes == 3


def test_single_group_rejected(tmp_path):
    p = write_csv(tmp_path / "d.csv", "y,y_hat,a\na,a,g0\nb,b,g0\n")
    with pytest.raises(DataError, match="single protected group"):
        load_dataset(p)


def test_missing_column_and_empty_file(tmp_path):
    p = write_csv(tmp_path / "d.csv", "y,pred,a\na,a,g0\n")
    with pytest.raises(DataError, match="missing column"):
        load_dataset(p)
    p2 = write_csv(tmp_path / "e.csv", "y,y_hat,a\n")
    with pytest.raises(DataError, match="no data rows"):
        load_dataset(p2)


def test_large_file_roundtrip(tmp_path):
    # large prediction-triple file: N=22406, C=3, G=2
    ds = generate(RegimeSpec(groups=2, class_balance="one-rare",
                             group_balance="one-slight", pred_bias="low",
                             n=22406, seed=42))
    p = tmp_path / "bar.csv"
    save_dataset(ds, p)
    back = load_dataset(str(p))
    assert back.n == 22406 and back.n_classes == 3 and back.n_groups == 2
    assert np.array_equal(back.y, ds.y)
    assert np.array_equal(back.y_hat, ds.y_hat)
    assert np.array_equal(back.a, ds.a)
    assert back.class_names == ds.class_names and back.group_names == ds.group_names


def test_dataset_invariants():
    with pytest.raises(DataError):
        AdjustmentDataset(np.array([0]), np.array([0, 1]), np.array([0, 1]),
                          ("a", "b"), ("g", "h"))
    with pytest.raises(DataError):
        AdjustmentDataset(np.array([0, 2]), np.array([0, 1]), np.array([0, 1]),
                          ("a", "b"), ("g", "h"))
    ds = from_values(["a", "b"], ["a", "b"], ["g", "h"])
    with pytest.raises(ValueError):
        ds.y[0] = 1  # arrays are frozen


def test_make_splits_exact_division():
    ds = from_values(list("aabb") * 3, list("aabb") * 3, list("ghgh") * 3)
    plan = make_splits(ds, 4, seed=0)
    sizes = np.bincount(plan.assignments, minlength=4)
    assert sizes.tolist() == [3, 3, 3, 3]


def test_make_splits_uneven_division_fold_sizes():
    # 22406 = 5*4481 + 1, so fold sizes must be four 4481s and one 4482
    ds = generate(RegimeSpec(groups=2, class_balance="balanced",
                             group_balance="no-minority", pred_bias="low",
                             n=22406, seed=7))
    plan = make_splits(ds, 5, seed=9)
    sizes = sorted(np.bincount(plan.assignments, minlength=5).tolist())
    assert sizes == [4481, 4481, 4481, 4481, 4482]


def test_make_splits_validation():
    ds = from_values(["a", "b", "a", "b"], ["a", "b", "a", "b"], ["g", "h", "g", "h"])
    with pytest.raises(DataError):
        make_splits(ds, 0, 0)
    with pytest.raises(DataError):
        make_splits(ds, 1, 0)
    with pytest.raises(DataError):
        make_splits(ds, 5, 0)


def test_make_splits_deterministic_and_balanced():
    ds = generate(RegimeSpec(groups=3, class_balance="two-rare",
                             group_balance="two-strong", pred_bias="high-two",
                             n=1013, seed=3))
    p1 = make_splits(ds, 5, seed=21)
    p2 = make_splits(ds, 5, seed=21)
    assert np.array_equal(p1.assignments, p2.assignments)
    assert p1.assignments.tobytes() == p2.assignments.tobytes()
    sizes = np.bincount(p1.assignments, minlength=5)
    assert sizes.max() - sizes.min() <= 1
    assert not np.array_equal(p1.assignments, make_splits(ds, 5, seed=22).assignments)


def test_make_splits_stratifies_large_cells():
    ds = generate(RegimeSpec(groups=2, class_balance="balanced",
                             group_balance="no-minority", pred_bias="low",
                             n=5000, seed=5))
    folds = 5
    plan = make_splits(ds, folds, seed=1)
    cell = ds.a * ds.n_classes + ds.y
    for cid in np.unique(cell):
        rows = np.flatnonzero(cell == cid)
        if len(rows) < folds:
            continue
        per_fold = np.bincount(plan.assignments[rows], minlength=folds)
        assert per_fold.min() >= len(rows) // folds
