import numpy as np
import pytest

from octune.dataset import (Dataset, IngestionError, ScalingProfile, derive_problems,
                            fit_iqr_scaling, load_csv, stratified_kfold)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_three_rows(tmp_path):
    d = load_csv(write(tmp_path, "x,y,class\n1,2,a\n3,4,a\n5,6,b\n"))
    assert d.features.shape == (3, 2)
    assert d.classes == ["a", "b"]
    assert d.name == "d"


def test_empty_file_rejected(tmp_path):
    with pytest.raises(IngestionError):
        load_csv(write(tmp_path, ""))


def test_nan_row_dropped(tmp_path):
    d = load_csv(write(tmp_path, "x,class\n1,a\nNaN,a\n3,b\n"), missing="drop")
    np.testing.assert_array_equal(d.features.ravel(), [1, 3])


def test_nan_rejected_by_default(tmp_path):
    with pytest.raises(IngestionError, match="row 3"):
        load_csv(write(tmp_path, "x,class\n1,a\nNaN,a\n3,b\n"))


def test_non_numeric_is_type_error(tmp_path):
    with pytest.raises(TypeError, match="column 'x'"):
        load_csv(write(tmp_path, "x,class\n1,a\nabc,b\n"))


def test_ragged_row_names_row(tmp_path):
    with pytest.raises(IngestionError, match="row 2"):
        load_csv(write(tmp_path, "x,y,class\n1,a\n"))


def test_label_column_by_index(tmp_path):
    d = load_csv(write(tmp_path, "lab,x\na,1\nb,2\n"), label_column=0)
    assert d.classes == ["a", "b"]


def test_missing_label_column(tmp_path):
    with pytest.raises(IngestionError):
        load_csv(write(tmp_path, "x,y\n1,2\n"), label_column="class")


def test_dataset_is_read_only():
    d = Dataset("t", np.zeros((2, 1)), np.array(["a", "b"]))
    with pytest.raises(ValueError):
        d.features[0, 0] = 1.0


def make(sizes):
    labels = np.concatenate([[c] * s for c, s in sizes.items()])
    return Dataset("t", np.arange(len(labels), dtype=float)[:, None], labels)


def test_derive_one_problem_per_class():
    probs = derive_problems(make({"a": 10, "b": 12, "c": 11}))
    assert [p.target for p in probs] == ["a", "b", "c"]
    assert [p.problem_id for p in probs] == ["t:a", "t:b", "t:c"]
    assert probs[1].n_target == 12 and probs[1].n_other == 21


def test_derive_single_class_is_invalid():
    probs = derive_problems(make({"a": 15}))
    assert len(probs) == 1 and not probs[0].valid


def test_derive_filters_small_classes():
    probs = derive_problems(make({"a": 40, "b": 3}), min_class_size=10)
    assert [p.target for p in probs] == ["a"]


def test_derive_none_qualify():
    assert derive_problems(make({"a": 2, "b": 3})) == []


@pytest.mark.parametrize("column, divisor", [
    ([0, 2, 4, 6, 8], 4.0),
    ([5, 5, 5], 1.0),
    ([0, 0, 0, 10], 2.5),
    ([0, 0, 0, 0, 10], 10.0),
])
def test_iqr_scaling(column, divisor):
    s = fit_iqr_scaling(np.array(column, dtype=float)[:, None])
    np.testing.assert_allclose(s.divisors, [divisor])


def test_scaling_roundtrip_and_compose():
    s = ScalingProfile(np.array([2.0, 4.0]))
    assert ScalingProfile.from_json(s.to_json()).divisors.tolist() == [2.0, 4.0]
    np.testing.assert_array_equal(s.compose(s).divisors, [4.0, 16.0])
    np.testing.assert_array_equal(s.apply(np.array([[2.0, 8.0]])), [[1.0, 2.0]])


def test_scaling_rejects_nonpositive():
    with pytest.raises(ValueError):
        ScalingProfile(np.array([0.0]))


def test_kfold_exact_stratification():
    y = np.r_[np.ones(10, bool), np.zeros(10, bool)]
    folds = stratified_kfold(y, 5, seed=3)
    seen = np.concatenate([te for _, te in folds])
    assert sorted(seen.tolist()) == list(range(20))
    for tr, te in folds:
        assert y[te].sum() == 2 and (~y[te]).sum() == 2
        assert len(np.intersect1d(tr, te)) == 0


def test_kfold_deterministic():
    y = np.r_[np.ones(13, bool), np.zeros(7, bool)]
    a, b = stratified_kfold(y, 5, seed=9), stratified_kfold(y, 5, seed=9)
    for (ta, ea), (tb, eb) in zip(a, b):
        np.testing.assert_array_equal(ta, tb)
        np.testing.assert_array_equal(ea, eb)


def test_kfold_balanced_sizes():
    y = np.r_[np.ones(13, bool), np.zeros(7, bool)]
    sizes = [len(te) for _, te in stratified_kfold(y, 5, seed=1)]
    assert max(sizes) - min(sizes) <= 1


def test_kfold_too_few_targets():
    with pytest.raises(ValueError, match="prob"):
        stratified_kfold(np.r_[np.ones(4, bool), np.zeros(6, bool)], 5, name="prob")
