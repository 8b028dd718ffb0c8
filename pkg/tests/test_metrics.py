import numpy as np
import pytest

from safer.errors import ArgumentError
from safer.metrics import (
    FeatureSet,
    accuracy_summary,
    feature_set_from_store,
    feature_set_to_store,
    read_predictions,
    style_similarity,
)
from safer.store import load_store, save_store


def fs(rows, labels=None):
    rows = np.asarray(rows, dtype=np.float64)
    labels = labels or [f"img{i}" for i in range(rows.shape[0])]
    return FeatureSet(labels=labels, features=rows)


def test_self_match_is_one(rng):
    ref = fs(rng.standard_normal((5, 7)))
    assert style_similarity(ref, ref) == pytest.approx(1.0, abs=1e-12)


def test_orthogonal_sets_score_zero():
    ref = fs([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    fake = fs([[0.0, 0.0, 1.0], [0.0, 0.0, 2.0]])
    assert style_similarity(ref, fake) == 0.0


def test_hand_computed_best_match():
    ref = fs([[1.0, 0.0], [0.0, 1.0]])
    fake = fs([[1.0, 1.0]])
    assert style_similarity(ref, fake) == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-12)


def test_scale_invariance(rng):
    ref = fs(rng.standard_normal((4, 6)))
    fake_rows = rng.standard_normal((3, 6))
    s1 = style_similarity(ref, fs(fake_rows))
    s2 = style_similarity(ref, fs(fake_rows * 17.0))
    scaled_ref = FeatureSet(ref.labels, ref.features * np.array([[2.0], [3.0], [0.5], [9.0]]))
    s3 = style_similarity(scaled_ref, fs(fake_rows))
    assert s1 == pytest.approx(s2, abs=1e-12)
    assert s1 == pytest.approx(s3, abs=1e-12)


def test_permutation_invariance(rng):
    ref_rows = rng.standard_normal((5, 4))
    fake_rows = rng.standard_normal((6, 4))
    s1 = style_similarity(fs(ref_rows), fs(fake_rows))
    s2 = style_similarity(fs(ref_rows[::-1].copy()), fs(fake_rows[::-1].copy()))
    assert s1 == pytest.approx(s2, abs=1e-12)


def test_duplicate_ref_row_never_decreases(rng):
    ref_rows = rng.standard_normal((4, 5))
    fake = fs(rng.standard_normal((7, 5)))
    base = style_similarity(fs(ref_rows), fake)
    grown = style_similarity(fs(np.vstack([ref_rows, ref_rows[1]])), fake)
    assert grown >= base - 1e-12


def test_dim_mismatch_and_zero_rows_rejected(rng):
    with pytest.raises(ArgumentError, match="dim"):
        style_similarity(fs(rng.standard_normal((2, 3))), fs(rng.standard_normal((2, 4))))
    with pytest.raises(ArgumentError, match="zero"):
        fs([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ArgumentError):
        FeatureSet(labels=[], features=np.zeros((0, 4)))


def test_accuracy_all_match():
    preds = [("a", "cat"), ("b", "cat"), ("c", "cat")]
    acc, counts = accuracy_summary(preds, "cat")
    assert acc == 1.0
    assert counts == {"cat": 3}


def test_accuracy_none_match():
    acc, _ = accuracy_summary([("a", "dog"), ("b", "bird")], "cat")
    assert acc == 0.0


def test_accuracy_partial():
    preds = [(f"i{k}", "cat" if k < 3 else "dog") for k in range(12)]
    acc, counts = accuracy_summary(preds, "cat")
    assert acc == 0.25
    assert counts == {"cat": 3, "dog": 9}


def test_accuracy_empty_rejected():
    with pytest.raises(ArgumentError, match="non-empty"):
        accuracy_summary([], "cat")


def test_read_predictions_parses_tab_records():
    text = "img0\tcat\nimg1\tdog\n\nimg2\tcat\n"
    assert read_predictions(text) == [("img0", "cat"), ("img1", "dog"), ("img2", "cat")]
    with pytest.raises(ArgumentError, match="line 1"):
        read_predictions("no-tab-here\n")


def test_feature_set_store_roundtrip(tmp_path, rng):
    original = fs(rng.standard_normal((3, 4)), labels=["a", "b", "c"])
    path = tmp_path / "features.st"
    save_store(feature_set_to_store(original), path)
    back = feature_set_from_store(load_store(path))
    assert back.labels == ["a", "b", "c"]
    np.testing.assert_array_equal(back.features, original.features)
