import json

import numpy as np
import pytest

from cbfs.core import PLAIN, ConsistencyMode, FeatureAssignment, classify_features, is_consistent, sample_centroids
from cbfs.dataset import DataMatrix, LabeledDataset, SampleClassification, generate_planted
from cbfs.errors import EnumerationLimitError, FeatureMismatchError
from cbfs.evaluation import brute_force_max_consistent, classify_validation, margin_report

from .oracles import loop_brute_force, small_instances


def dataset(values, labels, names=None, role="train", features=None):
    A = DataMatrix.from_array(values, feature_names=features)
    k = max(labels) + 1
    return LabeledDataset(A, SampleClassification(labels, k, names), role)


# ---- exhaustive oracle -----------------------------------------------------

def test_oracle_three_features(three):
    A, B = three
    res = brute_force_max_consistent(A, B)
    assert res.max_count == 2
    assert res.witness.tolist() == [1, 1, 0]


def test_oracle_nothing_consistent():
    d = dataset([[3, 0, 1], [0, 4, 2.1]], [0, 0, 1])
    res = brute_force_max_consistent(d.matrix, d.labels)
    assert (res.max_count, res.witness, res.feasible) == (0, None, False)
    assert loop_brute_force(d.matrix, d.labels, PLAIN) == (0, None)


def test_oracle_enumeration_limit():
    A = DataMatrix.from_array(np.ones((21, 2)))
    with pytest.raises(EnumerationLimitError):
        brute_force_max_consistent(A, SampleClassification([0, 1], 2))


@pytest.mark.parametrize("mode", [PLAIN, ConsistencyMode.alpha(0.5), ConsistencyMode.beta(1.2)],
                         ids=["plain", "alpha", "beta"])
def test_vectorized_oracle_matches_loop(mode):
    for d in small_instances(seed=5, count=12, max_m=9, max_n=6):
        fast = brute_force_max_consistent(d.matrix, d.labels, mode, chunk=37)
        slow_count, slow_witness = loop_brute_force(d.matrix, d.labels, mode)
        assert fast.max_count == slow_count
        if slow_witness is None:
            assert fast.witness is None
        else:
            np.testing.assert_array_equal(fast.witness, slow_witness)


def test_oracle_witness_is_consistent():
    for d in small_instances(seed=6, count=10, max_m=10):
        res = brute_force_max_consistent(d.matrix, d.labels)
        if res.feasible:
            assert is_consistent(d.matrix, d.labels, res.witness).consistent
            assert int(res.witness.sum()) == res.max_count


def test_alpha_monotone():
    for d in small_instances(seed=8, count=6, max_m=9):
        counts = [brute_force_max_consistent(d.matrix, d.labels, ConsistencyMode.alpha(a)).max_count
                  for a in (0.0, 0.5, 2.0, 5.0, 20.0)]
        assert counts == sorted(counts, reverse=True)


def test_beta_monotone_nonnegative():
    d = generate_planted(9, 6, 2, signal=10.0, noise_features=3, seed=4, jitter=0.0)
    assert np.all(d.matrix.values >= 0)
    counts = [brute_force_max_consistent(d.matrix, d.labels, ConsistencyMode.beta(b)).max_count
              for b in (1.0, 1.5, 3.0, 10.0, 1000.0)]
    assert counts == sorted(counts, reverse=True)
    # zero off-cluster values keep every planted feature at any beta
    assert counts[-1] == 6


# ---- margins ---------------------------------------------------------------

def test_margin_report(three):
    A, B = three
    rep = margin_report(A, B, epsilon=1.0)
    assert [fm.feature for fm in rep.margins] == ["f3", "f1", "f2"]
    assert [fm.margin for fm in rep.margins] == [1.0, 4.0, 4.0]
    assert [fm.cluster for fm in rep.margins] == [1, 0, 1]
    assert rep.count_within_epsilon == 1
    assert "1 feature(s) with margin <= 1" in rep.summary()
    assert margin_report(A, B).count_within_epsilon is None


# ---- validation ------------------------------------------------------------

def test_validation_on_training_data_is_perfect():
    d = generate_planted(10, 8, 3, seed=2)
    f = classify_features(sample_centroids(d.matrix, d.labels))
    x = np.ones(d.matrix.m)
    report = classify_validation(d, f, x, d)
    assert report.err == 0
    assert all(v.correct and v.margin > 0 for v in report.per_sample)


def test_validation_counts_errors_and_matches_by_name():
    train = dataset([[5, 1], [1, 5]], [0, 1], ["a", "b"])
    f = FeatureAssignment([0, 1], 2)
    # class order reversed in the validation file
    val = dataset([[6, 0, 1], [1, 4, 3]], [1, 0, 1], ["b", "a"], role="validation")
    report = classify_validation(train, f, [1, 1], val)
    assert [v.predicted_class for v in report.per_sample] == ["a", "b", "b"]
    assert [v.true_class for v in report.per_sample] == ["a", "b", "a"]
    assert report.err == 1


def test_validation_tie_is_an_error():
    train = dataset([[5, 1], [1, 5]], [0, 1], ["a", "b"])
    val = dataset([[2], [2]], [0], ["a"], role="validation")
    report = classify_validation(train, FeatureAssignment([0, 1], 2), [1, 1], val)
    assert report.per_sample[0].predicted_class is None
    assert report.err == 1


def test_validation_feature_mismatch():
    train = dataset([[5, 1], [1, 5]], [0, 1], features=["g1", "g2"])
    val = dataset([[5, 1], [1, 5]], [0, 1], features=["g2", "g1"], role="validation")
    with pytest.raises(FeatureMismatchError):
        classify_validation(train, FeatureAssignment([0, 1], 2), [1, 1], val)


def test_validation_serialization():
    d = generate_planted(6, 4, 2, seed=0)
    f = classify_features(sample_centroids(d.matrix, d.labels))
    report = classify_validation(d, f, np.ones(6), d)
    doc = json.loads(report.to_json())
    assert doc["err"] == 0 and len(doc["samples"]) == 4
    rows = report.to_csv().splitlines()
    assert rows[0] == "sample,true_class,predicted_class,margin,correct"
    assert len(rows) == 5 and rows[1].endswith(",1")
