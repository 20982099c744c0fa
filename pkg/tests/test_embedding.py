from fractions import Fraction

import numpy as np
import pytest
from sklearn.base import clone

from oracles import exact_rre
from pgnkd.embedding import (
    N_FPV_CLASSES,
    N_TPV_CLASSES,
    PlaceClassifier,
    PlaceClassScheme,
    compress_600_to_50,
    harmonic,
    pose_to_class,
    rre,
)
from pgnkd.harness.config import resolve_workspace
from pgnkd.harness.pipeline import train_classifiers
from pgnkd.workspace import Pose

SCHEME = PlaceClassScheme(10.0, 5.0)


@pytest.mark.parametrize("heading, fpv", [(0.0, 0), (29.0, 1), (359.0, 0), (14.99, 0), (15.0, 1), (345.0, 0)])
def test_pose_to_class_angle_bins(heading, fpv):
    p = Pose(0.0, 0.0, heading)
    assert pose_to_class(SCHEME, p, "fpv") == fpv
    assert pose_to_class(SCHEME, p, "tpv") == 0


def test_pose_to_class_far_corner():
    p = Pose(9.99, 4.99, 180.0)
    assert pose_to_class(SCHEME, p, "tpv") == 49
    assert pose_to_class(SCHEME, p, "fpv") == 49 * 12 + 6


def test_pose_to_class_rejects_unknown_modality():
    with pytest.raises(ValueError):
        pose_to_class(SCHEME, Pose(1.0, 1.0), "rgb")


def test_tpv_class_is_fpv_class_div_12_on_grid():
    for x in np.arange(0.0, 10.0, 0.07):
        for y in np.arange(0.0, 5.0, 0.07):
            for h in range(0, 360, 7):
                p = Pose(float(x), float(y), float(h))
                assert pose_to_class(SCHEME, p, "tpv") == pose_to_class(SCHEME, p, "fpv") // 12


@pytest.mark.parametrize("probs, expected", [
    ((0.5, 0.3, 0.2), (Fraction(6, 11), Fraction(3, 11), Fraction(2, 11))),
    ((0.2, 0.3, 0.5), (Fraction(2, 11), Fraction(3, 11), Fraction(6, 11))),
    ((1 / 3, 1 / 3, 1 / 3), (Fraction(6, 11), Fraction(3, 11), Fraction(2, 11))),
])
def test_rre_examples(probs, expected):
    assert exact_rre(list(probs)) == list(expected)
    assert rre(probs) == pytest.approx([float(f) for f in expected], abs=1e-15)


def test_rre_matches_exact_oracle_with_ties(rng):
    for _ in range(50):
        p = rng.integers(0, 5, size=40).astype(float)
        p /= p.sum()
        assert rre(p) == pytest.approx([float(f) for f in exact_rre(p.tolist())], abs=1e-15)


def test_rre_row_wise():
    P = np.array([[0.5, 0.3, 0.2], [0.2, 0.3, 0.5]])
    assert rre(P)[1] == pytest.approx(rre(P[1]))


def test_harmonic_numbers():
    assert harmonic(3) == pytest.approx(11 / 6)
    assert harmonic(13) == pytest.approx(float(sum(Fraction(1, k) for k in range(1, 14))), abs=1e-15)


def test_compress_examples():
    v = np.zeros(600)
    v[0] = 1.0
    assert compress_600_to_50(v)[0] == 1.0
    v = np.zeros(600)
    v[599] = 1.0
    out = compress_600_to_50(v)
    assert out[49] == 1.0 and out.sum() == 1.0
    assert compress_600_to_50(np.full(600, 1 / 600)) == pytest.approx(np.full(50, 0.02), abs=1e-15)


def test_compress_rejects_wrong_length():
    with pytest.raises(ValueError):
        compress_600_to_50(np.zeros(599))


def test_classifier_separable_toy():
    X = np.array([[0.0, 0.0], [0.1, 0.2], [0.2, 0.1], [3.0, 3.0], [3.1, 2.9], [2.9, 3.2]])
    y = np.array([0, 0, 0, 1, 1, 1])
    clf = PlaceClassifier(n_classes=2, learning_rate=0.1, batch_size=6, random_state=0).fit(X, y)
    assert np.all(clf.predict(X) == y)
    assert np.allclose(clf.predict_proba(X).sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(clf.transform(X).sum(axis=1), 1.0, atol=1e-9)


def test_classifier_duplicate_point_splits_between_its_labels():
    X = np.array([[1.0, 2.0], [1.0, 2.0]])
    y = np.array([0, 2])
    clf = PlaceClassifier(n_classes=4, learning_rate=0.1, batch_size=2, max_epochs=500, tol=0.0).fit(X, y)
    p = clf.predict_proba(X[:1])[0]
    # the logistic optimum on one point puts the empirical label frequencies there
    assert p[0] == pytest.approx(0.5, abs=1e-3) and p[2] == pytest.approx(0.5, abs=1e-3)
    assert p[1] < 1e-3 and p[3] < 1e-3


def test_classifier_keeps_unseen_classes():
    X = np.array([[0.0], [1.0]])
    clf = PlaceClassifier(n_classes=5, max_epochs=5).fit(X, [0, 3])
    assert clf.predict_proba(X).shape == (2, 5)


def test_classifier_validation():
    with pytest.raises(ValueError):
        PlaceClassifier(n_classes=2).fit(np.zeros((0, 3)), np.zeros(0))
    with pytest.raises(ValueError):
        PlaceClassifier(n_classes=2).fit(np.zeros((2, 3)), [0, 2])
    with pytest.raises(ValueError):
        PlaceClassifier(n_classes=2).fit(np.full((2, 3), np.nan), [0, 1])
    unfitted = PlaceClassifier()
    with pytest.raises(Exception):
        unfitted.predict(np.zeros((1, 3)))


def test_classifier_deterministic_and_clonable(rng):
    X = rng.normal(size=(60, 4))
    y = rng.integers(0, 3, size=60)
    a = PlaceClassifier(n_classes=3, max_epochs=20, random_state=7).fit(X, y)
    b = clone(a).fit(X, y)
    assert np.array_equal(a.coef_, b.coef_) and np.array_equal(a.intercept_, b.intercept_)


def test_proba_one_matches_predict_proba(rng):
    X = rng.normal(size=(30, 4))
    clf = PlaceClassifier(n_classes=3, max_epochs=10).fit(X, rng.integers(0, 3, size=30))
    assert clf.proba_one(X[4]) == pytest.approx(clf.predict_proba(X[4:5])[0], abs=1e-15)


@pytest.mark.slow
def test_bundled_classifiers_fit_training_data():
    from pgnkd.harness.pipeline import place_training_data

    w = resolve_workspace("office")
    fpv, tpv = train_classifiers(w, per_class=20, seed=0)
    X_fpv, y_fpv, X_tpv, y_tpv = place_training_data(w, 20, 0)
    assert fpv.coef_.shape[1] == N_FPV_CLASSES and tpv.coef_.shape[1] == N_TPV_CLASSES
    assert np.mean(fpv.predict(X_fpv) == y_fpv) >= 0.9
    assert np.mean(tpv.predict(X_tpv) == y_tpv) >= 0.9
