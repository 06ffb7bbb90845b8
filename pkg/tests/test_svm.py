import numpy as np
import pytest

from driftaudit import chance_level, svm_train
from driftaudit.errors import NonFiniteFeature, SingleClass
from driftaudit.svm import SvmModel, primal_objective

from oracles import hinge_objective_grid


def test_separable_pair_axis_aligned():
    x = np.array([[-1.0, 0.0], [1.0, 0.0]])
    y = ["A", "B"]
    model = svm_train(x, y, seed=0)
    assert model.classes == ("A", "B")
    assert list(model.predict(x)) == ["A", "B"]
    # per-class weight points toward its own class along the x axis
    assert model.coef[0, 0] < 0 < model.coef[1, 0]
    assert abs(model.coef[0, 1]) < 1e-9 and abs(model.coef[1, 1]) < 1e-9


def test_identical_features_fall_back_to_majority_prior():
    x = np.zeros((6, 3))
    y = ["A", "A", "A", "A", "B", "B"]
    model = svm_train(x, y, seed=1)
    preds = model.predict(x)
    assert len(set(preds)) == 1  # constant prediction
    acc = float(np.mean(preds == np.asarray(y, dtype=object)))
    assert acc == chance_level(y)


def test_duality_gap_below_tolerance():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(30, 4))
    y = [f"c{i % 3}" for i in range(30)]
    model = svm_train(x, y, C=1.0, seed=2)
    for gap in model.gaps:
        assert gap <= 1e-4 * 1.0 * 30


def test_objective_matches_grid_search_oracle():
    rng = np.random.default_rng(3)
    for case in range(3):
        x = rng.uniform(-2, 2, size=(20, 2))
        y_signed = np.where(rng.random(20) < 0.5, 1.0, -1.0)
        labels = ["P" if s > 0 else "N" for s in y_signed]
        model = svm_train(x, labels, C=1.0, seed=case)
        k = model.classes.index("P")
        w, b = model.coef[k], float(model.intercept[k])
        got = primal_objective(w, b, x, y_signed, 1.0)
        best = hinge_objective_grid(x, y_signed, 1.0, -4.0, 4.0, 81)
        assert abs(w).max() < 4.0 and abs(b) < 4.0
        assert got <= best * 1.01
        assert best <= got * 1.01


def test_training_is_deterministic():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(25, 3))
    y = [f"c{i % 4}" for i in range(25)]
    a = svm_train(x, y, seed=77)
    b = svm_train(x, y, seed=77)
    assert np.array_equal(a.coef, b.coef)
    assert np.array_equal(a.intercept, b.intercept)
    assert a.epochs == b.epochs


def test_prediction_invariant_under_decision_scaling():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(20, 3))
    y = [f"c{i % 3}" for i in range(20)]
    model = svm_train(x, y, seed=6)
    scaled = SvmModel(
        classes=model.classes, coef=model.coef * 42.0,
        intercept=model.intercept * 42.0, C=model.C,
        epochs=model.epochs, gaps=model.gaps,
    )
    probe = rng.normal(size=(50, 3))
    assert list(model.predict(probe)) == list(scaled.predict(probe))


def test_ties_broken_by_lowest_class_index():
    model = SvmModel(
        classes=("a", "b", "c"), coef=np.zeros((3, 2)),
        intercept=np.zeros(3), C=1.0, epochs=(1, 1, 1), gaps=(0.0, 0.0, 0.0),
    )
    preds = model.predict(np.ones((4, 2)))
    assert list(preds) == ["a"] * 4


def test_single_class_raises():
    with pytest.raises(SingleClass):
        svm_train(np.ones((3, 2)), ["x", "x", "x"])


def test_non_finite_features_raise():
    with pytest.raises(NonFiniteFeature):
        svm_train(np.array([[1.0, np.inf], [0.0, 1.0]]), ["a", "b"])


def test_one_model_per_class():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(12, 2))
    y = [f"c{i % 4}" for i in range(12)]
    model = svm_train(x, y, seed=0)
    assert model.coef.shape == (4, 2)
    assert len(model.epochs) == 4


def test_chance_level_examples():
    assert chance_level(["a", "b", "c"] * 5) == pytest.approx(1 / 3)
    assert chance_level([f"g{i}" for i in range(10)] * 3) == 0.1
    assert chance_level(["A", "A", "B"]) == pytest.approx(2 / 3)
