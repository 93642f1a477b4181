import math

import numpy as np
import pytest

from src.schemas.corpus import PairId
from src.services.errors import ClassCoverageError, PreconditionError, ValidationError
from src.services.evaluation import (
    PredictionRecord,
    check_training_coverage,
    cohen_kappa,
    cross_validate,
    feature_correlations,
    greedy_evaluation,
    greedy_group_order,
    precision_at_k,
    rank_metrics,
    regression_metrics,
    stratified_folds,
)
from src.services.features import FeatureMatrix


def pair(i: int) -> PairId:
    return PairId(f"P{i:03d}", "r")


def records(predicted: list[float], truth: list[float]) -> list[PredictionRecord]:
    return [PredictionRecord(pair(i), p, t) for i, (p, t) in enumerate(zip(predicted, truth))]


def circle_clusters(
    classes: int = 5, per_class: int = 20, seed: int = 0
) -> tuple[FeatureMatrix, dict[PairId, float]]:
    """Tight clusters on a circle of radius 10, one per intensity class."""
    rng = np.random.default_rng(seed)
    points, labels = [], {}
    for c in range(classes):
        angle = 2 * math.pi * c / 5
        centre = 10.0 * np.array([math.cos(angle), math.sin(angle)])
        for _ in range(per_class):
            labels[pair(len(points))] = float(c + 1)
            points.append(centre + rng.normal(scale=0.5, size=2))
    values = np.asarray(points)
    matrix = FeatureMatrix(
        header=("CF:x", "CF:y", "SF:x", "SF:y"),
        pairs=tuple(labels),
        values=np.hstack([values, values]),
        dense_columns=4,
    )
    return matrix, labels


### Regression metrics


def test_perfect_predictions() -> None:
    metrics = regression_metrics(records([1, 2, 3, 4, 5], [1, 2, 3, 4, 5]))
    assert metrics.rmse == 0.0
    assert metrics.pearson == pytest.approx(1.0)
    assert metrics.r_squared == 1.0
    assert metrics.n == 5


def test_constant_offset() -> None:
    metrics = regression_metrics(records([2, 3, 4, 5], [1, 2, 3, 4]))
    assert metrics.rmse == pytest.approx(1.0)
    assert metrics.pearson == pytest.approx(1.0)
    assert metrics.r_squared == pytest.approx(0.2)


def test_hand_computed_metrics() -> None:
    metrics = regression_metrics(records([1, 2, 3, 4, 5], [2, 2, 3, 5, 4]))
    assert metrics.rmse == pytest.approx(math.sqrt(0.6))
    assert metrics.pearson == pytest.approx(7 / math.sqrt(68))
    assert metrics.r_squared == pytest.approx(1 - 3 / 6.8)
    assert metrics.as_dict()["r2"] == metrics.r_squared


def test_constant_truth_leaves_correlations_undefined() -> None:
    metrics = regression_metrics(records([1, 2, 4], [3, 3, 3]))
    assert metrics.pearson is None
    assert metrics.r_squared is None
    assert metrics.rmse == pytest.approx(math.sqrt(2))


def test_regression_needs_two_records() -> None:
    with pytest.raises(PreconditionError):
        regression_metrics(records([1], [1]))


def test_prediction_outside_range_rejected() -> None:
    with pytest.raises(ValidationError):
        PredictionRecord(pair(0), 0.0, 3.0)


### Rank correlations


def test_rank_identical_and_reversed() -> None:
    a = {"a": 1.0, "b": 2.0, "c": 3.0}
    assert rank_metrics(a, a) == pytest.approx((1.0, 1.0))
    reversed_ = {"a": 3.0, "b": 2.0, "c": 1.0}
    assert rank_metrics(a, reversed_) == pytest.approx((-1.0, -1.0))


def test_rank_one_adjacent_swap() -> None:
    a = {k: float(i) for i, k in enumerate("abcde")}
    b = {**a, "a": 1.0, "b": 0.0}
    spearman, kendall = rank_metrics(a, b)
    assert spearman == pytest.approx(0.9)
    assert kendall == pytest.approx(0.8)


def test_rank_constant_side_is_undefined() -> None:
    assert rank_metrics({"a": 1.0, "b": 2.0}, {"a": 0.0, "b": 0.0}) == (None, None)


def test_rank_rejects_mismatched_ids() -> None:
    with pytest.raises(ValidationError):
        rank_metrics({"a": 1.0, "b": 2.0}, {"a": 1.0, "c": 2.0})
    with pytest.raises(PreconditionError):
        rank_metrics({"a": 1.0}, {"a": 1.0})


### Agreement


def test_kappa_perfect_agreement() -> None:
    a = {"x": 1, "y": 2, "z": 3}
    assert cohen_kappa(a, a) == pytest.approx(1.0)


def test_kappa_hand_computed() -> None:
    first = [1] * 5 + [2] * 5
    second = [1, 1, 1, 1, 2, 2, 2, 2, 2, 1]
    a = {f"i{n}": v for n, v in enumerate(first)}
    b = {f"i{n}": v for n, v in enumerate(second)}
    assert cohen_kappa(a, b) == pytest.approx(0.6)


def test_kappa_chance_agreement_is_zero() -> None:
    a = {"a": 1, "b": 1, "c": 2, "d": 2}
    b = {"a": 1, "b": 2, "c": 1, "d": 2}
    assert cohen_kappa(a, b) == pytest.approx(0.0)


def test_kappa_undefined_when_everyone_agrees_on_one_class() -> None:
    a = {"a": 3, "b": 3, "c": 3}
    assert cohen_kappa(a, a) is None


def test_kappa_needs_shared_items() -> None:
    with pytest.raises(PreconditionError):
        cohen_kappa({"a": 1}, {"b": 1})


### Precision at k


def test_precision_at_k() -> None:
    ranked = [f"p{i}" for i in range(20)]
    relevant = {"p0", "p1", "p2", "p4", "p5", "p7", "p9", "p15"}
    assert precision_at_k(ranked, relevant, 10).value == pytest.approx(0.7)
    assert precision_at_k(ranked, relevant, 3).value == 1.0
    assert precision_at_k(ranked, {"p19"}, 5).value == 0.0


def test_precision_at_k_truncated() -> None:
    result = precision_at_k(["a", "b", "c", "d"], {"a", "c"}, 10)
    assert result.value == 0.5
    assert result.truncated
    assert result.evaluated == 4


def test_precision_at_k_rejects_zero() -> None:
    with pytest.raises(PreconditionError):
        precision_at_k(["a"], {"a"}, 0)


### Folds


def _hard_labels(counts: dict[int, int]) -> dict[PairId, int]:
    labels, n = {}, 0
    for label, count in counts.items():
        for _ in range(count):
            labels[pair(n)] = label
            n += 1
    return labels


def test_folds_partition_the_labels() -> None:
    labels = _hard_labels({1: 3, 2: 11, 3: 4, 4: 2, 5: 3})
    plan = stratified_folds(labels, 5, seed=7)
    assert set(plan.assignments) == set(labels)
    assert max(plan.sizes()) - min(plan.sizes()) <= 1
    assert sum(plan.sizes()) == len(labels)
    for label in (1, 2, 3, 4, 5):
        folds = {plan.assignments[p] for p, v in labels.items() if v == label}
        assert len(folds) >= 2


def test_leave_one_out() -> None:
    labels = _hard_labels({1: 2, 2: 2, 3: 2})
    plan = stratified_folds(labels, len(labels), seed=0)
    assert plan.sizes() == [1] * len(labels)


def test_folds_are_deterministic_per_seed() -> None:
    labels = _hard_labels({1: 10, 2: 10, 3: 10})
    assert stratified_folds(labels, 3, seed=1) == stratified_folds(labels, 3, seed=1)


@pytest.mark.parametrize("k", [1, 7])
def test_fold_count_bounds(k: int) -> None:
    with pytest.raises(PreconditionError):
        stratified_folds(_hard_labels({1: 3, 2: 3}), k, seed=0)


def test_training_coverage_names_missing_class() -> None:
    labels = _hard_labels({1: 2, 2: 2, 3: 2, 4: 2, 5: 1})
    plan = stratified_folds(labels, 2, seed=0)
    with pytest.raises(ClassCoverageError) as info:
        check_training_coverage(plan, labels)
    assert info.value.missing_classes == [5]
    assert "[5]" in str(info.value)


### Cross-validation


def test_cross_validation_recovers_clusters() -> None:
    matrix, labels = circle_clusters()
    result = cross_validate(matrix, labels, k=10, seed=0)
    assert len(result.folds) == 10
    assert all(f.size == 10 for f in result.folds)
    mean = result.mean()
    assert mean["pearson"] is not None
    assert mean["pearson"] >= 0.95
    assert result.pooled.n == len(labels)
    assert all(f.sigma is not None and f.sigma > 0 for f in result.folds)


def test_cross_validation_is_deterministic() -> None:
    matrix, labels = circle_clusters(seed=3)
    first = cross_validate(matrix, labels, k=5, seed=11)
    second = cross_validate(matrix, labels, k=5, seed=11)
    assert first.records == second.records
    assert first.as_dict() == second.as_dict()


def test_cross_validation_enforces_coverage() -> None:
    matrix, labels = circle_clusters(classes=4)
    with pytest.raises(ClassCoverageError):
        cross_validate(matrix, labels, k=5, seed=0)


def test_proportions_override_allows_missing_class() -> None:
    matrix, labels = circle_clusters(classes=4)
    result = cross_validate(
        matrix, labels, k=5, seed=0, proportions=[0.25, 0.25, 0.25, 0.25, 0.01]
    )
    assert result.pooled.pearson is not None
    assert result.pooled.pearson >= 0.9


@pytest.mark.parametrize(("truth", "rmse"), [(3.0, 0.0), (None, 2.0)])
def test_uniform_baseline(truth: float | None, rmse: float) -> None:
    matrix, labels = circle_clusters(per_class=4)
    if truth is not None:
        labels = dict.fromkeys(labels, truth)
    else:
        labels = {p: 1.0 if i % 2 else 5.0 for i, p in enumerate(labels)}
    result = cross_validate(matrix, labels, k=4, seed=0, baseline="uniform")
    assert result.pooled.rmse == pytest.approx(rmse)
    assert result.pooled.pearson is None
    assert all(f.sigma is None for f in result.folds)


def test_plain_baseline_runs() -> None:
    matrix, labels = circle_clusters(per_class=6)
    result = cross_validate(matrix, labels, k=3, seed=0, baseline="plain")
    assert result.pooled.n == len(labels)


def test_cross_validation_rejects_unknown_pairs() -> None:
    matrix, labels = circle_clusters(per_class=4)
    with pytest.raises(ValidationError):
        cross_validate(matrix, {**labels, PairId("nope", "r"): 3.0}, k=4, seed=0)


### Feature analysis


@pytest.fixture
def small_matrix() -> tuple[FeatureMatrix, dict[PairId, float]]:
    truth = [1.0, 2.0, 3.0, 4.0, 5.0]
    values = np.array(
        [
            [t / 5 for t in truth],
            [0.5] * 5,
            [0.4, 0.2, 0.8, 0.6, 1.0],
            [1.0, 0.0, 1.0, 0.0, 1.0],
        ]
    ).T
    matrix = FeatureMatrix(
        header=("CF:a", "CF:b", "FF:c", "LF:NGram:x"),
        pairs=tuple(pair(i) for i in range(5)),
        values=values,
        dense_columns=3,
    )
    return matrix, {pair(i): t for i, t in enumerate(truth)}


def test_feature_correlations(small_matrix: tuple[FeatureMatrix, dict[PairId, float]]) -> None:
    correlations = feature_correlations(*small_matrix)
    assert set(correlations.columns) == {"CF:a", "FF:c"}
    assert correlations.columns["CF:a"] == pytest.approx(1.0)
    assert correlations.columns["FF:c"] == pytest.approx(0.8)
    assert correlations.groups == pytest.approx({"cf": 1.0, "ff": 0.8})


def test_greedy_group_order(small_matrix: tuple[FeatureMatrix, dict[PairId, float]]) -> None:
    correlations = feature_correlations(*small_matrix)
    assert greedy_group_order(correlations) == ["cf", "ff", "sf", "pf", "lf", "ms"]
    assert greedy_group_order(correlations, ["ms", "ff", "cf"]) == ["cf", "ff", "ms"]


def test_feature_correlations_need_varied_truth(
    small_matrix: tuple[FeatureMatrix, dict[PairId, float]],
) -> None:
    matrix, labels = small_matrix
    with pytest.raises(PreconditionError):
        feature_correlations(matrix, dict.fromkeys(labels, 2.0))


def test_greedy_evaluation_adds_one_group_per_step() -> None:
    matrix, labels = circle_clusters()
    steps = greedy_evaluation(matrix, labels, ["cf", "sf"], k=5, seed=0)
    assert [s.groups for s in steps] == [("cf",), ("cf", "sf")]
    assert all(s.result.pooled.pearson is not None for s in steps)
