"""Regression, ranking and agreement metrics plus the cross-validation harness."""

import math
from collections import defaultdict
from collections.abc import Collection, Hashable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Literal, TypeVar

import numpy as np
from loguru import logger
from scipy import stats
from sklearn.metrics import confusion_matrix, mean_squared_error, r2_score

from src.conf import constants
from src.conf.settings import GraLapConfig, settings
from src.schemas.corpus import PairId
from src.services.errors import ClassCoverageError, PreconditionError, ValidationError
from src.services.features import FeatureMatrix
from src.services.gralap import GraLap, LabeledDataset
from src.utils.misc_utils import round_half_up

K = TypeVar("K", bound=Hashable)
Baseline = Literal["uniform", "plain"]

UNIFORM_PREDICTION = 3.0


@dataclass(frozen=True)
class PredictionRecord:
    pair: PairId
    predicted: float
    truth: float

    def __post_init__(self) -> None:
        for name in ("predicted", "truth"):
            value = getattr(self, name)
            if not 1 <= value <= constants.NUM_LABELS:
                raise ValidationError(f"{self.pair}: {name}={value} outside [1, 5]")


@dataclass(frozen=True)
class RegressionMetrics:
    rmse: float
    pearson: float | None
    r_squared: float | None
    n: int

    def as_dict(self) -> dict[str, float | int | None]:
        return {"rmse": self.rmse, "pearson": self.pearson, "r2": self.r_squared, "n": self.n}


def _is_constant(values: np.ndarray) -> bool:
    return bool(np.all(values == values[0]))


def regression_metrics(records: Sequence[PredictionRecord]) -> RegressionMetrics:
    """RMSE, Pearson's rho and R^2 = 1 - SS_res / SS_tot.

    rho is None when either side has zero variance; R^2 is None when the
    truths are all equal.
    """
    if len(records) < 2:
        raise PreconditionError(f"regression metrics need at least 2 records, got {len(records)}")
    predicted = np.asarray([r.predicted for r in records], dtype=float)
    truth = np.asarray([r.truth for r in records], dtype=float)

    rmse = math.sqrt(mean_squared_error(truth, predicted))
    pearson: float | None = None
    r_squared: float | None = None
    if not _is_constant(truth):
        r_squared = float(r2_score(truth, predicted))
        if not _is_constant(predicted):
            pearson = float(stats.pearsonr(predicted, truth)[0])
    return RegressionMetrics(rmse=rmse, pearson=pearson, r_squared=r_squared, n=len(records))


def rank_metrics(
    a: Mapping[K, float], b: Mapping[K, float]
) -> tuple[float | None, float | None]:
    """(Spearman, Kendall tau-b) between two score maps over the same ids.

    Ties get average ranks. A constant side makes both undefined (None).
    """
    if set(a) != set(b):
        raise ValidationError("rankings must cover the same ids")
    if len(a) < 2:
        raise PreconditionError(f"rank correlation needs at least 2 common items, got {len(a)}")
    keys = list(a)
    x = np.asarray([a[k] for k in keys], dtype=float)
    y = np.asarray([b[k] for k in keys], dtype=float)
    if _is_constant(x) or _is_constant(y):
        return None, None
    spearman = float(stats.spearmanr(x, y)[0])
    kendall = float(stats.kendalltau(x, y)[0])
    return spearman, kendall


def cohen_kappa(a: Mapping[K, int], b: Mapping[K, int]) -> float | None:
    """(p_o - p_e) / (1 - p_e) over the items both maps label; None when p_e = 1."""
    shared = sorted(set(a) & set(b), key=str)
    if not shared:
        raise PreconditionError("kappa needs at least one shared item")
    x = [a[k] for k in shared]
    y = [b[k] for k in shared]
    categories = sorted(set(x) | set(y))
    table = confusion_matrix(x, y, labels=categories).astype(float)
    total = table.sum()
    p_o = np.trace(table) / total
    p_e = float((table.sum(axis=1) * table.sum(axis=0)).sum() / total**2)
    if math.isclose(p_e, 1.0):
        return None
    return float((p_o - p_e) / (1 - p_e))


@dataclass(frozen=True)
class PrecisionAtK:
    value: float
    k: int
    evaluated: int

    @property
    def truncated(self) -> bool:
        return self.evaluated < self.k


def precision_at_k(ranked: Sequence[str], relevant: Collection[str], k: int) -> PrecisionAtK:
    """Share of the top k that is relevant.

    When the list is shorter than k the share is taken over the whole list and
    the result is marked truncated.
    """
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    top = list(ranked[:k])
    if len(top) < k:
        logger.warning(f"precision@{k} over only {len(top)} ranked items")
    hits = sum(1 for item in top if item in relevant)
    value = hits / len(top) if top else 0.0
    return PrecisionAtK(value=value, k=k, evaluated=len(top))


### Folds


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of labeled pairs to k folds."""

    k: int
    assignments: dict[PairId, int]

    def __post_init__(self) -> None:
        sizes = self.sizes()
        if any(not 0 <= f < self.k for f in self.assignments.values()):
            raise ValidationError("fold index outside 0..k-1")
        if sizes and max(sizes) - min(sizes) > 1:
            raise ValidationError(f"fold sizes {sizes} differ by more than one")

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for fold in self.assignments.values():
            if 0 <= fold < self.k:
                counts[fold] += 1
        return counts

    def fold(self, index: int) -> list[PairId]:
        return [p for p, f in self.assignments.items() if f == index]


def stratified_folds(labels: Mapping[PairId, int], k: int, seed: int) -> FoldPlan:
    """Shuffle each class with `seed`, then deal pairs to folds round-robin.

    Dealing continues across classes, so fold sizes differ by at most one and
    a class with at least two members lands in at least two folds.
    """
    if k < 2:
        raise PreconditionError(f"need k >= 2 folds, got {k}")
    if k > len(labels):
        raise PreconditionError(f"k={k} exceeds the {len(labels)} labeled pairs")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[PairId]] = defaultdict(list)
    for pair in sorted(labels):
        by_class[labels[pair]].append(pair)

    assignments: dict[PairId, int] = {}
    position = 0
    for label in sorted(by_class):
        members = by_class[label]
        for index in rng.permutation(len(members)):
            assignments[members[int(index)]] = position % k
            position += 1
    return FoldPlan(k=k, assignments=assignments)


def check_training_coverage(plan: FoldPlan, labels: Mapping[PairId, int]) -> None:
    """Every class must appear in every training split."""
    for fold in range(plan.k):
        held_out = set(plan.fold(fold))
        training = {labels[p] for p in labels if p not in held_out}
        missing = sorted(set(constants.LABELS) - training)
        if missing:
            raise ClassCoverageError(missing, f"the training split of fold {fold}")


### Cross-validation


@dataclass(frozen=True)
class FoldResult:
    fold: int
    size: int
    metrics: RegressionMetrics | None
    sigma: float | None = None
    converged: bool = True


@dataclass(frozen=True)
class CrossValidationResult:
    k: int
    seed: int
    folds: tuple[FoldResult, ...]
    pooled: RegressionMetrics
    records: tuple[PredictionRecord, ...] = field(repr=False, default=())

    def mean(self) -> dict[str, float | None]:
        """Average of each per-fold metric over the folds where it is defined."""
        averages: dict[str, float | None] = {}
        for name in ("rmse", "pearson", "r_squared"):
            values = [
                getattr(f.metrics, name)
                for f in self.folds
                if f.metrics is not None and getattr(f.metrics, name) is not None
            ]
            averages[name] = float(np.mean(values)) if values else None
        return averages

    def as_dict(self) -> dict[str, object]:
        mean = self.mean()
        return {
            "k": self.k,
            "seed": self.seed,
            "mean": {"rmse": mean["rmse"], "pearson": mean["pearson"], "r2": mean["r_squared"]},
            "pooled": self.pooled.as_dict(),
            "folds": [
                {
                    "fold": f.fold,
                    "size": f.size,
                    "sigma": f.sigma,
                    "converged": f.converged,
                    "metrics": f.metrics.as_dict() if f.metrics is not None else None,
                }
                for f in self.folds
            ],
        }


def uniform_baseline(
    pairs: Sequence[PairId], truths: Mapping[PairId, float]
) -> list[PredictionRecord]:
    """Predict the middle intensity for every pair."""
    return [PredictionRecord(p, UNIFORM_PREDICTION, truths[p]) for p in pairs]


def cross_validate(
    matrix: FeatureMatrix,
    labels: Mapping[PairId, float],
    k: int = 10,
    seed: int | None = None,
    config: GraLapConfig | None = None,
    sigma: float | None = None,
    proportions: Sequence[float] | None = None,
    expected: bool = False,
    baseline: Baseline | None = None,
) -> CrossValidationResult:
    """k-fold CV: hide one fold's labels, propagate over every pair, score the fold.

    Every row of `matrix` takes part in each fit; only pairs in `labels` are
    assigned to folds and scored against their (possibly fractional) truth.
    """
    seed = settings.seed if seed is None else seed
    config = config or settings.gralap
    if baseline == "plain":
        config = config.model_copy(update={"mode": "plain"})

    row_of = {pair: i for i, pair in enumerate(matrix.pairs)}
    unknown = [str(p) for p in labels if p not in row_of]
    if unknown:
        raise ValidationError(f"labeled pairs missing from the feature matrix: {unknown[:5]}")
    hard = {pair: round_half_up(value) for pair, value in labels.items()}

    plan = stratified_folds(hard, k, seed)
    if proportions is None and baseline != "uniform":
        check_training_coverage(plan, hard)
    logger.info(f"{k}-fold CV over {len(labels)} labeled pairs, fold sizes {plan.sizes()}")

    fold_results: list[FoldResult] = []
    records: list[PredictionRecord] = []
    for fold in range(k):
        held_out = plan.fold(fold)
        hidden = set(held_out)
        fold_sigma: float | None = None
        converged = True
        if baseline == "uniform":
            fold_records = uniform_baseline(held_out, labels)
        else:
            dataset = LabeledDataset(
                matrix.values,
                {row_of[p]: v for p, v in hard.items() if p not in hidden},
            )
            result = GraLap(config, sigma=sigma, proportions=proportions).fit(dataset)
            scores = result.expected_intensity() if expected else result.labels
            fold_records = [
                PredictionRecord(p, float(scores[row_of[p]]), labels[p]) for p in held_out
            ]
            fold_sigma = result.sigma
            converged = result.converged
        metrics = regression_metrics(fold_records) if len(fold_records) >= 2 else None
        fold_results.append(
            FoldResult(fold, len(held_out), metrics, sigma=fold_sigma, converged=converged)
        )
        records.extend(fold_records)
        logger.debug(f"fold {fold}: {metrics}")

    records.sort(key=lambda r: r.pair)
    pooled = regression_metrics(records)
    logger.info(f"CV pooled rmse={pooled.rmse:.4f} pearson={pooled.pearson}")
    return CrossValidationResult(
        k=k, seed=seed, folds=tuple(fold_results), pooled=pooled, records=tuple(records)
    )


### Feature analysis


@dataclass(frozen=True)
class FeatureCorrelations:
    columns: dict[str, float]
    groups: dict[str, float]


def feature_correlations(
    matrix: FeatureMatrix, labels: Mapping[PairId, float]
) -> FeatureCorrelations:
    """Pearson rho of each dense column against the gold intensity.

    Columns constant over the labeled pairs are skipped. A group's score is
    the mean |rho| of its scored columns.
    """
    rows = [i for i, pair in enumerate(matrix.pairs) if pair in labels]
    if len(rows) < 2:
        raise PreconditionError("feature correlations need at least 2 labeled pairs")
    truth = np.asarray([labels[matrix.pairs[i]] for i in rows], dtype=float)
    if _is_constant(truth):
        raise PreconditionError("all gold intensities are equal")

    columns: dict[str, float] = {}
    by_group: dict[str, list[float]] = defaultdict(list)
    for j, name in enumerate(matrix.header[: matrix.dense_columns]):
        values = matrix.values[rows, j]
        if _is_constant(values):
            continue
        rho = float(stats.pearsonr(values, truth)[0])
        columns[name] = rho
        by_group[name.split(":", 1)[0].lower()].append(abs(rho))
    groups = {g: float(np.mean(v)) for g, v in by_group.items()}
    return FeatureCorrelations(columns=columns, groups=groups)


def greedy_group_order(
    correlations: FeatureCorrelations,
    groups: Collection[str] = constants.FEATURE_GROUPS,
) -> list[str]:
    """Groups by descending mean |rho|; unscored groups follow in canonical order."""
    canonical = [g for g in constants.FEATURE_GROUPS if g in groups]
    scored = sorted(
        (g for g in canonical if g in correlations.groups),
        key=lambda g: (-correlations.groups[g], canonical.index(g)),
    )
    return scored + [g for g in canonical if g not in correlations.groups]


@dataclass(frozen=True)
class GreedyStep:
    groups: tuple[str, ...]
    result: CrossValidationResult


def greedy_evaluation(
    matrix: FeatureMatrix,
    labels: Mapping[PairId, float],
    order: Sequence[str],
    **cv_options: object,
) -> list[GreedyStep]:
    """Cross-validate on cumulative feature groups, adding one group per step."""
    steps = []
    for n in range(1, len(order) + 1):
        active = tuple(order[:n])
        logger.info(f"greedy step {n}: {'+'.join(active)}")
        result = cross_validate(matrix.select_groups(active), labels, **cv_options)  # type: ignore[arg-type]
        steps.append(GreedyStep(groups=active, result=result))
    return steps
