"""Graph-based label propagation over a fully connected RBF graph.

The model is transductive: `GraLap.fit` labels exactly the unlabeled points of
the dataset it is given. Classes are the five intensity labels; column `l - 1`
of every label matrix holds label `l`.
"""

import warnings
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg
from loguru import logger
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import cdist

from src.conf import constants
from src.conf.settings import GraLapConfig, settings
from src.services.errors import (
    ClassCoverageError,
    NumericalError,
    PreconditionError,
    ValidationError,
)
from src.utils.misc_utils import round_half_up

Mode = Literal["gralap", "plain"]
IterationCallback = Callable[[int, np.ndarray], None]

LABEL_VALUES = np.asarray(constants.LABELS, dtype=float)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature vectors plus intensity labels for a subset of them."""

    points: np.ndarray
    labels: Mapping[int, int]

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 2:
            raise ValidationError(f"points must be 2-D, got shape {points.shape}")
        object.__setattr__(self, "points", points)
        for index, label in self.labels.items():
            if not 0 <= index < len(points):
                raise ValidationError(f"labeled index {index} outside 0..{len(points) - 1}")
            if label not in constants.LABELS:
                raise ValidationError(f"label {label} is not one of {constants.LABELS}")

    @classmethod
    def from_fractional(
        cls, points: np.ndarray, labels: Mapping[int, float]
    ) -> "LabeledDataset":
        """Round annotator averages half-up to the nearest class."""
        return cls(points, {i: round_half_up(v) for i, v in labels.items()})

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def labeled_indices(self) -> np.ndarray:
        return np.asarray(sorted(self.labels), dtype=int)

    @property
    def labeled_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        mask[self.labeled_indices] = True
        return mask

    @property
    def unlabeled_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.labeled_mask)

    def present_classes(self) -> set[int]:
        return set(self.labels.values())

    def missing_classes(self) -> list[int]:
        return sorted(set(constants.LABELS) - self.present_classes())

    def one_hot(self) -> np.ndarray:
        """One-hot rows for the labeled points, in `labeled_indices` order."""
        Y_L = np.zeros((len(self.labels), constants.NUM_LABELS))
        for row, index in enumerate(self.labeled_indices):
            Y_L[row, self.labels[int(index)] - 1] = 1.0
        return Y_L


@dataclass(frozen=True)
class SigmaSelection:
    sigma: float
    d_f: float | None
    fallback: str | None = None


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    return cdist(points, points, metric="euclidean")


def _mst_edges(distances: np.ndarray) -> list[tuple[float, int, int]]:
    """MST edges as (length, i, j), shortest first.

    Zero-length edges are kept: scipy treats zeros as missing, so they are
    nudged to the smallest positive float before building the tree.
    """
    nudged = distances.copy()
    off_diagonal = ~np.eye(len(distances), dtype=bool)
    nudged[(nudged == 0) & off_diagonal] = np.finfo(float).tiny
    tree = minimum_spanning_tree(nudged).tocoo()
    edges = [
        (float(distances[i, j]), int(min(i, j)), int(max(i, j)))
        for i, j in zip(tree.row, tree.col, strict=True)
    ]
    return sorted(edges)


class _LabeledUnionFind:
    """Union-find where each root remembers the class of its labeled members."""

    def __init__(self, size: int, labels: Mapping[int, int]) -> None:
        self.parent = list(range(size))
        self.rank = [0] * size
        self.label: list[int | None] = [labels.get(i) for i in range(size)]

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        if self.label[ra] is None:
            self.label[ra] = self.label[rb]


def _mean_distance_sigma(distances: np.ndarray) -> float:
    n = len(distances)
    if n < 2:
        return 1.0
    mean = float(distances[np.triu_indices(n, k=1)].mean())
    return mean / 3 if mean > 0 else 1.0


def select_sigma(
    dataset: LabeledDataset, distances: np.ndarray | None = None
) -> SigmaSelection:
    """Bandwidth from the shortest MST edge joining differently labeled components.

    Edges are added shortest first; `d_f` is the length of the first one whose
    two components both hold labeled points of different classes, and
    sigma = d_f / 3. When that edge does not exist or has length 0, sigma is a
    third of the mean pairwise distance and `fallback` says why.
    """
    if distances is None:
        distances = pairwise_distances(dataset.points)

    fallback: str | None = None
    d_f: float | None = None
    if len(dataset.present_classes()) < 2:
        fallback = "fewer than two labeled classes"
    else:
        components = _LabeledUnionFind(dataset.size, dataset.labels)
        for length, i, j in _mst_edges(distances):
            ri, rj = components.find(i), components.find(j)
            li, lj = components.label[ri], components.label[rj]
            if li is not None and lj is not None and li != lj:
                d_f = length
                break
            components.union(i, j)
        if d_f is None:
            fallback = "no edge joins differently labeled components"
        elif d_f == 0:
            fallback = "differently labeled points coincide (d_f = 0)"

    if fallback is not None or d_f is None:
        sigma = _mean_distance_sigma(distances)
        logger.warning(f"sigma heuristic undefined ({fallback}); using {sigma:.6g}")
        return SigmaSelection(sigma=sigma, d_f=d_f, fallback=fallback)

    logger.info(f"sigma = d_f / 3 = {d_f:.6g} / 3")
    return SigmaSelection(sigma=d_f / 3, d_f=d_f)


@dataclass(frozen=True)
class WeightMatrix:
    W: np.ndarray
    sigma: float


def build_weight_matrix(
    points: np.ndarray,
    sigma: float,
    epsilon_cutoff: float | None = None,
) -> WeightMatrix:
    """W_ij = exp(-|x_i - x_j|^2 / sigma^2), self-weights 1."""
    if not sigma > 0:
        raise PreconditionError(f"sigma must be positive, got {sigma}")
    points = np.asarray(points, dtype=float)
    if not np.all(np.isfinite(points)):
        raise ValidationError("feature matrix contains non-finite values")
    squared = cdist(points, points, metric="sqeuclidean")
    W = np.exp(-squared / sigma**2)
    if epsilon_cutoff is not None:
        W[W < epsilon_cutoff] = 0.0
        np.fill_diagonal(W, 1.0)
    return WeightMatrix(W=W, sigma=sigma)


def build_transition_matrix(W: np.ndarray, mode: Mode = "gralap") -> np.ndarray:
    """Row-stochastic propagation operator.

    gralap: column-normalise W, then row-normalise the result.
    plain:  row-normalise W directly.
    """
    if mode == "gralap":
        T = W / W.sum(axis=0, keepdims=True)
    else:
        T = W
    return T / T.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class PropagationResult:
    Y: np.ndarray
    iterations: int
    residual: float
    converged: bool
    residuals: tuple[float, ...] = field(default=(), repr=False)


def initial_label_matrix(dataset: LabeledDataset) -> np.ndarray:
    """Labeled rows one-hot; unlabeled rows uniform over the classes seen in labels."""
    Y = np.zeros((dataset.size, constants.NUM_LABELS))
    present = sorted(dataset.present_classes())
    if present:
        Y[:, [c - 1 for c in present]] = 1.0 / len(present)
    Y[dataset.labeled_indices] = dataset.one_hot()
    return Y


def propagate(
    T: np.ndarray,
    dataset: LabeledDataset,
    tol: float | None = None,
    max_iter: int | None = None,
    callback: IterationCallback | None = None,
) -> PropagationResult:
    """Iterate Y <- T Y, row-normalise, clamp labeled rows, until max |dY| < tol."""
    tol = settings.gralap.tol if tol is None else tol
    max_iter = settings.gralap.max_iter if max_iter is None else max_iter
    if not tol > 0:
        raise PreconditionError(f"tol must be positive, got {tol}")
    if not dataset.labels:
        raise PreconditionError("label propagation needs at least one labeled point")

    labeled = dataset.labeled_indices
    unlabeled = dataset.unlabeled_indices
    Y_L = dataset.one_hot()
    Y = initial_label_matrix(dataset)

    residuals: list[float] = []
    residual = float("inf")
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        Y_next = T @ Y
        Y_next /= Y_next.sum(axis=1, keepdims=True)
        Y_next[labeled] = Y_L
        residual = (
            float(np.abs(Y_next[unlabeled] - Y[unlabeled]).max()) if len(unlabeled) else 0.0
        )
        Y = Y_next
        residuals.append(residual)
        if callback is not None:
            callback(iteration, Y.copy())
        if residual < tol:
            converged = True
            break

    if converged:
        logger.info(f"Propagation converged after {iteration} iterations (residual {residual:.3g})")
    else:
        logger.warning(
            f"Propagation stopped at max_iter={max_iter} with residual {residual:.3g} >= tol {tol:g}"
        )
    return PropagationResult(
        Y=Y,
        iterations=iteration,
        residual=residual,
        converged=converged,
        residuals=tuple(residuals),
    )


def solve_closed_form(T: np.ndarray, dataset: LabeledDataset) -> np.ndarray:
    """Fixed point of propagation on the unlabeled rows: (I - T_uu)^-1 T_ul Y_L."""
    labeled = dataset.labeled_indices
    unlabeled = dataset.unlabeled_indices
    if len(unlabeled) == 0:
        return np.zeros((0, constants.NUM_LABELS))
    T_uu = T[np.ix_(unlabeled, unlabeled)]
    T_ul = T[np.ix_(unlabeled, labeled)]
    system = np.eye(len(unlabeled)) - T_uu
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.solve(system, T_ul @ dataset.one_hot())
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as e:
            raise NumericalError(
                "I - T_uu is singular; some unlabeled points have no path to a labeled one"
            ) from e


def normalize_proportions(proportions: Sequence[float]) -> np.ndarray:
    c = np.asarray(proportions, dtype=float)
    if c.shape != (constants.NUM_LABELS,) or np.any(c <= 0) or not np.all(np.isfinite(c)):
        raise PreconditionError(
            f"need {constants.NUM_LABELS} positive class proportions, got {list(proportions)}"
        )
    return c / c.sum()


def default_proportions(labels: Sequence[int]) -> np.ndarray:
    """Observed class shares; absent classes take their global share."""
    counts = np.bincount(np.asarray(labels, dtype=int), minlength=constants.NUM_LABELS + 1)[1:]
    if counts.sum() == 0:
        return normalize_proportions(constants.GLOBAL_LABEL_PROPORTIONS)
    observed = counts / counts.sum()
    fallback = np.asarray(constants.GLOBAL_LABEL_PROPORTIONS)
    return normalize_proportions(np.where(counts > 0, observed, fallback))


@dataclass(frozen=True)
class MassNormalization:
    Y_U: np.ndarray
    zero_mass_classes: tuple[int, ...] = ()


def class_mass_normalize(
    Y_U: np.ndarray, proportions: Sequence[float]
) -> MassNormalization:
    """Scale column l by c_l / mass_l so column masses stand in the ratio c_1:...:c_5."""
    c = normalize_proportions(proportions)
    mass = Y_U.sum(axis=0)
    zero = mass <= 0
    scale = np.divide(c, mass, out=np.zeros_like(c), where=~zero)
    zero_classes = tuple(int(i) + 1 for i in np.flatnonzero(zero))
    if zero_classes and len(Y_U):
        logger.warning(f"Zero label mass for class(es) {list(zero_classes)}; left at 0")
    return MassNormalization(Y_U=Y_U * scale, zero_mass_classes=zero_classes)


def assign_labels(Y: np.ndarray, dataset: LabeledDataset) -> dict[int, int]:
    """Argmax per row, ties to the lowest label; labeled rows keep their label."""
    hard = {int(i): int(np.argmax(Y[i])) + 1 for i in range(len(Y))}
    hard.update({int(i): int(v) for i, v in dataset.labels.items()})
    return hard


@dataclass(frozen=True)
class GraLapResult:
    """Output of one transductive fit."""

    Y: np.ndarray
    labels: np.ndarray
    sigma: float
    sigma_fallback: str | None
    iterations: int
    residual: float
    converged: bool
    proportions: tuple[float, ...]
    zero_mass_classes: tuple[int, ...]
    mode: Mode

    def expected_intensity(self) -> np.ndarray:
        return self.Y @ LABEL_VALUES

    def metadata(self) -> dict[str, object]:
        return {
            "sigma": self.sigma,
            "sigma_fallback": self.sigma_fallback,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "proportions": list(self.proportions),
            "zero_mass_classes": list(self.zero_mass_classes),
            "mode": self.mode,
        }


class GraLap:
    """Label propagation with clamping and class-mass normalisation.

    Example:
        result = GraLap().fit(LabeledDataset(points, {0: 1, 7: 2, ...}))
        result.labels  # hard label for every point
    """

    def __init__(
        self,
        config: GraLapConfig | None = None,
        sigma: float | None = None,
        proportions: Sequence[float] | None = None,
    ) -> None:
        self.config = config or settings.gralap
        self.sigma = sigma
        self.proportions = proportions

    def fit(
        self, dataset: LabeledDataset, callback: IterationCallback | None = None
    ) -> GraLapResult:
        missing = dataset.missing_classes()
        if missing and self.proportions is None:
            raise ClassCoverageError(missing, "training labels")

        if self.sigma is not None:
            selection = SigmaSelection(sigma=self.sigma, d_f=None, fallback=None)
        else:
            selection = select_sigma(dataset)
        weights = build_weight_matrix(
            dataset.points, selection.sigma, self.config.epsilon_cutoff
        )
        T = build_transition_matrix(weights.W, self.config.mode)
        result = propagate(
            T, dataset, self.config.tol, self.config.max_iter, callback=callback
        )

        Y = result.Y.copy()
        unlabeled = dataset.unlabeled_indices
        proportions = (
            normalize_proportions(self.proportions)
            if self.proportions is not None
            else default_proportions(list(dataset.labels.values()))
        )
        zero_mass: tuple[int, ...] = ()
        if self.config.mode == "gralap" and len(unlabeled):
            scaled = class_mass_normalize(Y[unlabeled], proportions)
            zero_mass = scaled.zero_mass_classes
            rows = scaled.Y_U
            Y[unlabeled] = rows / rows.sum(axis=1, keepdims=True)

        hard = assign_labels(Y, dataset)
        labels = np.asarray([hard[i] for i in range(dataset.size)], dtype=int)
        return GraLapResult(
            Y=Y,
            labels=labels,
            sigma=selection.sigma,
            sigma_fallback=selection.fallback,
            iterations=result.iterations,
            residual=result.residual,
            converged=result.converged,
            proportions=tuple(float(x) for x in proportions),
            zero_mass_classes=zero_mass,
            mode=self.config.mode,
        )
