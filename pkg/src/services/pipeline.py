"""Run configuration and the end-to-end steps behind each CLI command."""

import tomllib
from collections.abc import Mapping, Sequence
from functools import cached_property
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
import pydantic
from loguru import logger
from pydantic import Field, field_validator

from src.conf import constants
from src.conf.settings import GraLapConfig, settings
from src.schemas.base import NoExtraBasicModel
from src.schemas.corpus import Corpus, LinguisticAnnotations, PairId
from src.services import bibliometrics, evaluation
from src.services.bibliometrics import Measure, PaperScoreTable
from src.services.corpus import (
    CitationGraph,
    build_citation_graph,
    load_annotations,
    load_corpus,
    load_labels,
)
from src.services.errors import (
    MissingPredictionsError,
    PreconditionError,
    ValidationError,
)
from src.services.features import FeatureExtractor, FeatureMatrix
from src.services.gralap import LABEL_VALUES, GraLap, GraLapResult, LabeledDataset
from src.utils.misc_utils import write_json, write_tsv

PREDICTION_COLUMNS = (
    "citing_id",
    "reference_key",
    "hard_label",
    *(f"p{label}" for label in constants.LABELS),
)

PAPER_MEASURES = {
    "rawcite": Measure.RAW_CITE,
    "rawpr": Measure.RAW_PR,
    "infcite": Measure.INF_CITE,
    "infpr": Measure.INF_PR,
}
AUTHOR_MEASURES = {
    "hindex": Measure.H_INDEX,
    "hifindex": Measure.HIF_INDEX,
    "totp": Measure.TOT_P,
    "totc": Measure.TOT_C,
    "avgc": Measure.AVG_C,
}
WEIGHTED_MEASURES = {"infcite", "infpr", "hifindex"}
RANK_MEASURES = (*PAPER_MEASURES, *AUTHOR_MEASURES)


class RunConfig(NoExtraBasicModel):
    """Everything a command needs. Built by `RunConfig.resolve`."""

    corpus: Path
    labels: Path | None = None
    annotations: Path | None = None
    predictions: Path | None = None
    output_dir: Path = Path("out")
    sigma: float | None = Field(default=None, gt=0)
    tol: float = Field(default_factory=lambda: settings.gralap.tol, gt=0)
    max_iter: int = Field(default_factory=lambda: settings.gralap.max_iter, ge=1)
    mode: Literal["gralap", "plain"] = Field(default_factory=lambda: settings.gralap.mode)
    proportions: tuple[float, ...] | None = None
    expected_intensity: bool = Field(
        default_factory=lambda: settings.gralap.expected_intensity
    )
    seed: int = Field(default_factory=lambda: settings.seed)
    k: int = Field(default=10, ge=2)
    features: tuple[str, ...] = constants.FEATURE_GROUPS

    @field_validator("features", mode="before")
    @classmethod
    def split_features(cls, value: Any) -> Any:
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        return tuple(v.strip().lower() for v in value)

    @field_validator("features")
    @classmethod
    def known_groups(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        if not value:
            raise ValueError("at least one feature group must be enabled")
        unknown = sorted(set(value) - set(constants.FEATURE_GROUPS))
        if unknown:
            raise ValueError(f"unknown feature group(s) {unknown}")
        return tuple(g for g in constants.FEATURE_GROUPS if g in value)

    @field_validator("proportions", mode="before")
    @classmethod
    def split_proportions(cls, value: Any) -> Any:
        if isinstance(value, str):
            value = [float(v) for v in value.split(",")]
        return value

    @field_validator("proportions")
    @classmethod
    def five_positive(cls, value: tuple[float, ...] | None) -> tuple[float, ...] | None:
        if value is not None and (
            len(value) != constants.NUM_LABELS or any(v <= 0 for v in value)
        ):
            raise ValueError(f"need {constants.NUM_LABELS} positive proportions")
        return value

    @classmethod
    def resolve(
        cls, flags: Mapping[str, Any], config_file: Path | None = None
    ) -> "RunConfig":
        """Defaults < environment < TOML file < flags. Unset flags are None."""
        values: dict[str, Any] = {}
        if config_file is not None:
            try:
                with config_file.open("rb") as handle:
                    values.update(tomllib.load(handle))
            except tomllib.TOMLDecodeError as e:
                raise ValidationError(f"{config_file}: {e}") from e
        values.update({k: v for k, v in flags.items() if v is not None})
        try:
            return cls.model_validate(values)
        except pydantic.ValidationError as e:
            raise ValidationError(str(e)) from e

    def gralap_config(self) -> GraLapConfig:
        return settings.gralap.model_copy(
            update={
                "tol": self.tol,
                "max_iter": self.max_iter,
                "mode": self.mode,
                "expected_intensity": self.expected_intensity,
            }
        )

    def output_path(self, name: str) -> Path:
        return self.output_dir / name


class Pipeline:
    """Lazily loads the inputs named by a `RunConfig` and runs the steps on them."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config

    @cached_property
    def corpus(self) -> Corpus:
        return load_corpus(self.config.corpus)

    @cached_property
    def annotations(self) -> LinguisticAnnotations | None:
        if self.config.annotations is None:
            if "lf" in self.config.features:
                logger.warning("No annotations given; LF uses n-grams, hasBut and modals only")
            return None
        return load_annotations(self.config.annotations)

    @cached_property
    def graph(self) -> CitationGraph:
        return build_citation_graph(self.corpus)

    @cached_property
    def labels(self) -> dict[PairId, float]:
        if self.config.labels is None:
            raise PreconditionError("this command needs a labels file (--labels)")
        return load_labels(self.config.labels, self.corpus)

    @cached_property
    def feature_matrix(self) -> FeatureMatrix:
        extractor = FeatureExtractor(self.corpus, self.graph, self.annotations)
        return extractor.feature_matrix(groups=self.config.features)

    ### features

    def write_features(self) -> Path:
        path = self.config.output_path(constants.FEATURES_FILE)
        self.feature_matrix.to_tsv(path)
        logger.info(f"Wrote {self.feature_matrix.shape} feature matrix to {path}")
        return path

    ### predict

    def predict(self) -> GraLapResult:
        matrix = self.feature_matrix
        row_of = {pair: i for i, pair in enumerate(matrix.pairs)}
        dataset = LabeledDataset.from_fractional(
            matrix.values, {row_of[p]: v for p, v in self.labels.items()}
        )
        result = GraLap(
            self.config.gralap_config(),
            sigma=self.config.sigma,
            proportions=self.config.proportions,
        ).fit(dataset)

        write_tsv(
            self.config.output_path(constants.PREDICTIONS_FILE),
            PREDICTION_COLUMNS,
            (
                (pair.citing_id, pair.reference_key, int(label), *(float(p) for p in row))
                for pair, label, row in zip(matrix.pairs, result.labels, result.Y, strict=True)
            ),
        )
        write_json(
            self.config.output_path(constants.RUN_METADATA_FILE),
            {
                **result.metadata(),
                "seed": self.config.seed,
                "feature_groups": list(self.config.features),
                "columns": matrix.shape[1],
                "pairs": matrix.shape[0],
                "labeled_pairs": len(self.labels),
                "sigma_override": self.config.sigma is not None,
                "tol": self.config.tol,
                "max_iter": self.config.max_iter,
            },
        )
        logger.info(f"Predicted {len(dataset.unlabeled_indices)} unlabeled pairs")
        return result

    ### evaluate

    def evaluate(
        self,
        greedy: bool = False,
        order: Sequence[str] | None = None,
        baseline: evaluation.Baseline | None = None,
    ) -> dict[str, Any]:
        matrix = self.feature_matrix
        cv_options: dict[str, Any] = {
            "k": self.config.k,
            "seed": self.config.seed,
            "config": self.config.gralap_config(),
            "sigma": self.config.sigma,
            "proportions": self.config.proportions,
            "expected": self.config.expected_intensity,
            "baseline": baseline,
        }
        report: dict[str, Any] = {
            "seed": self.config.seed,
            "k": self.config.k,
            "baseline": baseline,
            "scored": "expected" if self.config.expected_intensity else "hard",
        }
        if greedy:
            if order is None:
                correlations = evaluation.feature_correlations(matrix, self.labels)
                order = evaluation.greedy_group_order(correlations, self.config.features)
                report["feature_correlations"] = {
                    "columns": correlations.columns,
                    "groups": correlations.groups,
                }
            steps = evaluation.greedy_evaluation(matrix, self.labels, order, **cv_options)
            report["order"] = list(order)
            report["steps"] = [
                {"groups": list(step.groups), **step.result.as_dict()} for step in steps
            ]
        else:
            result = evaluation.cross_validate(matrix, self.labels, **cv_options)
            report["feature_groups"] = list(self.config.features)
            report.update(result.as_dict())
        write_json(self.config.output_path(constants.METRICS_FILE), report)
        return report

    ### bibliometrics

    def predictions_path(self) -> Path:
        return self.config.predictions or self.config.output_path(constants.PREDICTIONS_FILE)

    @cached_property
    def weighted_graph(self) -> CitationGraph:
        """Citation graph weighted by predicted intensities (hard or expected)."""
        path = self.predictions_path()
        if not path.exists():
            raise MissingPredictionsError(
                f"no predictions at {path}; run `refintensity predict` first"
            )
        frame = pd.read_csv(
            path,
            sep="\t",
            dtype={"citing_id": str, "reference_key": str},
            keep_default_na=False,
        )
        missing = [c for c in PREDICTION_COLUMNS if c not in frame.columns]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {missing}")
        if self.config.expected_intensity:
            probabilities = frame[list(PREDICTION_COLUMNS[3:])].to_numpy(dtype=float)
            intensity = probabilities @ LABEL_VALUES
        else:
            intensity = frame["hard_label"].to_numpy(dtype=float)

        by_pair = {
            PairId(c, k): float(v)
            for c, k, v in zip(frame["citing_id"], frame["reference_key"], intensity, strict=True)
        }
        weights: dict[tuple[str, str], float] = {}
        for paper in self.corpus.papers:
            for ref in paper.references:
                if ref.target_id is None:
                    continue
                pair = PairId(paper.id, ref.key)
                if pair not in by_pair:
                    raise MissingPredictionsError(
                        f"{path} has no prediction for {pair}; rerun `refintensity predict`"
                    )
                weights[(paper.id, ref.target_id)] = float(np.clip(by_pair[pair], 1.0, 5.0))
        return build_citation_graph(self.corpus, weights)

    def score_table(self, measure: str) -> PaperScoreTable:
        if measure not in RANK_MEASURES:
            raise PreconditionError(f"unknown measure {measure!r}")
        graph = self.weighted_graph if measure in WEIGHTED_MEASURES else self.graph
        if measure == "rawcite":
            return bibliometrics.raw_cite(graph)
        if measure == "infcite":
            return bibliometrics.inf_cite(graph)
        if measure in ("rawpr", "infpr"):
            return bibliometrics.pagerank(
                graph, weighted=measure == "infpr", config=settings.pagerank
            )
        profiles = bibliometrics.author_profiles(graph, weighted=measure == "hifindex")
        return bibliometrics.author_table(profiles, AUTHOR_MEASURES[measure])

    def rank(self, measure: str, correlations: bool = False) -> Path:
        measure = measure.lower()
        path = self.config.output_path(constants.RANKING_FILE.format(measure=measure))
        if len(self.corpus) == 0:
            logger.warning("Empty corpus; writing an empty ranking")
            write_tsv(path, ("id", "score", "rank"), [])
            return path
        table = self.score_table(measure)
        table.to_tsv(path)
        if not table.converged:
            logger.warning(f"{measure}: PageRank stopped after {table.iterations} iterations")
        if correlations:
            tables = [self.score_table(m) for m in PAPER_MEASURES]
            write_json(
                self.config.output_path(constants.CORRELATIONS_FILE),
                bibliometrics.measure_correlations(tables),
            )
        return path

    def stacking(self, census_year: int | None = None) -> dict[str, Any]:
        graph = self.weighted_graph
        if census_year is None:
            if not self.corpus.papers:
                raise PreconditionError("stacking detection needs a non-empty corpus")
            census_year = max(p.year for p in self.corpus.papers)
        impacts = bibliometrics.journal_impacts(graph, census_year)
        entries = bibliometrics.detect_stacking(impacts)
        report = {
            "census_year": census_year,
            "journals": [e.as_dict() for e in entries],
            "flagged": [e.journal for e in entries if e.flagged],
        }
        write_json(self.config.output_path(constants.STACKING_FILE), report)
        return report

    def export_graph(self) -> Path:
        path = self.config.output_path(constants.GRAPH_FILE)
        bibliometrics.export_weighted_edges(self.weighted_graph, path)
        return path
