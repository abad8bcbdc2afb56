"""Configuration and result schemas exchanged between services and the CLI."""

from datetime import date
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from src.core.domain.models import Category, Stage


class SnowballConfig(BaseModel):
    """Parameters of the dynamic hashtag selection."""

    seeds: List[str] = Field(..., min_length=1)
    sample_size: int = Field(default=500, ge=1)
    top_k: int = Field(default=5, ge=1)
    min_occurrences: int = Field(default=50, ge=1)
    rounds: int = Field(default=2, ge=1)


class BigramPolicy(BaseModel):
    """Thresholds for merging adjacent tokens into phrases."""

    min_count: int = Field(default=5, ge=1)
    score_threshold: float = Field(default=10.0, ge=0.0)


class TrainConfig(BaseModel):
    """Pegasos hinge-loss training parameters."""

    lambda_: float = Field(default=1e-4, gt=0.0, alias="lambda")
    epochs: int = Field(default=30, ge=1)
    seed: int = 0
    projection: bool = True

    model_config = {"populate_by_name": True}

    def label(self) -> str:
        return f"lambda={self.lambda_:g}, epochs={self.epochs}"


class LdaConfig(BaseModel):
    """Collapsed Gibbs LDA parameters; priors default to 1/K."""

    n_topics: int = Field(..., ge=1)
    alpha: Optional[float] = Field(default=None, gt=0.0)
    beta: Optional[float] = Field(default=None, gt=0.0)
    iterations: int = Field(default=1000, ge=1)
    burn_in: int = Field(default=100, ge=0)
    optimize_interval: int = Field(default=10, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_schedule(self) -> "LdaConfig":
        if self.iterations < self.burn_in:
            raise ValueError("iterations must be >= burn_in")
        return self

    @property
    def resolved_alpha(self) -> float:
        return self.alpha if self.alpha is not None else 1.0 / self.n_topics

    @property
    def resolved_beta(self) -> float:
        return self.beta if self.beta is not None else 1.0 / self.n_topics


class CorpusSummary(BaseModel):
    """Headline numbers of an ingested corpus."""

    n_tweets: int
    per_stage: Dict[Stage, int]
    out_of_range: int
    distinct_hashtags: int
    n_labels: int = 0


class StageCategoryTable(BaseModel):
    """Tweets per racist category and stage, plus the non-racist row kept apart."""

    counts: Dict[Category, Dict[Stage, int]]
    totals: Dict[Category, int]
    non_racist: Dict[Stage, int]
    skipped_unlabeled: int = 0
    skipped_out_of_range: int = 0


class TokenLengthStats(BaseModel):
    """Summary of per-document token counts."""

    min: int
    max: int
    median: int
    mean: float
    n_docs: int


class SamplingEntry(BaseModel):
    """One provider query inside a snowball round."""

    hashtag: str
    sample_size: int
    frequencies: Dict[str, int]
    skipped: bool = False


class DiscoveredHashtag(BaseModel):
    hashtag: str
    count: int


class SnowballRound(BaseModel):
    """Audit record for one sampling round."""

    round: int
    floor: int
    queried: List[str]
    entries: List[SamplingEntry]
    pooled: Dict[str, int]
    discovered: List[DiscoveredHashtag]


class SnowballResult(BaseModel):
    """Accumulated hashtag list and its per-round audit log."""

    hashtags: List[str]
    seeds: List[str]
    rounds: List[SnowballRound]

    @property
    def discovered(self) -> List[str]:
        return [tag for tag in self.hashtags if tag not in self.seeds]


class EvaluationResult(BaseModel):
    """Accuracy, weighted F1 and confusion counts for one prediction set."""

    accuracy: float = Field(..., ge=0.0, le=1.0)
    weighted_f1: float = Field(..., ge=0.0, le=1.0)
    confusion: List[List[int]]
    per_class_f1: List[float]
    per_class_precision: List[float]
    per_class_recall: List[float]
    support: List[int]


class CVReport(BaseModel):
    """Cross-validation summary over k folds."""

    feature_kind: str
    config: TrainConfig
    fold_accuracy: List[float]
    fold_weighted_f1: List[float]
    mean_accuracy: float = Field(..., ge=0.0, le=1.0)
    mean_weighted_f1: float = Field(..., ge=0.0, le=1.0)
    confusion: List[List[float]]  # mean of per-fold row-normalized matrices
    n_samples: int
    folds: int
    fold_feature_dimension: List[int] = Field(default_factory=list)


class GridSearchResult(BaseModel):
    """Best grid point and the cross-validation report of every point."""

    best: TrainConfig
    best_report: CVReport
    reports: List[CVReport]


class ModelComparisonRow(BaseModel):
    """One model and its fold-averaged scores, as shown in the comparison table."""

    model: str
    accuracy: float
    weighted_f1: float


class PredictionImport(BaseModel):
    """Predictions read from an external model, ready for downstream analysis."""

    predictions: Dict[str, Category]
    unknown_ids: List[str] = Field(default_factory=list)


class ClusterResult(BaseModel):
    """One merged topic with its keywords."""

    members: List[int]
    top_words: List[str]
    probabilities: List[float]


class TopicCellResult(BaseModel):
    """Topic analysis of one (category, stage) cell."""

    category: Category
    stage: Stage
    status: str = Field(..., pattern="^(ok|insufficient)$")
    n_docs: int
    vocabulary_size: int = 0
    k: Optional[int] = None
    coherence_by_k: Dict[int, float] = Field(default_factory=dict)
    clusters: List[ClusterResult] = Field(default_factory=list)
    dominant_topic_counts: List[int] = Field(default_factory=list)
    reason: Optional[str] = None


class TopicPipelineResult(BaseModel):
    """All twelve topic cells of a run."""

    cells: List[TopicCellResult]

    def cell(self, category: Category, stage: Stage) -> TopicCellResult:
        for cell in self.cells:
            if cell.category == category and cell.stage == stage:
                return cell
        raise KeyError(f"No topic cell for {category.display_name}/{stage.value}")


class ReliabilityReport(BaseModel):
    """Pairwise percentage agreement between annotators."""

    annotators: List[str]
    pairwise: Dict[str, Dict[str, float]]
    overall: float
    shared_items: int


class DailyCounts(BaseModel):
    counts: Dict[date, int]


class RunManifest(BaseModel):
    """Provenance of one CLI invocation."""

    command: str
    app_version: str
    settings: Dict
    seeds: Dict[str, int]
    inputs: Dict[str, str]
    outputs: List[str]
    started_at: str
    finished_at: str
    duration_seconds: float


class TokenStatsReport(BaseModel):
    """Token length statistics per cleaning path."""

    stats: Dict[str, TokenLengthStats]


class ModelComparison(BaseModel):
    rows: List[ModelComparisonRow]
