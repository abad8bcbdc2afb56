"""Domain models and schemas."""

from .estimators import EmbeddingTable, FeatureVector, LdaModel, LinearModel, TopicCluster, Vocabulary
from .models import AnnotationSet, Category, Corpus, Lexicon, Stage, TokenizedDoc, Tweet
from .schemas import (
    BigramPolicy,
    CVReport,
    LdaConfig,
    RunManifest,
    SnowballConfig,
    SnowballResult,
    StageCategoryTable,
    TopicCellResult,
    TrainConfig,
)

__all__ = [
    "Tweet",
    "Corpus",
    "Category",
    "Stage",
    "TokenizedDoc",
    "Lexicon",
    "AnnotationSet",
    "Vocabulary",
    "FeatureVector",
    "EmbeddingTable",
    "LinearModel",
    "LdaModel",
    "TopicCluster",
    "SnowballConfig",
    "SnowballResult",
    "BigramPolicy",
    "TrainConfig",
    "LdaConfig",
    "CVReport",
    "StageCategoryTable",
    "TopicCellResult",
    "RunManifest",
]
