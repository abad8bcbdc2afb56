"""Business logic services."""

from .classification_service import ClassificationService
from .corpus_service import CorpusService
from .report_service import ReportService
from .snowball_service import SnowballService
from .topic_service import TopicService

__all__ = ["CorpusService", "SnowballService", "ClassificationService", "TopicService", "ReportService"]
