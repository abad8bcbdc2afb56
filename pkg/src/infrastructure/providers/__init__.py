"""Tweet sources answering hashtag sample queries."""

from .base_provider import TweetProvider
from .offline_provider import OfflineCorpusProvider

__all__ = ["TweetProvider", "OfflineCorpusProvider"]
