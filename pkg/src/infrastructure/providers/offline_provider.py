"""Provider replaying a stored corpus."""

import logging
from collections import defaultdict
from typing import Dict, List, Optional

from src.core.domain.models import Corpus, Stage, Tweet

from .base_provider import TweetProvider

logger = logging.getLogger(__name__)


class OfflineCorpusProvider(TweetProvider):
    """
    Answers sample queries from an ingested corpus.

    The first n tweets carrying the hashtag are returned in corpus order, so
    repeated runs over the same corpus see identical samples.
    """

    def __init__(self, corpus: Corpus, stage: Optional[Stage] = None):
        """
        Initialize the provider.

        Args:
            corpus: Corpus to replay
            stage: Restrict samples to this stage window (per-stage re-runs)
        """
        self.stage = stage
        self._by_hashtag: Dict[str, List[Tweet]] = defaultdict(list)

        window: Optional[tuple] = stage.window if stage else None
        for tweet in corpus:
            if window and not (window[0] <= tweet.day <= window[1]):
                continue
            for tag in dict.fromkeys(tweet.hashtags):
                self._by_hashtag[tag].append(tweet)

        logger.info(
            f"Offline provider indexed {len(self._by_hashtag)} hashtags"
            + (f" for stage {stage.value}" if stage else "")
        )

    def get_name(self) -> str:
        return "offline-corpus" if self.stage is None else f"offline-corpus[{self.stage.value}]"

    async def sample(self, hashtag: str, n: int) -> List[Tweet]:
        return list(self._by_hashtag.get(hashtag.lower().lstrip("#"), [])[:n])
