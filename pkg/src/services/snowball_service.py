"""Dynamic hashtag selection by snowball sampling."""

import asyncio
import logging
from collections import Counter
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from src.core.domain.models import Tweet
from src.core.domain.schemas import (
    DiscoveredHashtag,
    SamplingEntry,
    SnowballConfig,
    SnowballResult,
    SnowballRound,
)
from src.core.exceptions import ProviderError
from src.infrastructure.providers import TweetProvider

logger = logging.getLogger(__name__)


def count_hashtags(sample: Iterable[Tweet], exclude: Iterable[str] = ()) -> Dict[str, int]:
    """
    Count hashtag occurrences across a sample.

    A hashtag used twice in one tweet counts twice; excluded hashtags are skipped.
    """
    excluded = set(exclude)
    table: Counter = Counter()
    for tweet in sample:
        table.update(tag for tag in tweet.hashtags if tag not in excluded)
    return dict(table)


def top_hashtags(table: Mapping[str, int], k: int, floor: int = 1) -> List[str]:
    """
    Rank hashtags by count.

    Args:
        table: Hashtag frequency table
        k: Maximum number of hashtags returned
        floor: Minimum count a hashtag needs to qualify

    Returns:
        Up to k hashtags, count descending, ties lexicographic
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    qualifying = [(tag, count) for tag, count in table.items() if count >= floor]
    qualifying.sort(key=lambda item: (-item[1], item[0]))
    return [tag for tag, _ in qualifying[:k]]


class SnowballService:
    """Runs the recursive hashtag discovery against a tweet provider."""

    def __init__(self, provider: TweetProvider):
        """
        Initialize snowball service.

        Args:
            provider: Source answering hashtag sample queries
        """
        self.provider = provider
        logger.info(f"Snowball service initialized with provider {provider.get_name()}")

    async def _sample_one(self, hashtag: str, n: int) -> Tuple[str, List[Tweet]]:
        try:
            tweets = await self.provider.sample(hashtag, n)
        except Exception as e:
            logger.error(f"Provider failed for #{hashtag}: {e}")
            raise ProviderError(hashtag, e) from e

        matching = [tweet for tweet in tweets if hashtag in tweet.hashtags]
        if len(matching) < len(tweets):
            logger.warning(
                f"Provider returned {len(tweets) - len(matching)} tweets without #{hashtag}; ignored"
            )
        return hashtag, matching

    async def _sample_round(self, hashtags: Sequence[str], n: int) -> List[Tuple[str, List[Tweet]]]:
        if self.provider.serial:
            return [await self._sample_one(tag, n) for tag in hashtags]
        return list(await asyncio.gather(*(self._sample_one(tag, n) for tag in hashtags)))

    async def run_snowball(self, config: SnowballConfig) -> SnowballResult:
        """
        Discover co-occurring hashtags round by round.

        Round 1 samples every seed and keeps the top_k new hashtags; later
        rounds sample the previous round's discoveries and additionally
        require min_occurrences. Stops after config.rounds or when a round
        discovers nothing.

        Args:
            config: Seeds and sampling parameters

        Returns:
            Seeds plus discovered hashtags in discovery order, with the audit log
        """
        seeds = list(dict.fromkeys(tag.lower().lstrip("#") for tag in config.seeds))
        accumulated: List[str] = list(seeds)
        excluded = set(accumulated)
        frontier = list(seeds)
        rounds: List[SnowballRound] = []

        for round_no in range(1, config.rounds + 1):
            floor = 1 if round_no == 1 else config.min_occurrences
            samples = await self._sample_round(frontier, config.sample_size)

            entries: List[SamplingEntry] = []
            pooled_tweets: Dict[str, Tweet] = {}
            for hashtag, tweets in samples:
                if not tweets:
                    logger.warning(f"Round {round_no}: empty sample for #{hashtag}, skipped")
                    entries.append(SamplingEntry(hashtag=hashtag, sample_size=0, frequencies={}, skipped=True))
                    continue
                entries.append(
                    SamplingEntry(
                        hashtag=hashtag,
                        sample_size=len(tweets),
                        frequencies=count_hashtags(tweets, excluded),
                    )
                )
                for tweet in tweets:
                    pooled_tweets.setdefault(tweet.id, tweet)

            pooled = count_hashtags(pooled_tweets.values(), excluded)
            discovered = top_hashtags(pooled, config.top_k, floor)
            rounds.append(
                SnowballRound(
                    round=round_no,
                    floor=floor,
                    queried=list(frontier),
                    entries=entries,
                    pooled=dict(sorted(pooled.items())),
                    discovered=[DiscoveredHashtag(hashtag=tag, count=pooled[tag]) for tag in discovered],
                )
            )
            logger.info(
                f"Round {round_no}: sampled {len(pooled_tweets)} tweets for {len(frontier)} hashtags, "
                f"discovered {discovered}"
            )

            accumulated.extend(discovered)
            excluded.update(discovered)
            frontier = discovered
            if not discovered:
                logger.info(f"Round {round_no} discovered no new hashtags; stopping")
                break

        return SnowballResult(hashtags=accumulated, seeds=seeds, rounds=rounds)
