"""Base class for tweet providers."""

from abc import ABC, abstractmethod
from typing import List

from src.core.domain.models import Tweet


class TweetProvider(ABC):
    """Source of tweets carrying a given hashtag."""

    #: Providers that cannot serve concurrent queries set this to True.
    serial: bool = False

    @abstractmethod
    def get_name(self) -> str:
        """Get provider display name."""
        pass

    @abstractmethod
    async def sample(self, hashtag: str, n: int) -> List[Tweet]:
        """
        Return up to n tweets containing the hashtag.

        Args:
            hashtag: Lowercase hashtag without '#'
            n: Maximum sample size

        Returns:
            Tweets whose hashtag list contains the queried hashtag
        """
        pass
