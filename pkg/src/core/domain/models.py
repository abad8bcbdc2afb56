"""Domain models for the tweet corpus and its annotations."""

import re
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from enum import Enum, IntEnum
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from src.core.exceptions import LabelError

HASHTAG_PATTERN = re.compile(r"#(\w+)")


class Category(IntEnum):
    """Racism category codes used by annotators and classifiers."""

    STIGMATIZATION = 0
    OFFENSIVENESS = 1
    BLAME = 2
    EXCLUSION = 3
    NON_RACIST = 4

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]

    @classmethod
    def racist(cls) -> Tuple["Category", ...]:
        """The four racist categories, in code order."""
        return (cls.STIGMATIZATION, cls.OFFENSIVENESS, cls.BLAME, cls.EXCLUSION)

    @classmethod
    def from_code(cls, value: object) -> "Category":
        """Parse an integer code (int or numeric string) into a category."""
        try:
            code = int(str(value).strip())
        except (TypeError, ValueError):
            raise LabelError(f"Label '{value}' is not an integer code 0..4") from None
        if code not in cls._value2member_map_:
            raise LabelError(f"Label {code} outside the category codes 0..4")
        return cls(code)


_DISPLAY_NAMES = {
    Category.STIGMATIZATION: "Stigmatization",
    Category.OFFENSIVENESS: "Offensiveness",
    Category.BLAME: "Blame",
    Category.EXCLUSION: "Exclusion",
    Category.NON_RACIST: "Non-racist",
}


class Stage(str, Enum):
    """Pandemic phase defined by WHO status changes."""

    S1 = "S1"
    S2 = "S2"
    S3 = "S3"

    @property
    def window(self) -> Tuple[date, date]:
        """Inclusive (first, last) calendar dates of the stage."""
        return STAGE_WINDOWS[self]

    @property
    def description(self) -> str:
        return _STAGE_DESCRIPTIONS[self]

    def contains(self, day: date) -> bool:
        first, last = self.window
        return first <= day <= last


STAGE_WINDOWS: Dict[Stage, Tuple[date, date]] = {
    Stage.S1: (date(2020, 1, 1), date(2020, 1, 31)),
    Stage.S2: (date(2020, 2, 1), date(2020, 3, 11)),
    Stage.S3: (date(2020, 3, 12), date(2020, 4, 30)),
}

_STAGE_DESCRIPTIONS = {
    Stage.S1: "Domestic epidemic",
    Stage.S2: "International public health emergency",
    Stage.S3: "Global pandemic",
}

STUDY_START = STAGE_WINDOWS[Stage.S1][0]
STUDY_END = STAGE_WINDOWS[Stage.S3][1]


class Tweet(BaseModel):
    """One social-media post."""

    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1)
    text: str
    created_at: datetime
    hashtags: List[str] = Field(default_factory=list)

    @model_validator(mode="before")
    @classmethod
    def _extract_missing_hashtags(cls, data: object) -> object:
        if isinstance(data, dict) and data.get("hashtags") is None:
            data = dict(data)
            data["hashtags"] = HASHTAG_PATTERN.findall(str(data.get("text", "")))
        return data

    @field_validator("id", mode="before")
    @classmethod
    def _coerce_id(cls, value: object) -> object:
        if isinstance(value, int):
            return str(value)
        if isinstance(value, str):
            return value.strip()
        return value

    @field_validator("created_at")
    @classmethod
    def _to_utc(cls, value: datetime) -> datetime:
        if value.tzinfo is None:
            return value.replace(tzinfo=timezone.utc)
        return value.astimezone(timezone.utc)

    @field_validator("hashtags")
    @classmethod
    def _normalize_hashtags(cls, value: List[str]) -> List[str]:
        normalized = []
        for tag in value:
            tag = tag.strip().lstrip("#").lower()
            if not tag or "#" in tag:
                raise ValueError(f"Invalid hashtag '{tag}'")
            normalized.append(tag)
        return normalized

    @property
    def day(self) -> date:
        """UTC calendar date of the post."""
        return self.created_at.date()

    def to_record(self) -> Dict[str, object]:
        """JSONL record as read by the corpus loader."""
        return {
            "id": self.id,
            "text": self.text,
            "created_at": self.created_at.strftime("%Y-%m-%dT%H:%M:%S.%fZ"),
            "hashtags": list(self.hashtags),
        }


class Corpus(BaseModel):
    """Ordered, immutable collection of tweets with optional gold labels."""

    model_config = ConfigDict(frozen=True)

    tweets: List[Tweet] = Field(default_factory=list)
    labels: Dict[str, Category] = Field(default_factory=dict)

    _index: Dict[str, int] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_ids(self) -> "Corpus":
        index: Dict[str, int] = {}
        for position, tweet in enumerate(self.tweets):
            if tweet.id in index:
                raise ValueError(f"Duplicate tweet id '{tweet.id}'")
            index[tweet.id] = position
        unknown = [tweet_id for tweet_id in self.labels if tweet_id not in index]
        if unknown:
            raise ValueError(f"Labels refer to unknown tweet ids: {', '.join(sorted(unknown)[:5])}")
        return self

    def model_post_init(self, __context: object) -> None:
        self._index = {tweet.id: position for position, tweet in enumerate(self.tweets)}

    def __len__(self) -> int:
        return len(self.tweets)

    def __iter__(self) -> Iterator[Tweet]:  # type: ignore[override]
        return iter(self.tweets)

    def __contains__(self, tweet_id: object) -> bool:
        return tweet_id in self._index

    def get(self, tweet_id: str) -> Optional[Tweet]:
        position = self._index.get(tweet_id)
        return None if position is None else self.tweets[position]

    @property
    def ids(self) -> List[str]:
        return [tweet.id for tweet in self.tweets]

    def with_labels(self, labels: Mapping[str, Category]) -> "Corpus":
        """Copy of the corpus carrying the given labels."""
        return Corpus(tweets=self.tweets, labels=dict(labels))


@dataclass(frozen=True)
class TokenizedDoc:
    """Token sequence produced by the topic-modeling cleaner."""

    source_id: str
    tokens: Tuple[str, ...]

    def __post_init__(self) -> None:
        for token in self.tokens:
            if not token or any(ch.isspace() for ch in token):
                raise ValueError(f"Invalid token {token!r} in document {self.source_id}")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Lexicon:
    """Stopword set and lemma table used by the topic cleaner."""

    stopwords: frozenset = field(default_factory=frozenset)
    lemma_map: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if any(word != word.lower() for word in self.stopwords):
            raise ValueError("Stopwords must be lowercase")
        if any(not lemma for lemma in self.lemma_map.values()):
            raise ValueError("Lemma values must be non-empty")


class AnnotationSet(BaseModel):
    """Labels assigned by several annotators to a shared tweet set."""

    annotations: Dict[str, Dict[str, Category]]

    @field_validator("annotations")
    @classmethod
    def _at_least_two(cls, value: Dict[str, Dict[str, Category]]) -> Dict[str, Dict[str, Category]]:
        if len(value) < 2:
            raise ValueError("Reliability needs at least two annotators")
        return value

    @property
    def annotators(self) -> List[str]:
        return sorted(self.annotations)
