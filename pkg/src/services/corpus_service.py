"""Corpus ingestion, stage partitioning and label handling."""

import json
import logging
from collections import Counter
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Union

import pandas as pd
from pydantic import ValidationError

from src.core.domain.models import STUDY_END, STUDY_START, Category, Corpus, Stage, Tweet
from src.core.domain.schemas import CorpusSummary, StageCategoryTable
from src.core.exceptions import DuplicateIdError, InputError, LabelError, StageOutOfRangeError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _first_error(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"]) or "record"
    return f"{location}: {first['msg']}"


def assign_stage(timestamp: Union[datetime, date]) -> Stage:
    """
    Map a timestamp to the pandemic stage whose window holds its UTC date.

    Raises:
        StageOutOfRangeError: date outside 2020-01-01..2020-04-30
    """
    if isinstance(timestamp, datetime):
        if timestamp.tzinfo is not None:
            timestamp = timestamp.astimezone(timezone.utc)
        day = timestamp.date()
    else:
        day = timestamp
    for stage in Stage:
        if stage.contains(day):
            return stage
    raise StageOutOfRangeError(f"Date {day.isoformat()} outside study range {STUDY_START}..{STUDY_END}")


def try_assign_stage(timestamp: Union[datetime, date]) -> Optional[Stage]:
    """Stage of the timestamp, or None when it lies outside the study range."""
    try:
        return assign_stage(timestamp)
    except StageOutOfRangeError:
        return None


def study_dates() -> List[date]:
    span = (STUDY_END - STUDY_START).days
    return [STUDY_START + timedelta(days=offset) for offset in range(span + 1)]


def tweets_in_stage(corpus: Corpus, stage: Stage) -> List[Tweet]:
    return [tweet for tweet in corpus if stage.contains(tweet.day)]


def stage_category_counts(corpus: Corpus, labels: Mapping[str, Category]) -> StageCategoryTable:
    """
    Count labeled tweets per racist category and stage.

    Args:
        corpus: Ingested corpus
        labels: Gold labels or model predictions keyed by tweet id

    Returns:
        4x3 table with row totals; non-racist tweets reported in their own row
    """
    counts = {category: {stage: 0 for stage in Stage} for category in Category.racist()}
    non_racist = {stage: 0 for stage in Stage}
    skipped_unlabeled = 0
    skipped_out_of_range = 0

    for tweet in corpus:
        category = labels.get(tweet.id)
        if category is None:
            skipped_unlabeled += 1
            continue
        stage = try_assign_stage(tweet.day)
        if stage is None:
            skipped_out_of_range += 1
            continue
        if category == Category.NON_RACIST:
            non_racist[stage] += 1
        else:
            counts[category][stage] += 1

    if skipped_unlabeled:
        logger.info(f"Skipped {skipped_unlabeled} unlabeled tweets while counting")
    if skipped_out_of_range:
        logger.warning(f"Skipped {skipped_out_of_range} labeled tweets outside the study range")

    return StageCategoryTable(
        counts=counts,
        totals={category: sum(row.values()) for category, row in counts.items()},
        non_racist=non_racist,
        skipped_unlabeled=skipped_unlabeled,
        skipped_out_of_range=skipped_out_of_range,
    )


def daily_counts(corpus: Corpus) -> Dict[date, int]:
    """Tweets per UTC calendar date; every study date present, zero-filled."""
    observed = Counter(tweet.day for tweet in corpus)
    counts = {day: 0 for day in study_dates()}
    for day, count in observed.items():
        counts[day] = count
    return dict(sorted(counts.items()))


def corpus_summary(corpus: Corpus) -> CorpusSummary:
    per_stage = {stage: 0 for stage in Stage}
    out_of_range = 0
    hashtags = set()
    for tweet in corpus:
        hashtags.update(tweet.hashtags)
        stage = try_assign_stage(tweet.day)
        if stage is None:
            out_of_range += 1
        else:
            per_stage[stage] += 1
    return CorpusSummary(
        n_tweets=len(corpus),
        per_stage=per_stage,
        out_of_range=out_of_range,
        distinct_hashtags=len(hashtags),
        n_labels=len(corpus.labels),
    )


def read_label_csv(path: PathLike, what: str = "labels") -> List[tuple]:
    """
    Read an `id,label` CSV into (id, Category) rows in file order.

    Raises:
        InputError: missing file or columns
        LabelError: label outside 0..4
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{what.capitalize()} file not found: {path}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise InputError(f"{what.capitalize()} file {path} has no header") from None
    except pd.errors.ParserError as e:
        raise InputError(f"Cannot parse {what} file {path}: {e}") from e

    if list(frame.columns[:2]) != ["id", "label"]:
        raise InputError(f"{what.capitalize()} file {path} must have header 'id,label'")

    rows = []
    for offset, (tweet_id, raw_label) in enumerate(zip(frame["id"], frame["label"])):
        line = offset + 2
        try:
            category = Category.from_code(raw_label)
        except LabelError as e:
            raise LabelError(f"{path}:{line}: {e}") from None
        rows.append((tweet_id.strip(), category))
    return rows


class CorpusService:
    """Service for reading and writing corpus artifacts."""

    def load_corpus(self, path: PathLike) -> Corpus:
        """
        Load a JSONL tweet corpus.

        Args:
            path: File with one JSON object per line (id, text, created_at, optional hashtags)

        Returns:
            Corpus in file order

        Raises:
            InputError: missing file or malformed line (message carries the line number)
            DuplicateIdError: an id repeats
        """
        path = Path(path)
        if not path.is_file():
            raise InputError(f"Corpus file not found: {path}")

        tweets: List[Tweet] = []
        seen: Dict[str, int] = {}
        with path.open("rb") as handle:
            for line_no, raw in enumerate(handle, start=1):
                try:
                    line = raw.decode("utf-8")
                except UnicodeDecodeError as e:
                    raise InputError(f"{path}:{line_no}: not valid UTF-8 ({e.reason})") from e
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    raise InputError(f"{path}:{line_no}: malformed JSON ({e.msg})") from e
                if not isinstance(record, dict):
                    raise InputError(f"{path}:{line_no}: expected a JSON object")
                try:
                    tweet = Tweet.model_validate(record)
                except ValidationError as e:
                    raise InputError(f"{path}:{line_no}: invalid tweet ({_first_error(e)})") from e
                if tweet.id in seen:
                    raise DuplicateIdError(tweet.id, line_no)
                seen[tweet.id] = line_no
                tweets.append(tweet)

        logger.info(f"Loaded {len(tweets)} tweets from {path}")
        return Corpus(tweets=tweets)

    def dump_corpus(self, corpus: Corpus, path: PathLike) -> Path:
        """Write the corpus back to the JSONL form read by load_corpus."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for tweet in corpus:
                handle.write(json.dumps(tweet.to_record(), ensure_ascii=False) + "\n")
        logger.info(f"Wrote {len(corpus)} tweets to {path}")
        return path

    def load_labels(self, path: PathLike) -> Dict[str, Category]:
        """
        Load gold labels from an `id,label` CSV.

        Raises:
            LabelError: label outside 0..4 or an id labeled twice
        """
        labels: Dict[str, Category] = {}
        for tweet_id, category in read_label_csv(path, "labels"):
            if tweet_id in labels:
                raise LabelError(f"Tweet id '{tweet_id}' labeled more than once in {path}")
            labels[tweet_id] = category
        logger.info(f"Loaded {len(labels)} labels from {path}")
        return labels

    def attach_labels(self, corpus: Corpus, labels: Mapping[str, Category]) -> Corpus:
        """Attach labels, rejecting ids that are not in the corpus."""
        unknown = [tweet_id for tweet_id in labels if tweet_id not in corpus]
        if unknown:
            raise LabelError(f"{len(unknown)} labels refer to unknown tweet ids, e.g. '{unknown[0]}'")
        return corpus.with_labels(labels)
