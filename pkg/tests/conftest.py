"""Shared fixtures: synthetic tweets, corpora and planted-structure documents."""

from datetime import datetime, timezone
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pytest

from src.core.domain.models import Category, Corpus, Lexicon, TokenizedDoc, Tweet

STAGE_DAYS = {"S1": (2020, 1, 15), "S2": (2020, 2, 20), "S3": (2020, 4, 1)}


def make_tweet(tweet_id: str, text: str, day: Tuple[int, int, int] = (2020, 2, 20), hashtags: Optional[List[str]] = None) -> Tweet:
    return Tweet(
        id=tweet_id,
        text=text,
        created_at=datetime(*day, 12, 0, tzinfo=timezone.utc),
        hashtags=hashtags,
    )


@pytest.fixture
def tweet_factory():
    """Build a Tweet from id, text and (year, month, day)."""
    return make_tweet


@pytest.fixture
def small_lexicon() -> Lexicon:
    return Lexicon(stopwords=frozenset({"the", "a", "is", "and", "of"}), lemma_map={"virus": "virus"})


@pytest.fixture
def class_corpus():
    """
    Five-class texts with disjoint 20-word class vocabularies plus 30 shared noise words.

    Returns a builder taking (docs_per_class, seed) and returning (texts, labels).
    """

    def build(docs_per_class: int = 100, seed: int = 0) -> Tuple[List[str], List[Category]]:
        rng = np.random.default_rng(seed)
        noise = [f"noise{i}" for i in range(30)]
        texts, labels = [], []
        for category in Category:
            vocab = [f"c{int(category)}w{i}" for i in range(20)]
            for _ in range(docs_per_class):
                words = list(rng.choice(vocab, size=8)) + list(rng.choice(noise, size=4))
                rng.shuffle(words)
                texts.append(" ".join(words))
                labels.append(category)
        return texts, labels

    return build


def planted_topic_docs(
    n_topics: int,
    words_per_topic: int = 10,
    n_docs: int = 200,
    doc_length: int = 20,
    seed: int = 0,
) -> Tuple[List[TokenizedDoc], List[List[str]]]:
    """Documents each drawn from one planted topic's disjoint word set."""
    rng = np.random.default_rng(seed)
    topics = [[f"t{k}w{i}" for i in range(words_per_topic)] for k in range(n_topics)]
    docs = []
    for d in range(n_docs):
        words = topics[d % n_topics]
        tokens = tuple(str(w) for w in rng.choice(words, size=doc_length))
        docs.append(TokenizedDoc(source_id=f"d{d}", tokens=tokens))
    return docs, topics


@pytest.fixture
def planted_docs():
    return planted_topic_docs


def labeled_topic_corpus(
    categories: Sequence[Category],
    stages: Sequence[str],
    docs_per_cell: int = 60,
    seed: int = 0,
) -> Tuple[Corpus, Dict[str, Category]]:
    """
    Corpus whose every (category, stage) cell holds docs_per_cell tweets built
    from five planted word groups specific to that cell.
    """
    rng = np.random.default_rng(seed)
    tweets, labels = [], {}
    for category in categories:
        for stage in stages:
            groups = [[f"k{int(category)}{stage.lower()}g{g}x{i}" for i in range(6)] for g in range(5)]
            for n in range(docs_per_cell):
                words = rng.choice(groups[n % 5], size=8)
                tweet_id = f"{int(category)}-{stage}-{n}"
                tweets.append(make_tweet(tweet_id, " ".join(words) + " #covid19", STAGE_DAYS[stage]))
                labels[tweet_id] = category
    return Corpus(tweets=tweets), labels


@pytest.fixture
def topic_corpus():
    return labeled_topic_corpus
