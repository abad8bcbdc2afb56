"""Tests for domain models, estimator containers and schemas."""

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.domain.estimators import FeatureVector, TopicCluster, Vocabulary, stack_vectors
from src.core.domain.models import Category, Corpus, Stage, Tweet
from src.core.domain.schemas import LdaConfig, TrainConfig
from src.core.exceptions import LabelError


def test_category_codes():
    """Test category codes and the racist subset."""
    assert Category.from_code("2") is Category.BLAME
    assert Category.from_code(4) is Category.NON_RACIST
    assert Category.NON_RACIST not in Category.racist()
    assert len(Category.racist()) == 4
    assert Category.EXCLUSION.display_name == "Exclusion"


@pytest.mark.parametrize("value", ["9", "-1", "x", ""])
def test_category_rejects_bad_codes(value):
    """Test that labels outside 0..4 raise LabelError."""
    with pytest.raises(LabelError):
        Category.from_code(value)


def test_stage_windows_are_contiguous():
    """Test that stage windows tile the study range without gaps."""
    assert Stage.S1.window[0].isoformat() == "2020-01-01"
    assert Stage.S3.window[1].isoformat() == "2020-04-30"
    assert Stage.S2.window[0] - Stage.S1.window[1] == timedelta(days=1)
    assert Stage.S3.window[0] - Stage.S2.window[1] == timedelta(days=1)


def test_tweet_normalization():
    """Test id coercion, hashtag extraction and UTC conversion."""
    tweet = Tweet.model_validate(
        {"id": 17, "text": "Stop the #ChinaVirus talk #COVID19", "created_at": "2020-03-11T23:30:00-02:00"}
    )

    assert tweet.id == "17"
    assert tweet.hashtags == ["chinavirus", "covid19"]
    assert tweet.created_at.tzinfo == timezone.utc
    assert tweet.day.isoformat() == "2020-03-12"


def test_tweet_explicit_hashtags_are_lowercased():
    """Test that provided hashtags are kept but normalized."""
    tweet = Tweet(id="1", text="no tags here", created_at=datetime(2020, 1, 2), hashtags=["#Wuhan"])

    assert tweet.hashtags == ["wuhan"]
    assert tweet.created_at.tzinfo == timezone.utc


def test_tweet_record_roundtrip():
    """Test that to_record produces input the model accepts unchanged."""
    tweet = Tweet(id="5", text="#a b", created_at=datetime(2020, 2, 3, 4, 5, 6, 789, tzinfo=timezone.utc))
    again = Tweet.model_validate(tweet.to_record())

    assert again == tweet


def test_corpus_rejects_duplicates(tweet_factory):
    """Test corpus construction with a repeated id."""
    with pytest.raises(ValidationError):
        Corpus(tweets=[tweet_factory("1", "a"), tweet_factory("1", "b")])


def test_corpus_lookup(tweet_factory):
    """Test membership, lookup and labeling."""
    corpus = Corpus(tweets=[tweet_factory("1", "a"), tweet_factory("2", "b")])
    labeled = corpus.with_labels({"2": Category.BLAME})

    assert "1" in corpus and "3" not in corpus
    assert corpus.get("2").text == "b"
    assert corpus.get("9") is None
    assert labeled.labels == {"2": Category.BLAME}
    assert len(labeled) == 2


def test_feature_vector_validation():
    """Test strictly increasing indices and no stored zeros."""
    with pytest.raises(ValueError):
        FeatureVector(indices=(2, 1), weights=(1.0, 1.0))
    with pytest.raises(ValueError):
        FeatureVector(indices=(0,), weights=(0.0,))

    vector = FeatureVector.from_dense([0.0, 3.0, 0.0, -1.0])
    assert vector.pairs() == [(1, 3.0), (3, -1.0)]


def test_stack_vectors_shape():
    """Test stacking sparse vectors into a CSR matrix."""
    matrix = stack_vectors([FeatureVector((0, 2), (1.0, 2.0)), FeatureVector((), ())], dimension=3)

    assert matrix.shape == (2, 3)
    assert matrix.toarray().tolist() == [[1.0, 0.0, 2.0], [0.0, 0.0, 0.0]]


def test_vocabulary_idf():
    """Test the smoothed idf formula."""
    vocab = Vocabulary(terms=("a", "b"), df=np.array([2, 1]), n_docs=2, min_df=1)

    assert vocab.index == {"a": 0, "b": 1}
    assert vocab.idf[0] == pytest.approx(1.0)
    assert vocab.idf[1] == pytest.approx(np.log(3 / 2) + 1)


def test_topic_cluster_must_be_distribution():
    """Test that merged distributions must sum to one."""
    with pytest.raises(ValueError):
        TopicCluster(members=(0,), distribution=np.array([0.5, 0.4]), vocabulary=("a", "b"))


def test_train_config_alias():
    """Test the lambda alias and its validation."""
    assert TrainConfig(**{"lambda": 0.01}).lambda_ == 0.01
    with pytest.raises(ValidationError):
        TrainConfig(lambda_=0.0)


def test_lda_config_defaults():
    """Test priors defaulting to 1/K and the burn-in check."""
    cfg = LdaConfig(n_topics=4)

    assert cfg.resolved_alpha == pytest.approx(0.25)
    assert cfg.resolved_beta == pytest.approx(0.25)
    with pytest.raises(ValidationError):
        LdaConfig(n_topics=4, iterations=10, burn_in=20)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
