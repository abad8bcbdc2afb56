"""Tests for the classification and topic-modeling text cleaners."""

import pytest

from src.core.config.settings import RESOURCES_DIR
from src.core.domain.models import Lexicon, TokenizedDoc
from src.core.domain.schemas import BigramPolicy
from src.core.exceptions import InputError
from src.services.preprocess_service import (
    clean_for_classification,
    clean_for_topics,
    detect_bigrams,
    lemmatize,
    load_lexicon,
    token_length_stats,
    topic_documents,
)


@pytest.mark.parametrize(
    "text,expected",
    [
        ("Check https://t.co/x NOW!!", "check now"),
        ("", ""),
        ("#ChinaVirus spread", "chinavirus spread"),
        ("  www.who.int   says:\n stay   home ", "says stay home"),
        ("it's @WHO's call", "its whos call"),
    ],
)
def test_clean_for_classification(text, expected):
    """Test URL, punctuation and case handling on the classification path."""
    assert clean_for_classification(text) == expected


@pytest.mark.parametrize("text", ["Check https://t.co/x NOW!!", "A -- b ... #c_d", "\tMixed CASE\n"])
def test_clean_for_classification_is_idempotent(text):
    """Test f(f(x)) == f(x)."""
    once = clean_for_classification(text)
    assert clean_for_classification(once) == once


def test_clean_for_topics_example():
    """Test the newline, mention, hashtag, stopword and lemma steps together."""
    lexicon = Lexicon(stopwords=frozenset({"the"}), lemma_map={"virus": "virus"})
    doc = clean_for_topics("The virus\nspreads @user #ChinaVirus", lexicon, source_id="7")

    assert doc.tokens == ("virus", "spread")
    assert doc.source_id == "7"


def test_clean_for_topics_edge_cases(small_lexicon):
    """Test documents reduced to nothing and repeated tokens."""
    assert clean_for_topics("@a @b #c #d", small_lexicon).tokens == ()
    assert clean_for_topics("china china china", small_lexicon).tokens == ("china", "china", "china")
    assert clean_for_topics("a b c x Wuhan", small_lexicon).tokens == ("wuhan",)


def test_clean_for_topics_output_properties(small_lexicon):
    """Test that no stopword, marker or uppercase survives."""
    doc = clean_for_topics("THE Virus is @spreading in #Wuhan and OF the world!! https://x.y", small_lexicon)

    for token in doc.tokens:
        assert token not in small_lexicon.stopwords
        assert "@" not in token and "#" not in token
        assert token == token.lower()


@pytest.mark.parametrize(
    "token,expected",
    [
        ("confirmed", "confirm"),
        ("virus", "virus"),
        ("china", "china"),
        ("studies", "study"),
        ("classes", "class"),
        ("bed", "bed"),
        ("gas", "gas"),
    ],
)
def test_lemmatize(token, expected):
    """Test table lookup and the suffix fallback rules."""
    lexicon = Lexicon(lemma_map={"virus": "virus"})
    assert lemmatize(token, lexicon) == expected


def test_lemmatize_never_empty():
    """Test that lemmas are never empty strings."""
    lexicon = Lexicon()
    for token in ["s", "ed", "ing", "ies", "sses", "xs"]:
        assert lemmatize(token, lexicon)


def test_detect_bigrams_merges_frequent_pair():
    """Test that a strongly associated pair becomes one token."""
    docs = [TokenizedDoc(str(i), ("hong", "kong", f"w{i % 10}")) for i in range(100)]
    merged = detect_bigrams(docs, BigramPolicy(min_count=5, score_threshold=0.1))

    assert all(doc.tokens[0] == "hong_kong" for doc in merged)
    assert merged[3].tokens == ("hong_kong", "w3")
    assert sum(len(d) for d in merged) == sum(len(d) for d in docs) - 100


def test_detect_bigrams_unchanged_cases():
    """Test high thresholds and single-token documents."""
    docs = [TokenizedDoc(str(i), ("hong", "kong")) for i in range(20)]
    assert detect_bigrams(docs, BigramPolicy(min_count=5, score_threshold=1e12)) == docs

    singles = [TokenizedDoc(str(i), ("word",)) for i in range(20)]
    assert detect_bigrams(singles, BigramPolicy(min_count=1, score_threshold=0.0)) == singles


def test_token_length_stats():
    """Test min, max, lower-middle median and mean."""
    stats = token_length_stats([8, 37, 130])
    assert (stats.min, stats.max, stats.median) == (8, 130, 37)

    assert token_length_stats([1, 2, 3, 4]).median == 2
    single = token_length_stats([5])
    assert (single.min, single.max, single.median, single.mean) == (5, 5, 5, 5.0)

    docs = [TokenizedDoc("a", ("x", "y")), TokenizedDoc("b", ())]
    assert token_length_stats(docs).mean == pytest.approx(1.0)

    with pytest.raises(InputError):
        token_length_stats([])


def test_shipped_lexicon():
    """Test the stopword list and lemma table shipped with the package."""
    lexicon = load_lexicon(RESOURCES_DIR / "stopwords_en.txt", RESOURCES_DIR / "lemmas_en.tsv")

    assert len(lexicon.stopwords) == 179
    assert "the" in lexicon.stopwords
    assert lexicon.lemma_map["spreads"] == "spread"
    assert lemmatize("virus", lexicon) == "virus"


def test_load_lexicon_errors(tmp_path):
    """Test missing files and malformed lemma lines."""
    stop = tmp_path / "stop.txt"
    stop.write_text("The\nof\n", encoding="utf-8")
    bad = tmp_path / "lemmas.tsv"
    bad.write_text("cases\tcase\nbroken line\n", encoding="utf-8")

    assert load_lexicon(stop).stopwords == frozenset({"the", "of"})
    with pytest.raises(InputError, match=":2:"):
        load_lexicon(stop, bad)
    with pytest.raises(InputError):
        load_lexicon(tmp_path / "none.txt")


def test_topic_documents(tweet_factory, small_lexicon):
    """Test batch topic cleaning keeps tweet ids."""
    tweets = [tweet_factory("1", "Masks work #covid"), tweet_factory("2", "@x")]
    docs = topic_documents(tweets, small_lexicon, BigramPolicy())

    assert [d.source_id for d in docs] == ["1", "2"]
    assert docs[0].tokens == ("mask", "work")
    assert docs[1].tokens == ()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
