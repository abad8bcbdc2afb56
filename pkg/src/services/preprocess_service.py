"""Text normalization for classification and topic modeling."""

import logging
import re
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.domain.models import Lexicon, TokenizedDoc, Tweet
from src.core.domain.schemas import BigramPolicy, TokenLengthStats
from src.core.exceptions import InputError

logger = logging.getLogger(__name__)

URL_PATTERN = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
MENTION_PATTERN = re.compile(r"@\w+")
HASHTAG_TOKEN_PATTERN = re.compile(r"#\w+")
PUNCTUATION_PATTERN = re.compile(r"[^\w\s]")
WHITESPACE_PATTERN = re.compile(r"\s+")

MIN_TOPIC_TOKEN_LENGTH = 2


def clean_for_classification(text: str) -> str:
    """
    Remove URLs, then punctuation, then lowercase and collapse whitespace.

    Hashtag words survive: only the '#' mark is stripped as punctuation.
    """
    text = URL_PATTERN.sub(" ", text)
    text = PUNCTUATION_PATTERN.sub("", text)
    text = WHITESPACE_PATTERN.sub(" ", text.lower())
    return text.strip()


def lemmatize(token: str, lexicon: Lexicon) -> str:
    """
    Lemma of a lowercase token.

    Table lookup first, then suffix rules (ies->y, sses->ss, -ing/-ed strip
    keeping a stem of at least 3 characters, plural -s drop for tokens longer
    than 3), else the token itself.
    """
    lemma = lexicon.lemma_map.get(token)
    if lemma:
        return lemma
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith("sses"):
        return token[:-2]
    if token.endswith("ing") and len(token) - 3 >= 3:
        return token[:-3]
    if token.endswith("ed") and len(token) - 2 >= 3:
        return token[:-2]
    if token.endswith("s") and not token.endswith("ss") and len(token) > 3:
        return token[:-1]
    return token


def clean_for_topics(text: str, lexicon: Lexicon, source_id: str = "") -> TokenizedDoc:
    """
    Topic-modeling cleaner.

    Newlines, URLs, mentions and whole hashtag tokens are removed, punctuation
    stripped, text lowercased and whitespace-tokenized; stopwords and tokens
    shorter than 2 characters are dropped and the rest lemmatized.
    """
    text = WHITESPACE_PATTERN.sub(" ", text)
    text = URL_PATTERN.sub(" ", text)
    text = MENTION_PATTERN.sub(" ", text)
    text = HASHTAG_TOKEN_PATTERN.sub(" ", text)
    text = PUNCTUATION_PATTERN.sub("", text).lower()

    tokens: List[str] = []
    for token in text.split():
        if token in lexicon.stopwords or len(token) < MIN_TOPIC_TOKEN_LENGTH:
            continue
        lemma = lemmatize(token, lexicon)
        # lemmas may coincide with stopwords
        if lemma in lexicon.stopwords or len(lemma) < MIN_TOPIC_TOKEN_LENGTH:
            continue
        tokens.append(lemma)
    return TokenizedDoc(source_id=source_id, tokens=tuple(tokens))


def detect_bigrams(docs: Sequence[TokenizedDoc], policy: BigramPolicy) -> List[TokenizedDoc]:
    """
    Merge frequent adjacent token pairs into "a_b" tokens.

    A pair qualifies when count(a,b) >= min_count and
    (count(a,b) - min_count) * V / (count(a) * count(b)) >= score_threshold,
    V being the number of distinct tokens. Merging runs left to right
    without overlap.
    """
    unigrams: Counter = Counter()
    pairs: Counter = Counter()
    for doc in docs:
        unigrams.update(doc.tokens)
        pairs.update(zip(doc.tokens, doc.tokens[1:]))

    vocab_size = len(unigrams)
    accepted = {
        pair
        for pair, count in pairs.items()
        if count >= policy.min_count
        and (count - policy.min_count) * vocab_size / (unigrams[pair[0]] * unigrams[pair[1]])
        >= policy.score_threshold
    }
    if not accepted:
        return list(docs)

    merged_docs: List[TokenizedDoc] = []
    merges = 0
    for doc in docs:
        tokens = doc.tokens
        out: List[str] = []
        i = 0
        while i < len(tokens):
            if i + 1 < len(tokens) and (tokens[i], tokens[i + 1]) in accepted:
                out.append(f"{tokens[i]}_{tokens[i + 1]}")
                merges += 1
                i += 2
            else:
                out.append(tokens[i])
                i += 1
        merged_docs.append(TokenizedDoc(source_id=doc.source_id, tokens=tuple(out)))

    logger.debug(f"Bigram detection accepted {len(accepted)} pairs, {merges} merges")
    return merged_docs


def token_length_stats(docs: Sequence[Union[TokenizedDoc, int]]) -> TokenLengthStats:
    """
    Min, max, lower-middle median and mean of per-document token counts.

    Raises:
        InputError: no documents
    """
    if len(docs) == 0:
        raise InputError("Token length statistics need at least one document")
    lengths = np.sort(np.array([len(doc) if isinstance(doc, TokenizedDoc) else int(doc) for doc in docs]))
    return TokenLengthStats(
        min=int(lengths[0]),
        max=int(lengths[-1]),
        median=int(lengths[(len(lengths) - 1) // 2]),
        mean=float(lengths.mean()),
        n_docs=len(lengths),
    )


def load_lexicon(stopwords_path: Path, lemmas_path: Optional[Path] = None) -> Lexicon:
    """
    Read the stopword list (one token per line) and lemma table (surface<TAB>lemma).

    Raises:
        InputError: missing file or malformed lemma line
    """
    stopwords_path = Path(stopwords_path)
    if not stopwords_path.is_file():
        raise InputError(f"Stopword file not found: {stopwords_path}")
    stopwords = frozenset(
        line.strip().lower() for line in stopwords_path.read_text(encoding="utf-8").splitlines() if line.strip()
    )

    lemma_map: Dict[str, str] = {}
    if lemmas_path is not None:
        lemmas_path = Path(lemmas_path)
        if not lemmas_path.is_file():
            raise InputError(f"Lemma file not found: {lemmas_path}")
        for line_no, line in enumerate(lemmas_path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise InputError(f"{lemmas_path}:{line_no}: expected 'surface<TAB>lemma'")
            lemma_map[parts[0].strip().lower()] = parts[1].strip().lower()

    logger.info(f"Lexicon loaded: {len(stopwords)} stopwords, {len(lemma_map)} lemma entries")
    return Lexicon(stopwords=stopwords, lemma_map=lemma_map)


def topic_documents(tweets: Iterable[Tweet], lexicon: Lexicon, policy: BigramPolicy) -> List[TokenizedDoc]:
    """Topic-path cleaning followed by bigram detection for a batch of tweets."""
    docs = [clean_for_topics(tweet.text, lexicon, source_id=tweet.id) for tweet in tweets]
    return detect_bigrams(docs, policy)


def classification_texts(tweets: Iterable[Tweet]) -> Tuple[List[str], List[str]]:
    """Cleaned classification texts and their tweet ids."""
    ids, texts = [], []
    for tweet in tweets:
        ids.append(tweet.id)
        texts.append(clean_for_classification(tweet.text))
    return ids, texts
