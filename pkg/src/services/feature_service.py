"""N-gram vocabularies and BoW / TF-IDF / averaged-embedding document vectors."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.preprocessing import normalize

from src.core.domain.estimators import FEATURE_KINDS, EmbeddingTable, FeatureVector, Vocabulary
from src.core.exceptions import InputError

logger = logging.getLogger(__name__)

TOKEN_PATTERN = r"(?u)\S+"

PathLike = Union[str, Path]


def _vectorizer(ngram_max: int, min_df: int = 1, vocabulary: Optional[Dict[str, int]] = None) -> CountVectorizer:
    return CountVectorizer(
        token_pattern=TOKEN_PATTERN,
        lowercase=False,
        ngram_range=(1, ngram_max),
        min_df=min_df,
        vocabulary=vocabulary,
        dtype=np.float64,
    )


def build_vocab(docs: Sequence[str], min_df: int = 2, ngram_max: int = 2) -> Vocabulary:
    """
    Fit a unigram + adjacent-bigram vocabulary on cleaned documents.

    Terms with document frequency below min_df are dropped; indices follow
    lexicographic term order.

    Raises:
        InputError: no documents, or nothing left after filtering
    """
    if len(docs) == 0:
        raise InputError("Cannot build a vocabulary from zero documents")

    vectorizer = _vectorizer(ngram_max, min_df=min_df)
    try:
        counts = vectorizer.fit_transform(docs)
    except ValueError as e:
        raise InputError(f"Empty vocabulary after filtering with min_df={min_df}: {e}") from e

    df = np.asarray((counts > 0).sum(axis=0)).ravel().astype(np.int64)
    vocab = Vocabulary(
        terms=tuple(vectorizer.get_feature_names_out()),
        df=df,
        n_docs=len(docs),
        min_df=min_df,
        ngram_max=ngram_max,
    )
    logger.debug(f"Vocabulary of {len(vocab)} terms over {len(docs)} documents (min_df={min_df})")
    return vocab


def bow_matrix(docs: Sequence[str], vocab: Vocabulary) -> sparse.csr_matrix:
    """Raw in-vocabulary term counts, one row per document."""
    if len(vocab) == 0:
        return sparse.csr_matrix((len(docs), 0))
    vectorizer = _vectorizer(vocab.ngram_max, vocabulary=vocab.index)
    return sparse.csr_matrix(vectorizer.transform(docs))


def tfidf_matrix(docs: Sequence[str], vocab: Vocabulary) -> sparse.csr_matrix:
    """tf * idf with idf = ln((1+N)/(1+df)) + 1, rows L2-normalized."""
    counts = bow_matrix(docs, vocab)
    weighted = sparse.csr_matrix(counts.multiply(vocab.idf.reshape(1, -1)))
    return sparse.csr_matrix(normalize(weighted, norm="l2", copy=False))


def bow_vector(doc: str, vocab: Vocabulary) -> FeatureVector:
    return FeatureVector.from_sparse_row(bow_matrix([doc], vocab))


def tfidf_vector(doc: str, vocab: Vocabulary) -> FeatureVector:
    return FeatureVector.from_sparse_row(tfidf_matrix([doc], vocab))


def load_embeddings(path: PathLike) -> EmbeddingTable:
    """
    Read a text embedding file: a word followed by d reals on each line.

    Raises:
        InputError: missing or empty file, non-numeric values, or a line whose
            dimension differs from the first line's
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Embedding file not found: {path}")

    vectors: Dict[str, np.ndarray] = {}
    dimension: Optional[int] = None
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if dimension is None:
                if not values:
                    raise InputError(f"{path}:{line_no}: no vector values after '{word}'")
                dimension = len(values)
            elif len(values) != dimension:
                raise InputError(f"{path}:{line_no}: expected {dimension} values, got {len(values)}")
            try:
                vectors[word] = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise InputError(f"{path}:{line_no}: non-numeric vector value") from None

    if dimension is None:
        raise InputError(f"Embedding file {path} is empty")

    logger.info(f"Loaded {len(vectors)} embeddings of dimension {dimension} from {path}")
    return EmbeddingTable(dimension=dimension, vectors=vectors)


def embed_average(doc: str, table: EmbeddingTable) -> np.ndarray:
    """Unweighted mean of the in-table token vectors; zero vector when none."""
    found = [table.vectors[token] for token in doc.split() if token in table.vectors]
    if not found:
        return np.zeros(table.dimension)
    return np.mean(found, axis=0)


def embedding_matrix(docs: Sequence[str], table: EmbeddingTable) -> sparse.csr_matrix:
    dense = np.vstack([embed_average(doc, table) for doc in docs]) if docs else np.zeros((0, table.dimension))
    return sparse.csr_matrix(dense)


def featurize(
    docs: Sequence[str],
    kind: str,
    vocab: Optional[Vocabulary] = None,
    table: Optional[EmbeddingTable] = None,
) -> sparse.csr_matrix:
    """Vectorize a batch with an already fitted vocabulary or embedding table."""
    if kind == "embed":
        if table is None:
            raise InputError("Feature kind 'embed' needs an embedding table")
        return embedding_matrix(docs, table)
    if kind not in FEATURE_KINDS:
        raise InputError(f"Unknown feature kind '{kind}'")
    if vocab is None:
        raise InputError(f"Feature kind '{kind}' needs a vocabulary")
    return bow_matrix(docs, vocab) if kind == "bow" else tfidf_matrix(docs, vocab)


def save_vocabulary(vocab: Vocabulary, path: PathLike) -> Path:
    """Write `term<TAB>index<TAB>df` lines after a header with n_docs, min_df and ngram_max."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        handle.write(f"# n_docs={vocab.n_docs}\tmin_df={vocab.min_df}\tngram_max={vocab.ngram_max}\n")
        for index, (term, df) in enumerate(zip(vocab.terms, vocab.df)):
            handle.write(f"{term}\t{index}\t{int(df)}\n")
    return path


def load_vocabulary(path: PathLike) -> Vocabulary:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Vocabulary file not found: {path}")

    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# "):
        raise InputError(f"Vocabulary file {path} lacks its header line")
    header = dict(field.split("=", 1) for field in lines[0][2:].split("\t"))

    terms: List[str] = []
    df: List[int] = []
    for line_no, line in enumerate(lines[1:], start=2):
        term, index, freq = line.split("\t")
        if int(index) != len(terms):
            raise InputError(f"{path}:{line_no}: indices must be dense and ordered")
        terms.append(term)
        df.append(int(freq))

    return Vocabulary(
        terms=tuple(terms),
        df=np.array(df, dtype=np.int64),
        n_docs=int(header["n_docs"]),
        min_df=int(header["min_df"]),
        ngram_max=int(header.get("ngram_max", 2)),
    )


class Featurizer:
    """Fits feature state on training documents and vectorizes any documents."""

    def __init__(
        self,
        kind: str = "tfidf",
        min_df: int = 2,
        ngram_max: int = 2,
        embeddings: Optional[EmbeddingTable] = None,
    ):
        """
        Initialize featurizer.

        Args:
            kind: One of bow, tfidf, embed
            min_df: Minimum document frequency for n-gram terms
            ngram_max: 1 for unigrams only, 2 for unigrams + bigrams
            embeddings: Word vectors, required for the embed kind
        """
        if kind not in FEATURE_KINDS:
            raise InputError(f"Unknown feature kind '{kind}', expected one of {', '.join(FEATURE_KINDS)}")
        if kind == "embed" and embeddings is None:
            raise InputError("Feature kind 'embed' needs an embedding file")
        self.kind = kind
        self.min_df = min_df
        self.ngram_max = ngram_max
        self.embeddings = embeddings
        self.vocabulary: Optional[Vocabulary] = None

    def fit(self, docs: Sequence[str]) -> "Featurizer":
        if self.kind != "embed":
            self.vocabulary = build_vocab(docs, min_df=self.min_df, ngram_max=self.ngram_max)
        return self

    def transform(self, docs: Sequence[str]) -> sparse.csr_matrix:
        if self.kind != "embed" and self.vocabulary is None:
            raise RuntimeError("Featurizer must be fitted before transform")
        return featurize(docs, self.kind, vocab=self.vocabulary, table=self.embeddings)

    def fit_transform(self, docs: Sequence[str]) -> sparse.csr_matrix:
        return self.fit(docs).transform(docs)

    @property
    def dimension(self) -> int:
        if self.kind == "embed":
            return self.embeddings.dimension
        return len(self.vocabulary) if self.vocabulary is not None else 0
