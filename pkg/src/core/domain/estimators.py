"""Numeric containers: vocabularies, feature vectors and fitted models."""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from src.core.domain.models import Category

N_CATEGORIES = len(Category)
FEATURE_KINDS = ("bow", "tfidf", "embed")


@dataclass(frozen=True, eq=False)
class Vocabulary:
    """Unigram + bigram index fitted on a set of cleaned documents."""

    terms: Tuple[str, ...]
    df: np.ndarray
    n_docs: int
    min_df: int
    ngram_max: int = 2
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.terms) != len(self.df):
            raise ValueError("Vocabulary terms and document frequencies differ in length")
        if len(self.df) and (self.df.min() < self.min_df or self.df.max() > self.n_docs):
            raise ValueError("Document frequency outside [min_df, n_docs]")
        object.__setattr__(self, "index", {term: i for i, term in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: object) -> bool:
        return term in self.index

    @property
    def idf(self) -> np.ndarray:
        """Smoothed inverse document frequency ln((1+N)/(1+df)) + 1."""
        return np.log((1.0 + self.n_docs) / (1.0 + self.df)) + 1.0


@dataclass(frozen=True)
class FeatureVector:
    """Sparse document representation with strictly increasing indices."""

    indices: Tuple[int, ...]
    weights: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.weights):
            raise ValueError("Indices and weights differ in length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("Feature indices must be strictly increasing")
        if any(w == 0.0 for w in self.weights):
            raise ValueError("Zero weights are not stored")

    @classmethod
    def from_sparse_row(cls, row: sparse.spmatrix) -> "FeatureVector":
        row = sparse.csr_matrix(row)
        row.eliminate_zeros()
        row.sort_indices()
        return cls(
            indices=tuple(int(i) for i in row.indices),
            weights=tuple(float(w) for w in row.data),
        )

    @classmethod
    def from_dense(cls, values: Sequence[float]) -> "FeatureVector":
        return cls.from_sparse_row(sparse.csr_matrix(np.asarray(values, dtype=float).reshape(1, -1)))

    def pairs(self) -> List[Tuple[int, float]]:
        return list(zip(self.indices, self.weights))

    def __len__(self) -> int:
        return len(self.indices)


def stack_vectors(vectors: Sequence[FeatureVector], dimension: int) -> sparse.csr_matrix:
    """Stack feature vectors into an (n, dimension) CSR matrix."""
    indptr = [0]
    indices: List[int] = []
    data: List[float] = []
    for vector in vectors:
        if vector.indices and vector.indices[-1] >= dimension:
            raise ValueError(f"Feature index {vector.indices[-1]} outside dimension {dimension}")
        indices.extend(vector.indices)
        data.extend(vector.weights)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(vectors), dimension),
    )


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Pretrained word vectors of a fixed dimension."""

    dimension: int
    vectors: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        for word, vector in self.vectors.items():
            if vector.shape != (self.dimension,):
                raise ValueError(f"Vector for '{word}' has shape {vector.shape}, expected ({self.dimension},)")

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, word: object) -> bool:
        return word in self.vectors


@dataclass(frozen=True, eq=False)
class LinearModel:
    """One-vs-rest linear classifier over the five categories."""

    weights: np.ndarray
    bias: np.ndarray
    feature_kind: str
    vocabulary: Optional[Vocabulary] = None

    def __post_init__(self) -> None:
        if self.weights.ndim != 2 or self.weights.shape[0] != N_CATEGORIES:
            raise ValueError(f"Weight matrix must have {N_CATEGORIES} rows, got shape {self.weights.shape}")
        if self.bias.shape != (N_CATEGORIES,):
            raise ValueError(f"Bias must have length {N_CATEGORIES}")
        if self.feature_kind not in FEATURE_KINDS:
            raise ValueError(f"Unknown feature kind '{self.feature_kind}'")
        if self.vocabulary is not None and len(self.vocabulary) != self.dimension:
            raise ValueError("Weight matrix width does not match the vocabulary size")

    @property
    def dimension(self) -> int:
        return int(self.weights.shape[1])

    def decision_function(self, X: sparse.spmatrix) -> np.ndarray:
        """Scores w_c . x + b_c for every row of X, shape (n, 5)."""
        return np.asarray(X @ self.weights.T) + self.bias


@dataclass(frozen=True, eq=False)
class LdaModel:
    """Topic-word and document-topic estimates of a fitted Gibbs chain."""

    phi: np.ndarray
    theta: np.ndarray
    assignments: Tuple[np.ndarray, ...]
    vocabulary: Tuple[str, ...]
    alpha: np.ndarray
    beta: float
    n_topics: int
    iterations: int
    seed: int

    @property
    def n_docs(self) -> int:
        return int(self.theta.shape[0])

    def top_word_ids(self, topic: int, n: int) -> List[int]:
        """Word ids of topic by descending probability, ties by word."""
        row = self.phi[topic]
        order = sorted(range(len(row)), key=lambda w: (-row[w], self.vocabulary[w]))
        return order[:n]


@dataclass(frozen=True, eq=False)
class TopicCluster:
    """Merged topic whose word probabilities average its member topics."""

    members: Tuple[int, ...]
    distribution: np.ndarray
    vocabulary: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("A topic cluster needs at least one member topic")
        if abs(float(self.distribution.sum()) - 1.0) > 1e-9:
            raise ValueError("Merged topic distribution does not sum to 1")

    @property
    def size(self) -> int:
        return len(self.members)
