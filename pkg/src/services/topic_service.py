"""Collapsed Gibbs LDA, UMass coherence, topic-count selection and topic merging."""

import logging
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.cluster.hierarchy import cut_tree, linkage
from scipy.special import digamma

from src.core.config.settings import TopicSettings
from src.core.domain.estimators import LdaModel, TopicCluster
from src.core.domain.models import Category, Corpus, Lexicon, Stage, TokenizedDoc
from src.core.domain.schemas import (
    BigramPolicy,
    ClusterResult,
    LdaConfig,
    TopicCellResult,
    TopicPipelineResult,
)
from src.core.exceptions import ConfigError, InputError, ModelError
from src.services.corpus_service import tweets_in_stage
from src.services.preprocess_service import topic_documents

logger = logging.getLogger(__name__)

MINKA_ITERATIONS = 5
MIN_ALPHA = 1e-8


class GibbsState:
    """Live count tables of a running chain, handed to iteration callbacks."""

    def __init__(self, doc_topic: np.ndarray, word_topic: np.ndarray, topic_totals: np.ndarray, doc_lengths: np.ndarray):
        self.doc_topic = doc_topic
        self.word_topic = word_topic
        self.topic_totals = topic_totals
        self.doc_lengths = doc_lengths
        self.alpha: Optional[np.ndarray] = None


IterationCallback = Callable[[int, GibbsState], None]


def minka_alpha_update(doc_topic: np.ndarray, alpha: np.ndarray, iterations: int = MINKA_ITERATIONS) -> np.ndarray:
    """
    Fixed-point re-estimation of an asymmetric Dirichlet prior from doc-topic counts.

    alpha_k <- alpha_k * sum_d[psi(n_dk + alpha_k) - psi(alpha_k)] / sum_d[psi(n_d + alpha0) - psi(alpha0)]
    """
    alpha = np.asarray(alpha, dtype=float).copy()
    lengths = doc_topic.sum(axis=1)
    for _ in range(iterations):
        alpha0 = alpha.sum()
        denominator = np.sum(digamma(lengths + alpha0) - digamma(alpha0))
        if denominator <= 0:
            break
        numerator = np.sum(digamma(doc_topic + alpha) - digamma(alpha), axis=0)
        alpha = np.maximum(alpha * numerator / denominator, MIN_ALPHA)
    return alpha


def fit_lda_gibbs(
    docs: Sequence[TokenizedDoc],
    cfg: LdaConfig,
    on_iteration: Optional[IterationCallback] = None,
) -> LdaModel:
    """
    Fit LDA by collapsed Gibbs sampling.

    Args:
        docs: Tokenized documents; the vocabulary is their sorted distinct tokens
        cfg: Topic count, priors, schedule and seed
        on_iteration: Called as on_iteration(it, state) after every full pass

    Returns:
        LdaModel estimated from the final sample

    Raises:
        ModelError: fewer than two non-empty documents or an empty vocabulary
    """
    vocabulary = tuple(sorted({token for doc in docs for token in doc.tokens}))
    if not vocabulary:
        raise ModelError("Cannot fit LDA on an empty vocabulary")
    if sum(1 for doc in docs if len(doc) > 0) < 2:
        raise ModelError("LDA needs at least two non-empty documents")

    K, V, D = cfg.n_topics, len(vocabulary), len(docs)
    word_index = {word: i for i, word in enumerate(vocabulary)}
    words = [word_index[token] for doc in docs for token in doc.tokens]
    doc_of = [d for d, doc in enumerate(docs) for _ in doc.tokens]
    doc_lengths = np.array([len(doc) for doc in docs], dtype=np.int64)
    n_tokens = len(words)

    rng = np.random.default_rng(cfg.seed)
    topics = rng.integers(K, size=n_tokens).tolist()

    doc_topic = np.zeros((D, K), dtype=np.int64)
    word_topic = np.zeros((V, K), dtype=np.int64)
    topic_totals = np.zeros(K, dtype=np.int64)
    for w, d, k in zip(words, doc_of, topics):
        doc_topic[d, k] += 1
        word_topic[w, k] += 1
        topic_totals[k] += 1

    alpha = np.full(K, cfg.resolved_alpha)
    beta = cfg.resolved_beta
    v_beta = V * beta
    state = GibbsState(doc_topic, word_topic, topic_totals, doc_lengths)
    last = K - 1

    for it in range(1, cfg.iterations + 1):
        uniforms = rng.random(n_tokens)
        for i in range(n_tokens):
            w, d, k = words[i], doc_of[i], topics[i]
            doc_row = doc_topic[d]
            word_row = word_topic[w]
            doc_row[k] -= 1
            word_row[k] -= 1
            topic_totals[k] -= 1

            weights = (doc_row + alpha) * (word_row + beta) / (topic_totals + v_beta)
            cumulative = np.cumsum(weights)
            k = int(np.searchsorted(cumulative, uniforms[i] * cumulative[-1], side="right"))
            if k > last:
                k = last

            topics[i] = k
            doc_row[k] += 1
            word_row[k] += 1
            topic_totals[k] += 1

        if cfg.optimize_interval and it > cfg.burn_in and it % cfg.optimize_interval == 0:
            alpha = minka_alpha_update(doc_topic, alpha)
            logger.debug(f"Iteration {it}: alpha re-estimated, sum={alpha.sum():.4f}")

        if on_iteration is not None:
            state.alpha = alpha
            on_iteration(it, state)

    phi = (word_topic.T + beta) / (topic_totals[:, None] + v_beta)
    theta = (doc_topic + alpha) / (doc_lengths[:, None] + alpha.sum())

    assignments = []
    offset = 0
    for length in doc_lengths:
        assignments.append(np.array(topics[offset : offset + length], dtype=np.int64))
        offset += length

    return LdaModel(
        phi=phi,
        theta=theta,
        assignments=tuple(assignments),
        vocabulary=vocabulary,
        alpha=alpha,
        beta=beta,
        n_topics=K,
        iterations=cfg.iterations,
        seed=cfg.seed,
    )


def _doc_word_incidence(docs: Sequence[TokenizedDoc], vocabulary: Sequence[str]) -> sparse.csc_matrix:
    index = {word: i for i, word in enumerate(vocabulary)}
    rows, cols = [], []
    for d, doc in enumerate(docs):
        for w in {index[token] for token in doc.tokens if token in index}:
            rows.append(d)
            cols.append(w)
    data = np.ones(len(rows), dtype=np.int64)
    return sparse.csc_matrix((data, (rows, cols)), shape=(len(docs), len(vocabulary)))


def coherence_umass(model: LdaModel, docs: Sequence[TokenizedDoc], top_n: int = 10) -> Tuple[List[float], float]:
    """
    UMass coherence per topic and its mean.

    For the topic's top_n words w_1..w_n by descending probability, sums
    ln((D(w_i, w_j) + 1) / D(w_j)) over i < j, D counting documents.
    Words absent from every document are skipped.
    """
    incidence = _doc_word_incidence(docs, model.vocabulary)
    doc_freq = np.asarray(incidence.sum(axis=0)).ravel()

    scores: List[float] = []
    for topic in range(model.n_topics):
        top = model.top_word_ids(topic, top_n)
        kept = [w for w in top if doc_freq[w] > 0]
        if len(kept) < len(top):
            dropped = [model.vocabulary[w] for w in top if doc_freq[w] == 0]
            logger.warning(f"Topic {topic}: excluded zero-frequency words from coherence: {dropped}")

        columns = incidence[:, kept]
        co_doc = (columns.T @ columns).toarray()
        score = 0.0
        for i in range(len(kept)):
            for j in range(i + 1, len(kept)):
                score += np.log((co_doc[i, j] + 1.0) / doc_freq[kept[j]])
        scores.append(float(score))

    return scores, float(np.mean(scores))


def _fit_and_score(docs: Sequence[TokenizedDoc], cfg: LdaConfig, top_n: int) -> Tuple[LdaModel, float]:
    model = fit_lda_gibbs(docs, cfg)
    _, mean = coherence_umass(model, docs, top_n)
    return model, mean


def select_k(
    docs: Sequence[TokenizedDoc],
    ks: Sequence[int] = (5, 10, 15, 20, 25),
    template: Optional[LdaConfig] = None,
    top_n: int = 10,
    n_jobs: int = 1,
) -> Tuple[int, Dict[int, float], Dict[int, LdaModel]]:
    """
    Fit one model per topic count and keep the most coherent.

    Args:
        docs: Tokenized documents
        ks: Candidate topic counts
        template: Schedule, priors and seed shared by every candidate
        top_n: Words per topic scored by coherence
        n_jobs: Worker processes; 1 fits sequentially

    Returns:
        Best K (ties to the smaller K), mean coherence per K, fitted model per K
    """
    if not ks:
        raise InputError("select_k needs at least one candidate topic count")
    template = template or LdaConfig(n_topics=min(ks))
    configs = [template.model_copy(update={"n_topics": k}) for k in ks]

    if n_jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as executor:
            fitted = list(executor.map(_fit_and_score, repeat(docs), configs, repeat(top_n)))
    else:
        fitted = [_fit_and_score(docs, cfg, top_n) for cfg in configs]

    scores = {k: score for k, (_, score) in zip(ks, fitted)}
    models = {k: model for k, (model, _) in zip(ks, fitted)}
    best_k = min(ks, key=lambda k: (-scores[k], k))
    logger.info(f"Coherence by K: {', '.join(f'{k}={s:.4f}' for k, s in sorted(scores.items()))}; selected K={best_k}")
    return best_k, dict(sorted(scores.items())), models


def _average_cosine_labels(phi: np.ndarray, target: int) -> np.ndarray:
    tree = linkage(phi, method="average", metric="cosine")
    return cut_tree(tree, n_clusters=[target]).ravel()


MERGE_STRATEGIES: Dict[str, Callable[[np.ndarray, int], np.ndarray]] = {
    "average-cosine": _average_cosine_labels,
}


def cluster_topics(model: LdaModel, target: int = 5, merge: str = "average-cosine") -> List[TopicCluster]:
    """
    Merge closely related topics into exactly `target` clusters.

    Each cluster's distribution is the per-word mean of its member rows of phi.
    Clusters are ordered by their smallest member topic.

    Raises:
        ModelError: fewer topics than target
        ConfigError: unknown merge strategy
    """
    K = model.n_topics
    if target < 1 or K < target:
        raise ModelError(f"Cannot merge {K} topics into {target} clusters")
    if merge not in MERGE_STRATEGIES:
        raise ConfigError(f"Unknown merge strategy '{merge}', expected one of {', '.join(MERGE_STRATEGIES)}")

    if target == K:
        labels = np.arange(K)
    else:
        labels = MERGE_STRATEGIES[merge](model.phi, target)

    groups: Dict[int, List[int]] = {}
    for topic, label in enumerate(labels):
        groups.setdefault(int(label), []).append(topic)

    clusters = [
        TopicCluster(
            members=tuple(members),
            distribution=model.phi[members].mean(axis=0),
            vocabulary=model.vocabulary,
        )
        for members in sorted(groups.values(), key=min)
    ]
    logger.debug(f"Merged {K} topics into {[c.members for c in clusters]}")
    return clusters


def top_words(cluster: TopicCluster, n: int = 10) -> List[Tuple[str, float]]:
    """The n most probable words with their probabilities; ties in word order."""
    if n > len(cluster.vocabulary):
        raise InputError(f"Asked for {n} words from a vocabulary of {len(cluster.vocabulary)}")
    ranked = sorted(
        zip(cluster.vocabulary, cluster.distribution.tolist()),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return ranked[:n]


def dominant_topic_counts(model: LdaModel) -> List[int]:
    """Number of documents whose most probable topic is k, for every k."""
    dominant = np.argmax(model.theta, axis=1)
    return np.bincount(dominant, minlength=model.n_topics).tolist()


class TopicService:
    """Runs topic analysis over every (racist category, stage) cell."""

    def __init__(
        self,
        lexicon: Lexicon,
        bigram_policy: BigramPolicy,
        topic_settings: Optional[TopicSettings] = None,
        seed: int = 0,
        n_jobs: int = 1,
        merge: str = "average-cosine",
    ):
        """
        Initialize topic service.

        Args:
            lexicon: Stopwords and lemma table for topic-path cleaning
            bigram_policy: Phrase merging thresholds
            topic_settings: Candidate Ks, sampler schedule, cluster and word counts
            seed: Seed shared by every sampler chain
            n_jobs: Worker processes for the per-K fits
            merge: Topic merge strategy name
        """
        self.lexicon = lexicon
        self.bigram_policy = bigram_policy
        self.settings = topic_settings or TopicSettings()
        self.seed = seed
        self.n_jobs = n_jobs
        self.merge = merge

        too_small = [k for k in self.settings.ks if k < self.settings.target_clusters]
        if too_small:
            raise ConfigError(f"Candidate topic counts {too_small} are below target_clusters={self.settings.target_clusters}")

    def lda_template(self) -> LdaConfig:
        s = self.settings
        return LdaConfig(
            n_topics=max(s.ks),
            iterations=s.iterations,
            burn_in=s.burn_in,
            optimize_interval=s.optimize_interval,
            seed=self.seed,
        )

    def analyze_cell(self, category: Category, stage: Stage, docs: Sequence[TokenizedDoc]) -> TopicCellResult:
        """Select K, fit, merge to the target cluster count and extract keywords for one cell."""
        s = self.settings
        docs = [doc for doc in docs if len(doc) > 0]
        vocabulary_size = len({token for doc in docs for token in doc.tokens})

        reason = None
        if len(docs) < s.min_cell_docs:
            reason = f"{len(docs)} non-empty documents, need {s.min_cell_docs}"
        elif vocabulary_size < s.top_words:
            reason = f"vocabulary of {vocabulary_size} words, need {s.top_words}"
        if reason is not None:
            logger.warning(f"Topic cell {category.display_name}/{stage.value} insufficient: {reason}")
            return TopicCellResult(
                category=category,
                stage=stage,
                status="insufficient",
                n_docs=len(docs),
                vocabulary_size=vocabulary_size,
                reason=reason,
            )

        best_k, coherence, models = select_k(
            docs, s.ks, template=self.lda_template(), top_n=s.coherence_top_n, n_jobs=self.n_jobs
        )
        model = models[best_k]
        clusters = []
        for cluster in cluster_topics(model, target=s.target_clusters, merge=self.merge):
            ranked = top_words(cluster, s.top_words)
            clusters.append(
                ClusterResult(
                    members=list(cluster.members),
                    top_words=[word for word, _ in ranked],
                    probabilities=[p for _, p in ranked],
                )
            )

        logger.info(f"Topic cell {category.display_name}/{stage.value}: {len(docs)} docs, K={best_k}")
        return TopicCellResult(
            category=category,
            stage=stage,
            status="ok",
            n_docs=len(docs),
            vocabulary_size=vocabulary_size,
            k=best_k,
            coherence_by_k=coherence,
            clusters=clusters,
            dominant_topic_counts=dominant_topic_counts(model),
        )

    def cell_documents(
        self, corpus: Corpus, predictions: Mapping[str, Category]
    ) -> Dict[Tuple[Category, Stage], List[TokenizedDoc]]:
        """Topic-path documents of every (racist category, stage) cell."""
        missing = sum(1 for tweet in corpus if tweet.id not in predictions)
        if missing:
            logger.warning(f"{missing} tweets have no prediction and are left out of topic cells")

        cells = {}
        for stage in Stage:
            staged = tweets_in_stage(corpus, stage)
            for category in Category.racist():
                tweets = [tweet for tweet in staged if predictions.get(tweet.id) == category]
                cells[(category, stage)] = topic_documents(tweets, self.lexicon, self.bigram_policy)
        return cells

    def run_topic_pipeline(self, corpus: Corpus, predictions: Mapping[str, Category]) -> TopicPipelineResult:
        """
        Topic clusters for the four racist categories in each of the three stages.

        Cells without enough documents become "insufficient" placeholders.
        """
        cells = self.cell_documents(corpus, predictions)
        results = [
            self.analyze_cell(category, stage, cells[(category, stage)])
            for category in Category.racist()
            for stage in Stage
        ]
        ok = sum(1 for cell in results if cell.status == "ok")
        logger.info(f"Topic pipeline finished: {ok} of {len(results)} cells analyzed")
        return TopicPipelineResult(cells=results)
