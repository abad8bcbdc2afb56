"""Tests for Gibbs LDA, UMass coherence, K selection, topic merging and the topic pipeline."""

import logging
from collections import Counter
from itertools import permutations

import numpy as np
import pytest

from src.core.config.settings import TopicSettings
from src.core.domain.estimators import LdaModel
from src.core.domain.models import Category, Lexicon, Stage, TokenizedDoc
from src.core.domain.schemas import BigramPolicy, LdaConfig
from src.core.exceptions import ConfigError, InputError, ModelError
from src.services.topic_service import (
    TopicService,
    cluster_topics,
    coherence_umass,
    dominant_topic_counts,
    fit_lda_gibbs,
    minka_alpha_update,
    select_k,
    top_words,
)


def _model(phi, vocabulary, theta=None) -> LdaModel:
    phi = np.asarray(phi, dtype=float)
    theta = np.full((1, phi.shape[0]), 1.0 / phi.shape[0]) if theta is None else np.asarray(theta, dtype=float)
    return LdaModel(
        phi=phi,
        theta=theta,
        assignments=(),
        vocabulary=tuple(vocabulary),
        alpha=np.full(phi.shape[0], 0.1),
        beta=0.1,
        n_topics=phi.shape[0],
        iterations=1,
        seed=0,
    )


def _docs(*token_lists):
    return [TokenizedDoc(f"d{i}", tuple(tokens)) for i, tokens in enumerate(token_lists)]


def _check_conservation(state, docs):
    assert state.doc_topic.sum(axis=1).tolist() == [len(doc) for doc in docs]
    assert state.word_topic.sum(axis=0).tolist() == state.topic_totals.tolist()
    assert state.doc_topic.sum(axis=0).tolist() == state.topic_totals.tolist()
    assert (state.doc_topic >= 0).all() and (state.word_topic >= 0).all()


def _best_overlap(model: LdaModel, topics, n: int) -> list:
    """Per planted topic overlap with its best-matching fitted topic, over all matchings."""
    fitted = [{model.vocabulary[w] for w in model.top_word_ids(k, n)} for k in range(model.n_topics)]
    best = None
    for perm in permutations(range(model.n_topics), len(topics)):
        overlaps = [len(fitted[k] & set(words)) for k, words in zip(perm, topics)]
        if best is None or sum(overlaps) > sum(best):
            best = overlaps
    return best


def test_two_topic_recovery(planted_docs):
    """Test that each fitted topic puts nearly all mass on one planted word pair."""
    docs, topics = planted_docs(n_topics=2, words_per_topic=2, n_docs=200, doc_length=20, seed=0)
    model = fit_lda_gibbs(docs, LdaConfig(n_topics=2, iterations=60, burn_in=20, seed=1))

    index = {word: i for i, word in enumerate(model.vocabulary)}
    for row in model.phi:
        masses = [sum(row[index[w]] for w in words) for words in topics]
        assert max(masses) >= 0.9
    assert np.allclose(model.phi.sum(axis=1), 1.0)
    assert np.allclose(model.theta.sum(axis=1), 1.0)


def test_counts_are_conserved_every_iteration(planted_docs):
    """Test the Gibbs count tables after every sweep."""
    docs, _ = planted_docs(n_topics=3, words_per_topic=4, n_docs=30, doc_length=8, seed=2)
    seen = []

    def check(it, state):
        _check_conservation(state, docs)
        assert (state.alpha > 0).all()
        seen.append(it)

    fit_lda_gibbs(docs, LdaConfig(n_topics=3, iterations=12, burn_in=2, optimize_interval=2), on_iteration=check)

    assert seen == list(range(1, 13))


@pytest.mark.slow
def test_planted_recovery_long_chain(planted_docs):
    """Test 1000-sweep recovery of two 10-word topics and conservation along the way."""
    docs, topics = planted_docs(n_topics=2, words_per_topic=10, n_docs=200, doc_length=20, seed=3)
    checked = []

    def check(it, state):
        if it in (1, 100, 1000):
            _check_conservation(state, docs)
            checked.append(it)

    model = fit_lda_gibbs(docs, LdaConfig(n_topics=2, iterations=1000, seed=3), on_iteration=check)

    assert checked == [1, 100, 1000]
    assert all(overlap >= 9 for overlap in _best_overlap(model, topics, 10))


def test_single_topic_is_smoothed_unigram():
    """Test that K=1 reproduces beta-smoothed word frequencies."""
    docs = _docs(["a", "b", "a"], ["c", "a"], ["b"])
    model = fit_lda_gibbs(docs, LdaConfig(n_topics=1, iterations=3, burn_in=0, optimize_interval=0, beta=0.5))
    counts = Counter(token for doc in docs for token in doc.tokens)
    expected = [(counts[w] + 0.5) / (6 + 3 * 0.5) for w in ("a", "b", "c")]

    assert model.vocabulary == ("a", "b", "c")
    assert model.phi[0].tolist() == pytest.approx(expected)
    assert model.theta[:, 0].tolist() == pytest.approx([1.0, 1.0, 1.0])


def test_same_seed_same_assignments(planted_docs):
    """Test chain determinism."""
    docs, _ = planted_docs(n_topics=2, n_docs=20, doc_length=10, seed=4)
    cfg = LdaConfig(n_topics=3, iterations=10, burn_in=0, optimize_interval=5, seed=9)
    first, second = fit_lda_gibbs(docs, cfg), fit_lda_gibbs(docs, cfg)

    assert all(np.array_equal(a, b) for a, b in zip(first.assignments, second.assignments))
    assert np.array_equal(first.alpha, second.alpha)
    assert [len(a) for a in first.assignments] == [len(doc) for doc in docs]


def test_prior_optimization_switch(planted_docs):
    """Test asymmetric re-estimation when enabled and a fixed symmetric prior otherwise."""
    docs, _ = planted_docs(n_topics=2, n_docs=40, doc_length=10, seed=5)

    fixed = fit_lda_gibbs(docs, LdaConfig(n_topics=4, iterations=10, burn_in=0, optimize_interval=50))
    assert fixed.alpha.tolist() == [0.25] * 4
    off = fit_lda_gibbs(docs, LdaConfig(n_topics=4, iterations=10, burn_in=0, optimize_interval=0))
    assert off.alpha.tolist() == [0.25] * 4

    tuned = fit_lda_gibbs(docs, LdaConfig(n_topics=4, iterations=10, burn_in=0, optimize_interval=2))
    assert (tuned.alpha > 0).all()
    assert tuned.alpha.tolist() != [0.25] * 4


def test_minka_update_stays_positive():
    """Test the fixed-point update on random and degenerate count tables."""
    rng = np.random.default_rng(0)
    counts = rng.integers(0, 15, size=(30, 5))
    counts[:, 4] = 0

    alpha = minka_alpha_update(counts, np.full(5, 0.2))
    assert (alpha >= 1e-8).all()
    assert alpha[4] < alpha[:4].min()

    unchanged = minka_alpha_update(np.zeros((3, 2), dtype=np.int64), np.array([0.5, 0.5]))
    assert unchanged.tolist() == [0.5, 0.5]


def test_fit_errors():
    """Test corpora LDA cannot be fitted on."""
    with pytest.raises(ModelError):
        fit_lda_gibbs(_docs([], []), LdaConfig(n_topics=2))
    with pytest.raises(ModelError):
        fit_lda_gibbs(_docs(["a", "b"], []), LdaConfig(n_topics=2))


def test_coherence_bounds():
    """Test always and never co-occurring word pairs."""
    model = _model([[0.6, 0.4]], ("a", "b"))

    scores, mean = coherence_umass(model, _docs(*[["a", "b"]] * 5), top_n=2)
    assert scores == pytest.approx([np.log(6 / 5)])
    assert mean == pytest.approx(np.log(6 / 5))

    scores, _ = coherence_umass(model, _docs(*([["a"]] * 3 + [["b"]] * 4)), top_n=2)
    assert scores == pytest.approx([np.log(1 / 4)])


def test_coherence_skips_unseen_words(caplog):
    """Test that a top word missing from every document is left out and logged."""
    model = _model([[0.5, 0.3, 0.2]], ("a", "b", "z"))
    with caplog.at_level(logging.WARNING):
        scores, _ = coherence_umass(model, _docs(["a", "b"], ["b"]), top_n=3)

    assert scores == pytest.approx([np.log(2 / 2)])
    assert "z" in caplog.text


def test_coherence_prefers_planted_topic_count(planted_docs):
    """Test that the planted K scores above an under-split model."""
    docs, _ = planted_docs(n_topics=2, words_per_topic=10, n_docs=100, doc_length=20, seed=6)
    template = LdaConfig(n_topics=2, iterations=40, burn_in=10, seed=2)

    planted = fit_lda_gibbs(docs, template)
    merged = fit_lda_gibbs(docs, template.model_copy(update={"n_topics": 1}))

    assert coherence_umass(planted, docs, 10)[1] > coherence_umass(merged, docs, 10)[1]


def test_select_k(planted_docs):
    """Test single-candidate selection and preference for the planted count."""
    docs, _ = planted_docs(n_topics=2, words_per_topic=10, n_docs=100, doc_length=20, seed=7)
    template = LdaConfig(n_topics=2, iterations=40, burn_in=10, seed=2)

    best, scores, models = select_k(docs, [2], template=template)
    assert best == 2 and list(scores) == [2] and models[2].n_topics == 2

    best, scores, _ = select_k(docs, [2, 1], template=template)
    assert best == 2
    assert list(scores) == [1, 2]

    with pytest.raises(InputError):
        select_k(docs, [])


def test_two_planted_topics_beat_eight(planted_docs):
    """Test that K=2 is more coherent than K=8 on a two-topic corpus."""
    docs, _ = planted_docs(n_topics=2, words_per_topic=10, n_docs=100, doc_length=20, seed=3)
    template = LdaConfig(n_topics=2, iterations=100, burn_in=20, optimize_interval=10, seed=0)

    two = coherence_umass(fit_lda_gibbs(docs, template), docs, 10)[1]
    eight = coherence_umass(fit_lda_gibbs(docs, template.model_copy(update={"n_topics": 8})), docs, 10)[1]

    assert two > eight


@pytest.mark.slow
def test_select_k_recovers_five_planted_topics(planted_docs):
    """Test that the default candidate counts pick 5 on a five-topic corpus for most seeds."""
    picks = []
    for seed in range(5):
        docs, _ = planted_docs(n_topics=5, words_per_topic=10, n_docs=100, doc_length=20, seed=seed)
        template = LdaConfig(n_topics=5, iterations=150, burn_in=50, optimize_interval=10, seed=seed)
        best, _, _ = select_k(docs, [5, 10, 15, 20, 25], template=template)
        picks.append(best)

    assert picks.count(5) >= 4, picks


@pytest.mark.slow
def test_select_k_in_worker_processes(planted_docs):
    """Test that parallel fits give the same scores as sequential ones."""
    docs, _ = planted_docs(n_topics=2, words_per_topic=6, n_docs=40, doc_length=10, seed=8)
    template = LdaConfig(n_topics=2, iterations=20, burn_in=5, seed=1)

    assert select_k(docs, [1, 2, 3], template=template, n_jobs=2)[1] == select_k(docs, [1, 2, 3], template=template)[1]


def test_cluster_identity():
    """Test that target == K keeps every topic as its own cluster."""
    phi = [[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.2, 0.2, 0.6]]
    clusters = cluster_topics(_model(phi, "abc"), target=3)

    assert [c.members for c in clusters] == [(0,), (1,), (2,)]
    for cluster, row in zip(clusters, phi):
        assert cluster.distribution.tolist() == row


def test_cluster_identical_rows():
    """Test that identical topics merge into exactly that distribution."""
    phi = [[0.5, 0.25, 0.25], [0.1, 0.1, 0.8], [0.5, 0.25, 0.25]]
    clusters = cluster_topics(_model(phi, "abc"), target=2)

    assert [c.members for c in clusters] == [(0, 2), (1,)]
    assert clusters[0].distribution.tolist() == phi[0]


def test_cluster_four_into_two_matches_brute_force():
    """Test the merge against exhaustive pairing by cosine distance."""
    phi = np.array(
        [
            [0.60, 0.30, 0.05, 0.05],
            [0.05, 0.05, 0.50, 0.40],
            [0.55, 0.35, 0.05, 0.05],
            [0.05, 0.10, 0.45, 0.40],
        ]
    )

    def cosine_distance(i, j):
        return 1.0 - phi[i] @ phi[j] / (np.linalg.norm(phi[i]) * np.linalg.norm(phi[j]))

    pairings = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))]
    best = min(pairings, key=lambda p: cosine_distance(*p[0]) + cosine_distance(*p[1]))
    clusters = cluster_topics(_model(phi, "abcd"), target=2)

    assert [c.members for c in clusters] == list(best)
    for cluster in clusters:
        expected = phi[list(cluster.members)].mean(axis=0)
        assert np.abs(cluster.distribution - expected).max() < 1e-12
        assert cluster.distribution.sum() == pytest.approx(1.0)


def test_cluster_errors():
    """Test too few topics and an unknown strategy."""
    model = _model([[0.5, 0.5], [0.9, 0.1]], "ab")
    with pytest.raises(ModelError):
        cluster_topics(model, target=3)
    with pytest.raises(ConfigError):
        cluster_topics(model, target=1, merge="ward")


def test_top_words():
    """Test ranking, lexicographic ties and length."""
    uniform = cluster_topics(_model([[0.25] * 4], ("d", "b", "a", "c")), target=1)[0]
    assert [w for w, _ in top_words(uniform, 3)] == ["a", "b", "c"]

    point = cluster_topics(_model([[0.0, 0.0, 1.0, 0.0]], ("d", "b", "a", "c")), target=1)[0]
    ranked = top_words(point, 4)
    assert ranked[0] == ("a", 1.0)
    assert len(ranked) == 4

    with pytest.raises(InputError):
        top_words(point, 5)


def test_dominant_topic_counts():
    """Test per-topic counts of documents' most probable topics."""
    theta = [[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.6, 0.3, 0.1]]
    assert dominant_topic_counts(_model(np.full((3, 2), 0.5), "ab", theta=theta)) == [2, 1, 0]


def _small_settings(**overrides) -> TopicSettings:
    values = dict(ks=[5], iterations=25, burn_in=5, optimize_interval=5, min_cell_docs=50)
    values.update(overrides)
    return TopicSettings(**values)


def test_topic_pipeline_fills_every_cell(topic_corpus):
    """Test twelve analyzed cells with five clusters of ten keywords drawn from the cell itself."""
    corpus, labels = topic_corpus(Category.racist(), ["S1", "S2", "S3"], docs_per_cell=60)
    service = TopicService(Lexicon(), BigramPolicy(), _small_settings(), seed=3)

    result = service.run_topic_pipeline(corpus, labels)

    assert len(result.cells) == 12
    assert [(c.category, c.stage) for c in result.cells[:3]] == [
        (Category.racist()[0], Stage.S1),
        (Category.racist()[0], Stage.S2),
        (Category.racist()[0], Stage.S3),
    ]
    for cell in result.cells:
        assert cell.status == "ok"
        assert cell.k == 5 and cell.n_docs == 60
        assert len(cell.clusters) == 5
        prefix = f"k{int(cell.category)}{cell.stage.value.lower()}"
        for cluster in cell.clusters:
            assert len(cluster.top_words) == 10
            assert all(word.startswith(prefix) for word in cluster.top_words)
            assert cluster.probabilities == sorted(cluster.probabilities, reverse=True)


def test_topic_pipeline_marks_empty_cells(topic_corpus):
    """Test that a corpus with only early Blame tweets leaves eleven cells insufficient."""
    corpus, labels = topic_corpus([Category.BLAME], ["S1"], docs_per_cell=60)
    result = TopicService(Lexicon(), BigramPolicy(), _small_settings()).run_topic_pipeline(corpus, labels)

    insufficient = [cell for cell in result.cells if cell.status == "insufficient"]
    assert len(insufficient) == 11
    assert result.cell(Category.BLAME, Stage.S1).status == "ok"
    assert all(cell.n_docs == 0 and cell.clusters == [] for cell in insufficient)


def test_analyze_cell_small_vocabulary():
    """Test a cell with enough documents but too few distinct words."""
    docs = _docs(*[["aa", "bb", "cc"]] * 60)
    service = TopicService(Lexicon(), BigramPolicy(), _small_settings())
    cell = service.analyze_cell(Category.BLAME, Stage.S2, docs)

    assert cell.status == "insufficient"
    assert cell.vocabulary_size == 3
    assert "vocabulary" in cell.reason


def test_topic_service_rejects_small_candidates():
    """Test candidate topic counts below the cluster target."""
    with pytest.raises(ConfigError):
        TopicService(Lexicon(), BigramPolicy(), _small_settings(ks=[3, 5]))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
