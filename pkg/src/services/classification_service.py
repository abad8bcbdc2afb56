"""One-vs-rest linear SVM trained with Pegasos, plus cross-validation and grid search."""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from sklearn.metrics import accuracy_score, confusion_matrix, f1_score, precision_recall_fscore_support
from sklearn.model_selection import StratifiedKFold

from src.core.domain.estimators import (
    N_CATEGORIES,
    EmbeddingTable,
    FeatureVector,
    LinearModel,
    Vocabulary,
    stack_vectors,
)
from src.core.domain.models import Category, Corpus
from src.core.domain.schemas import (
    CVReport,
    EvaluationResult,
    GridSearchResult,
    ModelComparisonRow,
    PredictionImport,
    TrainConfig,
)
from src.core.exceptions import InputError, ModelError
from src.services.corpus_service import read_label_csv
from src.services.feature_service import Featurizer

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
MODEL_FORMAT_VERSION = 1
CATEGORY_CODES = list(range(N_CATEGORIES))
FEATURE_LABELS = {"bow": "BoW", "tfidf": "TF-IDF", "embed": "Embeddings"}

# below this the scaled representation is folded back into the weights
_MIN_SCALE = 1e-9


def _as_matrix(X: Union[sparse.spmatrix, Sequence[FeatureVector]], dimension: Optional[int] = None) -> sparse.csr_matrix:
    if sparse.issparse(X):
        matrix = sparse.csr_matrix(X, dtype=np.float64)
    else:
        if dimension is None:
            dimension = 1 + max((v.indices[-1] for v in X if v.indices), default=-1)
        matrix = stack_vectors(X, dimension)
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def _codes(y: Sequence[Union[Category, int]]) -> np.ndarray:
    return np.array([int(label) for label in y], dtype=np.int64)


def train_ovr_svm(
    X: Union[sparse.spmatrix, Sequence[FeatureVector]],
    y: Sequence[Category],
    cfg: TrainConfig,
    feature_kind: str = "tfidf",
    vocabulary: Optional[Vocabulary] = None,
    dimension: Optional[int] = None,
) -> LinearModel:
    """
    Train five one-vs-rest hinge-loss classifiers with the Pegasos schedule.

    Every class shares one seeded permutation per epoch, so a step t visits
    the same sample for all classes. Each weight vector is kept as
    scale * v so the (1 - 1/t) shrink costs O(1); the bias is an extra
    constant-1 feature and is shrunk together with the weights.

    Args:
        X: Sparse (n, V) matrix or list of FeatureVector
        y: Gold category per row
        cfg: Regularization, epochs, seed and projection switch
        feature_kind: Tag stored on the model
        vocabulary: N-gram vocabulary stored on the model, if any
        dimension: Feature width when X is a list of vectors

    Returns:
        LinearModel with a 5 x V weight matrix

    Raises:
        ModelError: fewer than two samples or a single distinct label
    """
    if vocabulary is not None and dimension is None:
        dimension = len(vocabulary)
    matrix = _as_matrix(X, dimension)
    codes = _codes(y)
    n_samples, n_features = matrix.shape
    if n_samples != len(codes):
        raise InputError(f"{n_samples} feature rows but {len(codes)} labels")
    if n_samples < 2:
        raise ModelError("Training needs at least two samples")
    if len(np.unique(codes)) < 2:
        raise ModelError("Training labels contain a single class; one-vs-rest needs at least two")

    lam = cfg.lambda_
    radius = 1.0 / np.sqrt(lam)
    signs = np.where(codes[:, None] == np.arange(N_CATEGORIES)[None, :], 1.0, -1.0)

    weights = np.zeros((N_CATEGORIES, n_features))
    bias = np.zeros(N_CATEGORIES)
    scale = np.ones(N_CATEGORIES)
    sq_norm = np.zeros(N_CATEGORIES)

    indptr, indices, data = matrix.indptr, matrix.indices, matrix.data
    row_sq_norm = np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel() + 1.0

    rng = np.random.default_rng(cfg.seed)
    t = 0
    for _ in range(cfg.epochs):
        for i in rng.permutation(n_samples):
            t += 1
            eta = 1.0 / (lam * t)
            cols = indices[indptr[i] : indptr[i + 1]]
            vals = data[indptr[i] : indptr[i + 1]]

            raw = weights[:, cols] @ vals + bias
            margins = signs[i] * scale * raw
            violated = margins < 1.0

            shrink = 1.0 - eta * lam
            if shrink <= 0.0:
                weights[:] = 0.0
                bias[:] = 0.0
                scale[:] = 1.0
                sq_norm[:] = 0.0
                raw[:] = 0.0
            else:
                scale *= shrink

            if violated.any():
                step = np.where(violated, eta * signs[i] / scale, 0.0)
                sq_norm += 2.0 * step * raw + step**2 * row_sq_norm[i]
                weights[:, cols] += np.outer(step, vals)
                bias += step

            if cfg.projection:
                norms = scale * np.sqrt(np.maximum(sq_norm, 0.0))
                over = norms > radius
                scale[over] *= radius / norms[over]

            if scale.min() < _MIN_SCALE:
                weights *= scale[:, None]
                bias *= scale
                sq_norm *= scale**2
                scale[:] = 1.0

    weights *= scale[:, None]
    bias *= scale
    logger.debug(f"Pegasos finished {t} steps ({cfg.label()}) on {n_samples}x{n_features}")
    return LinearModel(weights=weights, bias=bias, feature_kind=feature_kind, vocabulary=vocabulary)


def objective(model: LinearModel, X: Union[sparse.spmatrix, Sequence[FeatureVector]], y: Sequence[Category], lambda_: float) -> np.ndarray:
    """Per-class lambda/2 * ||w_c||^2 + mean hinge loss on the given data."""
    matrix = _as_matrix(X, model.dimension)
    codes = _codes(y)
    signs = np.where(codes[:, None] == np.arange(N_CATEGORIES)[None, :], 1.0, -1.0)
    hinge = np.maximum(0.0, 1.0 - signs * model.decision_function(matrix)).mean(axis=0)
    return lambda_ / 2.0 * (model.weights**2).sum(axis=1) + hinge


def predict(model: LinearModel, x: FeatureVector) -> Tuple[Category, np.ndarray]:
    """Highest-scoring category and the five scores; ties go to the lowest code."""
    if x.indices and x.indices[-1] >= model.dimension:
        raise InputError(f"Feature index {x.indices[-1]} outside model dimension {model.dimension}")
    scores = model.weights[:, list(x.indices)] @ np.asarray(x.weights) + model.bias
    return Category(int(np.argmax(scores))), scores


def predict_matrix(model: LinearModel, X: sparse.spmatrix) -> List[Category]:
    scores = model.decision_function(X)
    return [Category(int(code)) for code in np.argmax(scores, axis=1)]


def _round_robin_folds(codes: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Shuffle each class and deal it into folds, picking up where the previous class stopped."""
    rng = np.random.default_rng(seed)
    folds = np.empty(len(codes), dtype=np.int64)
    start = 0
    for code in np.unique(codes):
        members = rng.permutation(np.flatnonzero(codes == code))
        folds[members] = (start + np.arange(len(members))) % k
        start = (start + len(members)) % k
    return folds


def stratified_kfold(y: Sequence[Category], k: int = 5, seed: int = 0) -> np.ndarray:
    """
    Fold id (0..k-1) for every sample.

    Per-class counts across folds differ by at most one; classes with fewer
    than k members are spread best-effort. When sklearn cannot stratify
    (every class smaller than k), classes are dealt round-robin instead.

    Raises:
        InputError: k < 2 or k greater than the number of samples
    """
    codes = _codes(y)
    if k < 2:
        raise InputError(f"Need at least 2 folds, got {k}")
    if k > len(codes):
        raise InputError(f"Cannot split {len(codes)} samples into {k} folds")

    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    folds = np.empty(len(codes), dtype=np.int64)
    try:
        for fold, (_, test_index) in enumerate(splitter.split(np.zeros(len(codes)), codes)):
            folds[test_index] = fold
    except ValueError as e:
        logger.warning(f"Stratified split into {k} folds not possible ({e}); dealing classes round-robin")
        return _round_robin_folds(codes, k, seed)
    return folds


def evaluate(pred: Sequence[Category], gold: Sequence[Category]) -> EvaluationResult:
    """
    Accuracy, support-weighted F1 and 5x5 confusion counts (rows gold, columns predicted).

    Raises:
        InputError: empty or mismatched inputs
    """
    if len(pred) != len(gold):
        raise InputError(f"{len(pred)} predictions for {len(gold)} gold labels")
    if len(gold) == 0:
        raise InputError("Cannot evaluate zero predictions")

    y_pred, y_true = _codes(pred), _codes(gold)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=CATEGORY_CODES, zero_division=0
    )
    return EvaluationResult(
        accuracy=float(accuracy_score(y_true, y_pred)),
        weighted_f1=float(f1_score(y_true, y_pred, labels=CATEGORY_CODES, average="weighted", zero_division=0)),
        confusion=confusion_matrix(y_true, y_pred, labels=CATEGORY_CODES).tolist(),
        per_class_f1=[float(v) for v in f1],
        per_class_precision=[float(v) for v in precision],
        per_class_recall=[float(v) for v in recall],
        support=[int(v) for v in support],
    )


def row_normalize(confusion: np.ndarray) -> List[List[float]]:
    """Divide each row by its total; rows without support stay zero."""
    confusion = np.asarray(confusion, dtype=float)
    totals = confusion.sum(axis=1, keepdims=True)
    normalized = np.divide(confusion, totals, out=np.zeros_like(confusion), where=totals > 0)
    return normalized.tolist()


def average_row_normalized(confusions: Sequence[np.ndarray]) -> List[List[float]]:
    """
    Mean of per-fold row-normalized confusion matrices.

    Each row is averaged over the folds in which that gold class occurs, so a
    class missing from one held-out part is not pulled towards zero.
    """
    stacked = np.asarray([row_normalize(confusion) for confusion in confusions], dtype=float)
    supported = np.asarray([np.asarray(c).sum(axis=1) > 0 for c in confusions])
    counts = supported.sum(axis=0)[:, None]
    total = stacked.sum(axis=0)
    return np.divide(total, counts, out=np.zeros_like(total), where=counts > 0).tolist()


def import_external_predictions(path: PathLike, corpus: Optional[Corpus] = None) -> PredictionImport:
    """
    Read `id,label` predictions produced by a model outside this package.

    Ids missing from the corpus are kept out of the map and reported as warnings.

    Raises:
        LabelError: label outside 0..4
    """
    predictions: Dict[str, Category] = {}
    unknown: List[str] = []
    for tweet_id, category in read_label_csv(path, "predictions"):
        if corpus is not None and tweet_id not in corpus:
            unknown.append(tweet_id)
            continue
        if tweet_id in predictions and predictions[tweet_id] != category:
            logger.warning(f"Conflicting predictions for '{tweet_id}', keeping the last one")
        predictions[tweet_id] = category

    if unknown:
        logger.warning(f"{len(unknown)} predicted ids are not in the corpus, e.g. '{unknown[0]}'")
    logger.info(f"Imported {len(predictions)} external predictions from {path}")
    return PredictionImport(predictions=predictions, unknown_ids=unknown)


def save_model(model: LinearModel, path: PathLike) -> Path:
    """Write a versioned JSON model: header, dense bias, sparse weight rows and vocabulary."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for row in model.weights:
        nonzero = np.flatnonzero(row)
        rows.append({"indices": nonzero.tolist(), "values": row[nonzero].tolist()})
    vocab = model.vocabulary
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "feature_kind": model.feature_kind,
        "n_features": model.dimension,
        "classes": CATEGORY_CODES,
        "bias": model.bias.tolist(),
        "weights": rows,
        "vocabulary": None
        if vocab is None
        else {
            "terms": list(vocab.terms),
            "df": vocab.df.tolist(),
            "n_docs": vocab.n_docs,
            "min_df": vocab.min_df,
            "ngram_max": vocab.ngram_max,
        },
    }
    path.write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
    logger.info(f"Saved {model.feature_kind} model ({model.dimension} features) to {path}")
    return path


def load_model(path: PathLike) -> LinearModel:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Model file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"Model file {path} is not valid JSON: {e.msg}") from e

    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise InputError(f"Unsupported model format version {version} in {path}")

    n_features = int(payload["n_features"])
    weights = np.zeros((N_CATEGORIES, n_features))
    for c, row in enumerate(payload["weights"]):
        weights[c, row["indices"]] = row["values"]

    vocabulary = None
    if payload.get("vocabulary") is not None:
        v = payload["vocabulary"]
        vocabulary = Vocabulary(
            terms=tuple(v["terms"]),
            df=np.array(v["df"], dtype=np.int64),
            n_docs=v["n_docs"],
            min_df=v["min_df"],
            ngram_max=v["ngram_max"],
        )
    return LinearModel(
        weights=weights,
        bias=np.array(payload["bias"], dtype=float),
        feature_kind=payload["feature_kind"],
        vocabulary=vocabulary,
    )


class ClassificationService:
    """Trains and evaluates the SVM on cleaned texts with one feature configuration."""

    def __init__(
        self,
        feature_kind: str = "tfidf",
        min_df: int = 2,
        ngram_max: int = 2,
        embeddings: Optional[EmbeddingTable] = None,
        n_jobs: int = 1,
    ):
        """
        Initialize classification service.

        Args:
            feature_kind: bow, tfidf or embed
            min_df: Vocabulary document-frequency floor
            ngram_max: Longest n-gram in the vocabulary
            embeddings: Word vectors for the embed kind
            n_jobs: Worker threads for grid points
        """
        self.feature_kind = feature_kind
        self.min_df = min_df
        self.ngram_max = ngram_max
        self.embeddings = embeddings
        self.n_jobs = n_jobs
        # fail fast on an unusable feature configuration
        self._featurizer()

    def _featurizer(self) -> Featurizer:
        return Featurizer(
            kind=self.feature_kind, min_df=self.min_df, ngram_max=self.ngram_max, embeddings=self.embeddings
        )

    def train(self, docs: Sequence[str], labels: Sequence[Category], cfg: TrainConfig) -> LinearModel:
        """Fit features on docs, then train the one-vs-rest SVM."""
        featurizer = self._featurizer()
        X = featurizer.fit_transform(docs)
        return train_ovr_svm(
            X,
            labels,
            cfg,
            feature_kind=self.feature_kind,
            vocabulary=featurizer.vocabulary,
            dimension=featurizer.dimension,
        )

    def predict_texts(self, model: LinearModel, docs: Sequence[str]) -> List[Category]:
        """Vectorize docs with the model's own vocabulary and predict."""
        featurizer = self._featurizer()
        featurizer.vocabulary = model.vocabulary
        if model.feature_kind != "embed" and model.vocabulary is None:
            raise InputError("Model carries no vocabulary for n-gram features")
        return predict_matrix(model, featurizer.transform(docs))

    def cross_validate(
        self, docs: Sequence[str], labels: Sequence[Category], cfg: TrainConfig, k: int = 5
    ) -> CVReport:
        """
        Stratified k-fold evaluation.

        Vocabulary and idf are refit on each training part, so held-out
        documents never influence features. Fold assignment is seeded by cfg.seed.

        Returns:
            CVReport with per-fold scores and the fold-averaged row-normalized confusion
        """
        if len(docs) != len(labels):
            raise InputError(f"{len(docs)} documents but {len(labels)} labels")
        folds = stratified_kfold(labels, k=k, seed=cfg.seed)
        labels = list(labels)

        accuracies: List[float] = []
        f1s: List[float] = []
        dimensions: List[int] = []
        confusions: List[np.ndarray] = []
        for fold in range(k):
            train_idx = np.flatnonzero(folds != fold)
            test_idx = np.flatnonzero(folds == fold)

            featurizer = self._featurizer()
            X_train = featurizer.fit_transform([docs[i] for i in train_idx])
            model = train_ovr_svm(
                X_train,
                [labels[i] for i in train_idx],
                cfg,
                feature_kind=self.feature_kind,
                vocabulary=featurizer.vocabulary,
                dimension=featurizer.dimension,
            )
            predicted = predict_matrix(model, featurizer.transform([docs[i] for i in test_idx]))
            result = evaluate(predicted, [labels[i] for i in test_idx])

            accuracies.append(result.accuracy)
            f1s.append(result.weighted_f1)
            dimensions.append(featurizer.dimension)
            confusions.append(np.asarray(result.confusion, dtype=np.int64))
            logger.debug(f"Fold {fold + 1}/{k}: accuracy={result.accuracy:.4f}, weighted F1={result.weighted_f1:.4f}")

        report = CVReport(
            feature_kind=self.feature_kind,
            config=cfg,
            fold_accuracy=accuracies,
            fold_weighted_f1=f1s,
            mean_accuracy=float(np.mean(accuracies)),
            mean_weighted_f1=float(np.mean(f1s)),
            confusion=average_row_normalized(confusions),
            n_samples=len(docs),
            folds=k,
            fold_feature_dimension=dimensions,
        )
        logger.info(
            f"CV {self.feature_kind} ({cfg.label()}): accuracy={report.mean_accuracy:.4f}, "
            f"weighted F1={report.mean_weighted_f1:.4f}"
        )
        return report

    def grid_search(
        self, docs: Sequence[str], labels: Sequence[Category], grid: Sequence[TrainConfig], k: int = 5
    ) -> GridSearchResult:
        """
        Cross-validate every grid point and keep the best mean weighted F1.

        Ties go to the earliest grid point.
        """
        if not grid:
            raise InputError("Grid search needs at least one configuration")

        if self.n_jobs > 1 and len(grid) > 1:
            with ThreadPoolExecutor(max_workers=self.n_jobs) as executor:
                reports = list(executor.map(lambda cfg: self.cross_validate(docs, labels, cfg, k), grid))
        else:
            reports = [self.cross_validate(docs, labels, cfg, k) for cfg in grid]

        best_index = 0
        for index, report in enumerate(reports):
            if report.mean_weighted_f1 > reports[best_index].mean_weighted_f1:
                best_index = index

        best = reports[best_index]
        logger.info(f"Grid search over {len(grid)} configs selected {best.config.label()}")
        return GridSearchResult(best=best.config, best_report=best, reports=reports)

    def compare_feature_kinds(
        self,
        docs: Sequence[str],
        labels: Sequence[Category],
        cfg: TrainConfig,
        kinds: Sequence[str] = ("bow", "tfidf"),
        k: int = 5,
    ) -> List[ModelComparisonRow]:
        """Cross-validate the SVM once per feature kind; one comparison row each."""
        rows = []
        for kind in kinds:
            service = ClassificationService(
                feature_kind=kind,
                min_df=self.min_df,
                ngram_max=self.ngram_max,
                embeddings=self.embeddings,
                n_jobs=self.n_jobs,
            )
            report = service.cross_validate(docs, labels, cfg, k)
            rows.append(
                ModelComparisonRow(
                    model=f"SVM + {FEATURE_LABELS[kind]}",
                    accuracy=report.mean_accuracy,
                    weighted_f1=report.mean_weighted_f1,
                )
            )
        return rows


def default_grid(lambdas: Sequence[float], epochs: Sequence[int], seed: int) -> List[TrainConfig]:
    """Cartesian grid in lambda-major order."""
    return [TrainConfig(lambda_=lam, epochs=ep, seed=seed) for lam in lambdas for ep in epochs]
