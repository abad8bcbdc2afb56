"""Command line interface: one subcommand per pipeline step."""

import argparse
import asyncio
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from src.core.config.settings import Settings, load_settings
from src.core.domain.estimators import EmbeddingTable
from src.core.domain.models import Category, Corpus, Stage
from src.core.domain.schemas import (
    BigramPolicy,
    DailyCounts,
    ModelComparison,
    SnowballConfig,
    TokenStatsReport,
    TrainConfig,
)
from src.core.exceptions import InputError, ModelError
from src.infrastructure.providers import OfflineCorpusProvider
from src.infrastructure.storage import ArtifactStore
from src.services.classification_service import (
    ClassificationService,
    default_grid,
    evaluate,
    import_external_predictions,
    load_model,
    save_model,
)
from src.services.corpus_service import CorpusService, corpus_summary, daily_counts, stage_category_counts
from src.services.feature_service import load_embeddings, save_vocabulary
from src.services.preprocess_service import (
    classification_texts,
    load_lexicon,
    token_length_stats,
    topic_documents,
)
from src.services.report_service import (
    ReportService,
    RunTimer,
    intercoder_reliability,
    load_annotations,
    write_manifest,
)
from src.services.snowball_service import SnowballService
from src.services.topic_service import TopicService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

Inputs = Dict[str, Path]
Handler = Callable[[argparse.Namespace, Settings, ArtifactStore], Inputs]


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


def _corpus_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", required=True, type=Path, help="JSONL tweet corpus")


def _feature_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--features", choices=["bow", "tfidf", "embed"], help="Document representation")
    parser.add_argument("--embeddings", type=Path, help="Text embedding file for --features embed")
    parser.add_argument("--min-df", type=int, help="Vocabulary document-frequency floor")
    parser.add_argument("--ngram-max", type=int, choices=[1, 2], help="Longest n-gram in the vocabulary")


def _global_args() -> argparse.ArgumentParser:
    """Flags accepted both before and after the subcommand; absent ones stay unset."""
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", type=Path, help="INI config file")
    common.add_argument("--seed", type=int, help="Seed for every random component")
    common.add_argument("--out", type=Path, help="Run directory for results")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    common.add_argument("--jobs", type=int, help="Parallel workers for grid points and topic counts")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_args()
    parser = argparse.ArgumentParser(
        prog="pandemic-racism",
        description="Tweet collection, racism classification and topic analysis across pandemic stages.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    ingest = sub.add_parser("ingest", parents=[common], help="Validate a corpus and summarise it")
    ingest.add_argument("corpus", type=Path, help="JSONL tweet corpus")
    ingest.add_argument("--labels", type=Path, help="Gold labels CSV (id,label)")

    snowball = sub.add_parser("snowball", parents=[common], help="Discover co-occurring hashtags from seeds")
    _corpus_arg(snowball)
    snowball.add_argument("--seeds", help="Comma-separated seed hashtags")
    snowball.add_argument("--rounds", type=int)
    snowball.add_argument("--top-k", type=int)
    snowball.add_argument("--sample-size", type=int)
    snowball.add_argument("--min-occurrences", type=int)
    snowball.add_argument("--stage", choices=[stage.value for stage in Stage], help="Replay one stage only")

    reliability = sub.add_parser("reliability", parents=[common], help="Inter-coder agreement of an annotation CSV")
    reliability.add_argument("annotations", type=Path, help="CSV with annotator,id,label")

    for name, text in (("cv", "Cross-validate the SVM"), ("grid", "Grid-search SVM hyperparameters")):
        command = sub.add_parser(name, parents=[common], help=text)
        _corpus_arg(command)
        command.add_argument("--labels", required=True, type=Path)
        command.add_argument("--folds", type=int)
        _feature_args(command)
        if name == "cv":
            command.add_argument("--lambda", dest="lambda_", type=float)
            command.add_argument("--epochs", type=int)
            command.add_argument("--compare", action="store_true", help="Also compare every feature kind")

    train = sub.add_parser("train", parents=[common], help="Train the SVM on all labeled tweets")
    _corpus_arg(train)
    train.add_argument("--labels", required=True, type=Path)
    train.add_argument("--lambda", dest="lambda_", type=float)
    train.add_argument("--epochs", type=int)
    _feature_args(train)

    predict = sub.add_parser("predict", parents=[common], help="Label every tweet with a trained model")
    _corpus_arg(predict)
    predict.add_argument("--model", required=True, type=Path)
    predict.add_argument("--embeddings", type=Path)

    imports = sub.add_parser("import-preds", parents=[common], help="Use predictions made by an external model")
    _corpus_arg(imports)
    imports.add_argument("preds", type=Path, help="Predictions CSV (id,label)")

    topics = sub.add_parser("topics", parents=[common], help="Topic clusters per racist category and stage")
    topics.add_argument("--corpus", type=Path, help="JSONL tweet corpus (default: corpus.jsonl written by ingest into --out)")
    source = topics.add_mutually_exclusive_group(required=True)
    source.add_argument("--preds", type=Path, help="Predictions CSV (id,label)")
    source.add_argument("--labels", type=Path, help="Gold labels CSV (id,label)")
    topics.add_argument("--ks", help="Comma-separated candidate topic counts")
    topics.add_argument("--iterations", type=int)
    topics.add_argument("--burn-in", type=int, help="Sweeps before prior optimization starts")
    topics.add_argument("--optimize-interval", type=int, help="Sweeps between prior updates; 0 disables them")
    topics.add_argument("--min-cell-docs", type=int)

    report = sub.add_parser("report", parents=[common], help="Render tables from earlier runs")
    report.add_argument("--from", dest="from_dirs", nargs="+", type=Path, help="Run directories to read")

    return parser


def settings_overrides(args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
    """Map command line flags onto nested settings keys."""
    get = lambda name: getattr(args, name, None)  # noqa: E731
    return {
        "run": {"seed": get("seed"), "out_dir": get("out"), "log_level": get("log_level"), "n_jobs": get("jobs")},
        "features": {
            "kind": get("features"),
            "embeddings_path": get("embeddings"),
            "min_df": get("min_df"),
            "ngram_max": get("ngram_max"),
        },
        "classify": {"folds": get("folds"), "default_lambda": get("lambda_"), "default_epochs": get("epochs")},
        "topics": {
            "ks": get("ks"),
            "iterations": get("iterations"),
            "burn_in": get("burn_in"),
            "optimize_interval": get("optimize_interval"),
            "min_cell_docs": get("min_cell_docs"),
        },
        "snowball": {
            "seeds": get("seeds"),
            "rounds": get("rounds"),
            "top_k": get("top_k"),
            "sample_size": get("sample_size"),
            "min_occurrences": get("min_occurrences"),
        },
    }


def _labeled_corpus(corpus_path: Path, labels_path: Path) -> Corpus:
    service = CorpusService()
    corpus = service.load_corpus(corpus_path)
    return service.attach_labels(corpus, service.load_labels(labels_path))


def _training_data(corpus: Corpus) -> Tuple[List[str], List[str], List[Category]]:
    labeled = [tweet for tweet in corpus if tweet.id in corpus.labels]
    ids, texts = classification_texts(labeled)
    return ids, texts, [corpus.labels[tweet_id] for tweet_id in ids]


def _embeddings(settings: Settings) -> Optional[EmbeddingTable]:
    path = settings.features.embeddings_path
    return load_embeddings(path) if path is not None else None


def _classifier(settings: Settings, kind: Optional[str] = None) -> ClassificationService:
    features = settings.features
    return ClassificationService(
        feature_kind=kind or features.kind,
        min_df=features.min_df,
        ngram_max=features.ngram_max,
        embeddings=_embeddings(settings),
        n_jobs=settings.run.n_jobs,
    )


def _train_config(settings: Settings) -> TrainConfig:
    return TrainConfig(
        lambda_=settings.classify.default_lambda,
        epochs=settings.classify.default_epochs,
        seed=settings.run.seed,
    )


def _embedding_input(settings: Settings) -> Inputs:
    path = settings.features.embeddings_path
    return {"embeddings": path} if path is not None else {}


def cmd_ingest(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> Inputs:
    service = CorpusService()
    corpus = service.load_corpus(args.corpus)
    inputs: Inputs = {"corpus": args.corpus}
    if args.labels is not None:
        corpus = service.attach_labels(corpus, service.load_labels(args.labels))
        inputs["labels"] = args.labels
        store.write_result("stage_counts.json", stage_category_counts(corpus, corpus.labels))

    store.write_result("corpus_summary.json", corpus_summary(corpus))
    store.write_result("daily_counts.json", DailyCounts(counts=daily_counts(corpus)))

    pre = settings.preprocess
    lexicon = load_lexicon(pre.stopwords_path, pre.lemmas_path)
    policy = BigramPolicy(min_count=pre.bigram_min_count, score_threshold=pre.bigram_threshold)
    _, texts = classification_texts(corpus)
    stats = {
        "classification": token_length_stats([len(text.split()) for text in texts]),
        "topics": token_length_stats(topic_documents(corpus, lexicon, policy)),
    }
    store.write_result("token_stats.json", TokenStatsReport(stats=stats))
    store.register(service.dump_corpus(corpus, store.path("corpus.jsonl")))
    return inputs


def cmd_snowball(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> Inputs:
    corpus = CorpusService().load_corpus(args.corpus)
    stage = Stage(args.stage) if args.stage else None
    s = settings.snowball
    config = SnowballConfig(
        seeds=s.seeds,
        sample_size=s.sample_size,
        top_k=s.top_k,
        min_occurrences=s.min_occurrences,
        rounds=s.rounds,
    )
    result = asyncio.run(SnowballService(OfflineCorpusProvider(corpus, stage)).run_snowball(config))
    name = f"snowball_{stage.value}.json" if stage else "snowball.json"
    store.write_result(name, result)
    return {"corpus": args.corpus}


def cmd_reliability(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> Inputs:
    report = intercoder_reliability(load_annotations(args.annotations))
    store.write_result("reliability.json", report)
    return {"annotations": args.annotations}


def cmd_cv(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> Inputs:
    corpus = _labeled_corpus(args.corpus, args.labels)
    _, texts, labels = _training_data(corpus)
    service = _classifier(settings)
    cfg = _train_config(settings)
    folds = settings.classify.folds

    report = service.cross_validate(texts, labels, cfg, k=folds)
    store.write_result(f"cv_{service.feature_kind}.json", report)

    if args.compare:
        kinds = ["bow", "tfidf"] + (["embed"] if service.embeddings is not None else [])
        rows = service.compare_feature_kinds(texts, labels, cfg, kinds=kinds, k=folds)
        store.write_result("comparison.json", ModelComparison(rows=rows))

    return {"corpus": args.corpus, "labels": args.labels, **_embedding_input(settings)}


def cmd_grid(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> Inputs:
    corpus = _labeled_corpus(args.corpus, args.labels)
    _, texts, labels = _training_data(corpus)
    service = _classifier(settings)
    c = settings.classify
    result = service.grid_search(texts, labels, default_grid(c.lambdas, c.epochs, settings.run.seed), k=c.folds)
    store.write_result(f"grid_{service.feature_kind}.json", result)
    store.write_result(f"cv_{service.feature_kind}.json", result.best_report)
    return {"corpus": args.corpus, "labels": args.labels, **_embedding_input(settings)}


def cmd_train(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> Inputs:
    corpus = _labeled_corpus(args.corpus, args.labels)
    _, texts, labels = _training_data(corpus)
    service = _classifier(settings)
    cfg = _train_config(settings)

    model = service.train(texts, labels, cfg)
    kind = service.feature_kind
    store.register(save_model(model, store.path(f"models/model_{kind}.json")))
    if model.vocabulary is not None:
        store.register(save_vocabulary(model.vocabulary, store.path(f"models/vocabulary_{kind}.tsv")))

    training = evaluate(service.predict_texts(model, texts), labels)
    store.write_result(f"train_{kind}.json", {"config": cfg.model_dump(by_alias=True), "training": training.model_dump()})
    return {"corpus": args.corpus, "labels": args.labels, **_embedding_input(settings)}


def _write_predictions(store: ArtifactStore, predictions: Dict[str, Category]) -> None:
    frame = pd.DataFrame({"id": list(predictions), "label": [int(c) for c in predictions.values()]})
    store.write_text("predictions.csv", frame.to_csv(index=False))


def _prediction_summary(predictions: Dict[str, Category]) -> Dict[str, int]:
    counts = Counter(predictions.values())
    return {category.display_name: counts.get(category, 0) for category in Category}


def cmd_predict(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> Inputs:
    corpus = CorpusService().load_corpus(args.corpus)
    model = load_model(args.model)
    service = _classifier(settings, kind=model.feature_kind)
    ids, texts = classification_texts(corpus)
    predictions = dict(zip(ids, service.predict_texts(model, texts)))

    _write_predictions(store, predictions)
    store.write_result("stage_counts.json", stage_category_counts(corpus, predictions))
    store.write_result("predict.json", {"feature_kind": model.feature_kind, "counts": _prediction_summary(predictions)})
    return {"corpus": args.corpus, "model": args.model, **_embedding_input(settings)}


def cmd_import_preds(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> Inputs:
    corpus = CorpusService().load_corpus(args.corpus)
    imported = import_external_predictions(args.preds, corpus)

    _write_predictions(store, imported.predictions)
    store.write_result("stage_counts.json", stage_category_counts(corpus, imported.predictions))
    store.write_result(
        "import_preds.json",
        {
            "counts": _prediction_summary(imported.predictions),
            "n_predictions": len(imported.predictions),
            "unknown_ids": imported.unknown_ids,
        },
    )
    return {"corpus": args.corpus, "predictions": args.preds}


def cmd_topics(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> Inputs:
    corpus_path = args.corpus or store.path("corpus.jsonl")
    corpus_service = CorpusService()
    corpus = corpus_service.load_corpus(corpus_path)
    if args.preds is not None:
        predictions = import_external_predictions(args.preds, corpus).predictions
        inputs: Inputs = {"corpus": corpus_path, "predictions": args.preds}
    else:
        predictions = corpus_service.load_labels(args.labels)
        inputs = {"corpus": corpus_path, "labels": args.labels}

    pre = settings.preprocess
    service = TopicService(
        lexicon=load_lexicon(pre.stopwords_path, pre.lemmas_path),
        bigram_policy=BigramPolicy(min_count=pre.bigram_min_count, score_threshold=pre.bigram_threshold),
        topic_settings=settings.topics,
        seed=settings.run.seed,
        n_jobs=settings.run.n_jobs,
    )
    result = service.run_topic_pipeline(corpus, predictions)

    store.write_result("topics/topics.json", result)
    for cell in result.cells:
        slug = cell.category.display_name.lower()
        store.write_result(f"topics/{slug}_{cell.stage.value}.json", cell)
    return inputs


def cmd_report(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> Inputs:
    run_dirs = args.from_dirs or [store.root]
    inputs = ReportService.collect_inputs(run_dirs)
    ReportService(store).render_tables(inputs)
    return {}


COMMANDS: Dict[str, Handler] = {
    "ingest": cmd_ingest,
    "snowball": cmd_snowball,
    "reliability": cmd_reliability,
    "cv": cmd_cv,
    "grid": cmd_grid,
    "train": cmd_train,
    "predict": cmd_predict,
    "import-preds": cmd_import_preds,
    "topics": cmd_topics,
    "report": cmd_report,
}


def _one_line(error: BaseException) -> str:
    return " ".join(str(error).split()) or error.__class__.__name__


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 2 on usage errors, 3 on input errors, 4 otherwise
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        settings = load_settings(getattr(args, "config", None), settings_overrides(args))
        configure_logging(settings.run.log_level)
        logger.info(f"Starting {settings.app_name} v{settings.app_version}: {args.command}")

        timer = RunTimer()
        store = ArtifactStore(settings.run.out_dir)
        inputs = COMMANDS[args.command](args, settings, store)
        write_manifest(store, args.command, settings, timer, inputs)
    except (InputError, ModelError) as e:
        logger.debug("Input error details", exc_info=True)
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:
        logger.debug(f"Unexpected failure in {args.command}", exc_info=True)
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return EXIT_INTERNAL

    logger.info(f"Finished {args.command}; results in {settings.run.out_dir}")
    return EXIT_OK
