"""Annotation reliability, table rendering and run manifests."""

import logging
import time
from datetime import date, datetime, timezone
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, ValidationError

from src.core.config.settings import Settings
from src.core.domain.models import AnnotationSet, Category, Stage
from src.core.domain.schemas import (
    CVReport,
    DailyCounts,
    ModelComparison,
    ModelComparisonRow,
    ReliabilityReport,
    RunManifest,
    StageCategoryTable,
    TokenLengthStats,
    TokenStatsReport,
    TopicPipelineResult,
)
from src.core.exceptions import InputError, LabelError, MissingArtifactError
from src.infrastructure.storage import ArtifactStore, file_digest
from src.services.classification_service import FEATURE_LABELS

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def intercoder_reliability(annotations: AnnotationSet) -> ReliabilityReport:
    """
    Pairwise raw agreement between annotators and its mean over pairs.

    Agreement of a pair is the fraction of the items both labeled on which
    the labels match.

    Raises:
        InputError: a pair of annotators shares no item
    """
    names = annotations.annotators
    pairwise: Dict[str, Dict[str, float]] = {name: {} for name in names}
    values: List[float] = []
    for a, b in combinations(names, 2):
        left, right = annotations.annotations[a], annotations.annotations[b]
        shared = set(left) & set(right)
        if not shared:
            raise InputError(f"Annotators '{a}' and '{b}' share no labeled items")
        agreement = sum(1 for item in shared if left[item] == right[item]) / len(shared)
        pairwise[a][b] = agreement
        pairwise[b][a] = agreement
        values.append(agreement)

    common = set.intersection(*(set(labels) for labels in annotations.annotations.values()))
    if any(len(labels) != len(common) for labels in annotations.annotations.values()):
        logger.warning(f"Annotators cover different items; {len(common)} are labeled by everyone")

    overall = sum(values) / len(values)
    logger.info(f"Inter-coder reliability over {len(names)} annotators: {overall:.4f}")
    return ReliabilityReport(annotators=names, pairwise=pairwise, overall=overall, shared_items=len(common))


def load_annotations(path: PathLike) -> AnnotationSet:
    """
    Read a long-format `annotator,id,label` CSV.

    Raises:
        InputError: missing file or header, fewer than two annotators
        LabelError: label outside 0..4 or an item labeled twice by one annotator
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Annotation file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise InputError(f"Cannot parse annotation file {path}: {e}") from e
    if list(frame.columns[:3]) != ["annotator", "id", "label"]:
        raise InputError(f"Annotation file {path} must have header 'annotator,id,label'")

    annotations: Dict[str, Dict[str, Category]] = {}
    for offset, row in enumerate(frame.itertuples(index=False)):
        line = offset + 2
        try:
            category = Category.from_code(row.label)
        except LabelError as e:
            raise LabelError(f"{path}:{line}: {e}") from None
        labels = annotations.setdefault(row.annotator.strip(), {})
        item = row.id.strip()
        if item in labels:
            raise LabelError(f"{path}:{line}: annotator '{row.annotator}' labeled '{item}' twice")
        labels[item] = category

    try:
        return AnnotationSet(annotations=annotations)
    except ValidationError as e:
        raise InputError(f"{path}: {e.errors()[0]['msg']}") from e


def comparison_frame(rows: Sequence[ModelComparisonRow]) -> pd.DataFrame:
    """Model, accuracy in percent and weighted F1."""
    return pd.DataFrame(
        {
            "model": [row.model for row in rows],
            "accuracy_pct": [round(row.accuracy * 100.0, 2) for row in rows],
            "weighted_f1": [round(row.weighted_f1, 4) for row in rows],
        }
    )


def counts_frame(table: StageCategoryTable) -> pd.DataFrame:
    """Four category rows with total and per-stage counts."""
    records = []
    for category in Category.racist():
        row = table.counts.get(category)
        if row is None:
            raise MissingArtifactError("stage_counts", f"no row for {category.display_name}")
        missing = [stage.value for stage in Stage if stage not in row]
        if missing:
            raise MissingArtifactError("stage_counts", f"{category.display_name} lacks stage {missing[0]}")
        records.append(
            {
                "category": category.display_name,
                "total": table.totals.get(category, sum(row.values())),
                **{stage.value: row[stage] for stage in Stage},
            }
        )
    return pd.DataFrame.from_records(records, columns=["category", "total", "S1", "S2", "S3"])


def topic_frames(result: TopicPipelineResult, category: Category) -> Dict[str, pd.DataFrame]:
    """
    Keyword grid of one racist category.

    Returns:
        "long": one row per (stage, topic, rank) word with its probability;
        "grid": topic rows by stage columns, keywords comma-joined
    """
    long_records = []
    grid: Dict[str, List[str]] = {}
    n_topics = 0
    for stage in Stage:
        try:
            cell = result.cell(category, stage)
        except KeyError:
            raise MissingArtifactError("topics", f"no {category.display_name} cell for stage {stage.value}") from None
        if cell.status != "ok":
            grid[stage.value] = [f"insufficient: {cell.reason}"]
            continue
        grid[stage.value] = []
        for topic, cluster in enumerate(cell.clusters, start=1):
            grid[stage.value].append(", ".join(cluster.top_words))
            for rank, (word, probability) in enumerate(zip(cluster.top_words, cluster.probabilities), start=1):
                long_records.append(
                    {
                        "stage": stage.value,
                        "topic": topic,
                        "rank": rank,
                        "word": word,
                        "probability": probability,
                    }
                )
        n_topics = max(n_topics, len(cell.clusters))

    n_rows = max(n_topics, 1)
    grid_frame = pd.DataFrame(
        {
            "topic": [f"Topic {i}" for i in range(1, n_rows + 1)],
            **{stage: cells + [""] * (n_rows - len(cells)) for stage, cells in grid.items()},
        }
    )
    long_frame = pd.DataFrame.from_records(long_records, columns=["stage", "topic", "rank", "word", "probability"])
    return {"long": long_frame, "grid": grid_frame}


def daily_frame(counts: Mapping[date, int]) -> pd.DataFrame:
    days = sorted(counts)
    return pd.DataFrame({"date": [day.isoformat() for day in days], "count": [counts[day] for day in days]})


def token_stats_frame(stats: Mapping[str, TokenLengthStats]) -> pd.DataFrame:
    return pd.DataFrame.from_records(
        [{"path": name, **value.model_dump()} for name, value in sorted(stats.items())],
        columns=["path", "min", "max", "median", "mean", "n_docs"],
    )


def markdown_table(frame: pd.DataFrame) -> str:
    """Pipe table with numeric columns right-aligned."""
    header = "| " + " | ".join(str(column) for column in frame.columns) + " |"
    align = "|" + "|".join("---:" if pd.api.types.is_numeric_dtype(frame[c]) else "---" for c in frame.columns) + "|"
    lines = [header, align]
    for row in frame.itertuples(index=False):
        lines.append("| " + " | ".join(str(value).replace("|", "\\|") for value in row) + " |")
    return "\n".join(lines)


class ReportInputs(BaseModel):
    """Upstream results available for rendering; absent ones are None."""

    comparison: Optional[List[ModelComparisonRow]] = None
    counts: Optional[StageCategoryTable] = None
    topics: Optional[TopicPipelineResult] = None
    daily: Optional[Dict[date, int]] = None
    token_stats: Optional[Dict[str, TokenLengthStats]] = None

    def is_empty(self) -> bool:
        return all(value is None for value in self.model_dump().values())


class ReportService:
    """Renders result artifacts into CSV and markdown tables."""

    def __init__(self, store: ArtifactStore):
        self.store = store

    def _write_frame(self, name: str, frame: pd.DataFrame, title: str) -> List[Path]:
        csv_path = self.store.write_text(f"tables/{name}.csv", frame.to_csv(index=False))
        md_path = self.store.write_text(f"tables/{name}.md", f"# {title}\n\n{markdown_table(frame)}\n")
        return [csv_path, md_path]

    def render_tables(self, inputs: ReportInputs) -> List[Path]:
        """
        Write every table whose upstream result is present.

        Args:
            inputs: Collected upstream results

        Returns:
            Paths of written CSV and markdown files

        Raises:
            MissingArtifactError: nothing to render, or a result lacks a stage
        """
        if inputs.is_empty():
            raise MissingArtifactError("results", "no upstream results to render")

        written: List[Path] = []
        if inputs.comparison is not None:
            written += self._write_frame("model_comparison", comparison_frame(inputs.comparison), "Model comparison")
        if inputs.counts is not None:
            written += self._write_frame("stage_counts", counts_frame(inputs.counts), "Tweets per category and stage")
        if inputs.topics is not None:
            for category in Category.racist():
                frames = topic_frames(inputs.topics, category)
                slug = category.display_name.lower()
                written.append(self.store.write_text(f"tables/topics_{slug}.csv", frames["long"].to_csv(index=False)))
                written.append(
                    self.store.write_text(
                        f"tables/topics_{slug}.md",
                        f"# Topics: {category.display_name}\n\n{markdown_table(frames['grid'])}\n",
                    )
                )
        if inputs.daily is not None:
            written += self._write_frame("daily_counts", daily_frame(inputs.daily), "Tweets per day")
        if inputs.token_stats is not None:
            written += self._write_frame("token_stats", token_stats_frame(inputs.token_stats), "Tokens per document")

        logger.info(f"Rendered {len(written)} table files")
        return written

    @staticmethod
    def collect_inputs(run_dirs: Sequence[PathLike]) -> ReportInputs:
        """
        Gather upstream artifacts from one or more run directories.

        Later directories win when the same artifact appears twice. Comparison
        rows are keyed by model name: a comparison.json row replaces the row of
        the matching cv_<kind>.json, and rows keep their first-seen order.
        """
        data: Dict[str, object] = {}
        comparison: Dict[str, ModelComparisonRow] = {}
        for run_dir in run_dirs:
            store = ArtifactStore(run_dir)
            if not store.root.is_dir():
                raise MissingArtifactError(str(run_dir), "run directory does not exist")
            for cv_path in store.glob("cv_*.json"):
                report = store.read_model(cv_path.name, CVReport)
                row = ModelComparisonRow(
                    model=f"SVM + {FEATURE_LABELS.get(report.feature_kind, report.feature_kind)}",
                    accuracy=report.mean_accuracy,
                    weighted_f1=report.mean_weighted_f1,
                )
                comparison[row.model] = row
            if store.exists("comparison.json"):
                for row in store.read_model("comparison.json", ModelComparison).rows:
                    comparison[row.model] = row
            if store.exists("stage_counts.json"):
                data["counts"] = store.read_model("stage_counts.json", StageCategoryTable)
            if store.exists("topics/topics.json"):
                data["topics"] = store.read_model("topics/topics.json", TopicPipelineResult)
            if store.exists("daily_counts.json"):
                data["daily"] = store.read_model("daily_counts.json", DailyCounts).counts
            if store.exists("token_stats.json"):
                data["token_stats"] = store.read_model("token_stats.json", TokenStatsReport).stats

        if comparison:
            data["comparison"] = list(comparison.values())
        return ReportInputs.model_validate(data)


class RunTimer:
    """Wall-clock bookkeeping for the manifest."""

    def __init__(self):
        self.started_at = datetime.now(timezone.utc)
        self._start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self._start


def write_manifest(
    store: ArtifactStore,
    command: str,
    settings: Settings,
    timer: RunTimer,
    inputs: Optional[Mapping[str, PathLike]] = None,
) -> RunManifest:
    """
    Record settings, seeds, input digests, outputs and timings of a run.

    Args:
        store: Run directory that received the outputs
        command: CLI subcommand
        settings: Resolved settings of the run
        timer: Started when the command began
        inputs: Named input files to digest
    """
    digests = {name: file_digest(path) for name, path in sorted((inputs or {}).items()) if Path(path).is_file()}
    manifest = RunManifest(
        command=command,
        app_version=settings.app_version,
        settings=settings.model_dump(mode="json"),
        seeds={"run": settings.run.seed},
        inputs=digests,
        outputs=sorted(store.outputs),
        started_at=timer.started_at.isoformat(),
        finished_at=datetime.now(timezone.utc).isoformat(),
        duration_seconds=round(timer.elapsed(), 6),
    )
    store.write_manifest(manifest)
    return manifest
