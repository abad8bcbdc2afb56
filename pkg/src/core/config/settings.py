"""Application settings and configuration."""

import configparser
from pathlib import Path
from typing import Annotated, Any, Dict, List, Mapping, Optional

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.core.exceptions import ConfigError

RESOURCES_DIR = Path(__file__).resolve().parents[2] / "resources"


def _split_list(value: Any) -> Any:
    """Accept comma-separated strings for list fields (INI and env values)."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


StrList = Annotated[List[str], BeforeValidator(_split_list)]
IntList = Annotated[List[int], BeforeValidator(_split_list)]
FloatList = Annotated[List[float], BeforeValidator(_split_list)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SnowballSettings(_Section):
    """Defaults for the dynamic hashtag selection."""

    seeds: StrList = Field(default_factory=lambda: ["chinavirus", "chinesevirus"])
    sample_size: int = Field(default=500, ge=1)
    top_k: int = Field(default=5, ge=1)
    min_occurrences: int = Field(default=50, ge=1)
    rounds: int = Field(default=2, ge=1)


class PreprocessSettings(_Section):
    """Text cleaning resources and bigram policy."""

    stopwords_path: Path = RESOURCES_DIR / "stopwords_en.txt"
    lemmas_path: Path = RESOURCES_DIR / "lemmas_en.tsv"
    bigram_min_count: int = Field(default=5, ge=1)
    bigram_threshold: float = Field(default=10.0, ge=0.0)


class FeatureSettings(_Section):
    """Vectorisation options for the classifier."""

    kind: str = Field(default="tfidf", pattern="^(bow|tfidf|embed)$")
    min_df: int = Field(default=2, ge=1)
    ngram_max: int = Field(default=2, ge=1, le=2)
    embeddings_path: Optional[Path] = None


class ClassifySettings(_Section):
    """SVM training, grid and cross-validation options."""

    folds: int = Field(default=5, ge=2)
    lambdas: FloatList = Field(default_factory=lambda: [1e-5, 1e-4, 1e-3])
    epochs: IntList = Field(default_factory=lambda: [10, 30])
    default_lambda: float = Field(default=1e-4, gt=0.0)
    default_epochs: int = Field(default=30, ge=1)


class TopicSettings(_Section):
    """Gibbs LDA and topic-cluster options."""

    ks: IntList = Field(default_factory=lambda: [5, 10, 15, 20, 25])
    iterations: int = Field(default=1000, ge=1)
    burn_in: int = Field(default=100, ge=0)
    optimize_interval: int = Field(default=10, ge=0)
    target_clusters: int = Field(default=5, ge=1)
    top_words: int = Field(default=10, ge=1)
    coherence_top_n: int = Field(default=10, ge=2)
    min_cell_docs: int = Field(default=50, ge=2)

    @model_validator(mode="after")
    def _check_schedule(self) -> "TopicSettings":
        if self.iterations < self.burn_in:
            raise ValueError("iterations must be >= burn_in")
        if not self.ks:
            raise ValueError("ks needs at least one topic count")
        return self


class RunSettings(_Section):
    """Per-invocation options."""

    seed: int = 42
    out_dir: Path = Path("runs/latest")
    log_level: str = "INFO"
    n_jobs: int = Field(default=1, ge=1)


class Settings(BaseSettings):
    """Application settings loaded from overrides, INI file, environment and .env."""

    app_name: str = "Pandemic Racism Analytics"
    app_version: str = "1.0.0"

    snowball: SnowballSettings = Field(default_factory=SnowballSettings)
    preprocess: PreprocessSettings = Field(default_factory=PreprocessSettings)
    features: FeatureSettings = Field(default_factory=FeatureSettings)
    classify: ClassifySettings = Field(default_factory=ClassifySettings)
    topics: TopicSettings = Field(default_factory=TopicSettings)
    run: RunSettings = Field(default_factory=RunSettings)

    model_config = SettingsConfigDict(
        env_prefix="PIPELINE_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


SECTIONS = ("snowball", "preprocess", "features", "classify", "topics", "run")


def read_ini(path: Path) -> Dict[str, Dict[str, str]]:
    """
    Read a sectioned key-value config file.

    Args:
        path: INI file with one section per settings group

    Returns:
        Nested mapping section -> key -> raw string value
    """
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")

    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"Cannot parse config file {path}: {e}") from e

    data: Dict[str, Dict[str, str]] = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"Unknown config section [{section}] in {path}")
        data[section] = dict(parser.items(section))
    return data


def _merge(base: Dict[str, Any], updates: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in updates.items():
        if value is None:
            continue
        if isinstance(value, Mapping):
            current = merged.get(key)
            merged[key] = _merge(dict(current) if isinstance(current, Mapping) else {}, value)
        else:
            merged[key] = value
    return merged


def load_settings(
    config_path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Settings:
    """
    Build settings for one run.

    Args:
        config_path: Optional INI file; its values beat environment variables
        overrides: Nested values from command line flags; they beat the file

    Returns:
        Validated settings
    """
    data: Dict[str, Any] = {}
    if config_path is not None:
        data = _merge(data, read_ini(Path(config_path)))
    if overrides:
        data = _merge(data, overrides)

    try:
        return Settings(**data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"Invalid setting '{location}': {first['msg']}") from e

