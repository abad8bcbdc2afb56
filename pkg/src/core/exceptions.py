"""Error hierarchy shared by services and the command line."""

from typing import Optional


class PipelineError(Exception):
    """Base class for every error raised by the pipeline."""


class InputError(PipelineError, ValueError):
    """Input data, files or configuration that cannot be used as given."""


class DuplicateIdError(InputError):
    """The same tweet id appears more than once."""

    def __init__(self, tweet_id: str, line: Optional[int] = None):
        self.tweet_id = tweet_id
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"Duplicate tweet id '{tweet_id}'{where}")


class StageOutOfRangeError(InputError):
    """Timestamp falls outside the 2020-01-01..2020-04-30 study range."""


class LabelError(InputError):
    """Category label outside the 0..4 code table."""


class ConfigError(InputError):
    """Unknown or invalid configuration value."""


class MissingArtifactError(InputError):
    """An upstream result needed for rendering is absent."""

    def __init__(self, artifact: str, detail: str = ""):
        self.artifact = artifact
        suffix = f": {detail}" if detail else ""
        super().__init__(f"Missing upstream artifact '{artifact}'{suffix}")


class ProviderError(PipelineError):
    """A tweet provider failed while sampling a hashtag."""

    def __init__(self, hashtag: str, cause: Exception):
        self.hashtag = hashtag
        self.cause = cause
        super().__init__(f"Provider failed for hashtag '{hashtag}': {cause}")


class ModelError(PipelineError, ValueError):
    """Training or fitting input is degenerate."""
