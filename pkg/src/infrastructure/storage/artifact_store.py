"""Run-directory storage for result artifacts."""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from src.core.exceptions import InputError, MissingArtifactError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"

ModelT = TypeVar("ModelT", bound=BaseModel)


def to_json(payload: Union[BaseModel, Dict[str, Any], List[Any]]) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, trailing newline."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json", by_alias=True)
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def file_digest(path: Union[str, Path]) -> str:
    """sha256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ArtifactStore:
    """Writes and reads the files of one run directory."""

    def __init__(self, root: Union[str, Path]):
        """
        Initialize store.

        Args:
            root: Run directory; created on first write
        """
        self.root = Path(root)
        self.outputs: List[str] = []

    def path(self, relative: str) -> Path:
        return self.root / relative

    def _record(self, target: Path) -> None:
        relative = target.relative_to(self.root).as_posix()
        if relative not in self.outputs:
            self.outputs.append(relative)

    def write_result(self, relative: str, payload: Union[BaseModel, Dict[str, Any]]) -> Path:
        """
        Write a result JSON that points back at the run manifest.

        Args:
            relative: Path inside the run directory
            payload: Pydantic model or plain dict

        Returns:
            Absolute path of the written file
        """
        data = payload.model_dump(mode="json", by_alias=True) if isinstance(payload, BaseModel) else dict(payload)
        data["run_manifest"] = MANIFEST_NAME
        return self.write_text(relative, to_json(data))

    def write_text(self, relative: str, text: str) -> Path:
        target = self.path(relative)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding="utf-8")
        except OSError as e:
            logger.error(f"Error writing artifact {target}: {e}")
            raise
        self._record(target)
        logger.debug(f"Wrote {target}")
        return target

    def register(self, target: Union[str, Path]) -> None:
        """Record a file written by another component inside this run directory."""
        self._record(Path(target))

    def read_text(self, relative: str) -> str:
        target = self.path(relative)
        if not target.is_file():
            raise MissingArtifactError(relative, f"not found under {self.root}")
        return target.read_text(encoding="utf-8")

    def read_json(self, relative: str) -> Dict[str, Any]:
        """
        Read a JSON artifact.

        Raises:
            MissingArtifactError: file absent
            InputError: file is not valid JSON
        """
        try:
            return json.loads(self.read_text(relative))
        except json.JSONDecodeError as e:
            raise InputError(f"Artifact {self.path(relative)} is not valid JSON: {e.msg}") from e

    def read_model(self, relative: str, model: Type[ModelT]) -> ModelT:
        """Read a JSON artifact into a pydantic model, ignoring the manifest pointer."""
        try:
            return model.model_validate_json(self.read_text(relative))
        except ValidationError as e:
            raise InputError(f"Artifact {self.path(relative)} does not match {model.__name__}: {e}") from e

    def exists(self, relative: str) -> bool:
        return self.path(relative).is_file()

    def glob(self, pattern: str) -> List[Path]:
        return sorted(self.root.glob(pattern))

    def write_manifest(self, manifest: BaseModel) -> Path:
        target = self.path(MANIFEST_NAME)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(to_json(manifest), encoding="utf-8")
        logger.info(f"Run manifest written to {target}")
        return target
