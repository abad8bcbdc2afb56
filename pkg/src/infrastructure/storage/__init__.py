"""Run-directory artifact storage."""

from .artifact_store import MANIFEST_NAME, ArtifactStore, file_digest, to_json

__all__ = ["ArtifactStore", "MANIFEST_NAME", "file_digest", "to_json"]
