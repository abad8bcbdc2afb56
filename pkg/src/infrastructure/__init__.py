"""Infrastructure layer: tweet providers and run-directory storage."""
