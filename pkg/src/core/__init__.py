"""Core module containing domain models, configuration and errors."""
