"""Configuration module."""

from .settings import RESOURCES_DIR, Settings, load_settings

__all__ = ["Settings", "load_settings", "RESOURCES_DIR"]
