"""Tests for Pandemic Racism Analytics."""
